import json

import pytest

from roughpipe.cli import ExperimentConfig, RunManifest, main, report, run


def _cfg(tmp_path, **kw):
    base = dict(campaign="alpha", epsilons=(0.125,), n_samples=2, s=2, out_dir=str(tmp_path / "run"))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("bad", [dict(epsilons=(0.3,)), dict(n_samples=0), dict(campaign="nope"), dict(construction="x")])
def test_config_validation(tmp_path, bad):
    with pytest.raises(ValueError):
        _cfg(tmp_path, **bad)


def test_config_round_trip(tmp_path):
    c = _cfg(tmp_path).resolved()
    assert ExperimentConfig.loads(c.dumps()) == c
    assert c.period_T == 1.0 and c.axisym is True and c.solver is not None


def test_correlation_defaults(tmp_path):
    c = _cfg(tmp_path, campaign="correlation", s=None).resolved()
    assert (c.period_T, c.s, c.axisym) == (3.0, 2, False)


def test_solve_zero_flux_smooth(tmp_path):
    man = run(_cfg(tmp_path, campaign="solve", phi=0.0, construction="smooth", n_samples=1))
    root = tmp_path / "run"
    rows = (root / "solve.csv").read_text().splitlines()
    assert rows[1].split(",")[3:5] == ["0.0", "0.0"]
    assert len(man.sample_artifacts) == 1


def test_alpha_smooth_ensemble_is_numerically_zero(tmp_path):
    run(_cfg(tmp_path, construction="smooth", s=8))
    row = (tmp_path / "run" / "alpha.csv").read_text().splitlines()[1].split(",")
    # numerical slip of the wall closure is O(h^2); h = 1/64 here
    assert abs(0.125 * float(row[2])) < (1 / 64) ** 2


def test_runs_are_reproducible(tmp_path):
    a = run(_cfg(tmp_path, out_dir=str(tmp_path / "a")))
    b = run(_cfg(tmp_path, out_dir=str(tmp_path / "b")))
    for k in a.artifacts:
        if k != "config.json":
            assert a.artifacts[k] == b.artifacts[k], k


def test_report_is_byte_identical_and_marks_checks(tmp_path):
    run(_cfg(tmp_path, check=True))
    m = tmp_path / "run" / "manifest.json"
    r1, r2 = report(m), report(m)
    assert r1 == r2
    assert "[PASS]" in r1 and "overall: PASS" in r1


def test_failure_ledger_in_report(tmp_path):
    run(_cfg(tmp_path, construction="poisson", s=3))
    m = tmp_path / "run" / "manifest.json"
    man = RunManifest.loads(m.read_text())
    assert len(man.failures) == 2
    text = report(m)
    assert "## Failure ledger" in text and "seed=0" in text and "seed=1" in text


def test_report_missing_artifact(tmp_path):
    run(_cfg(tmp_path, campaign="sample"))
    (tmp_path / "run" / "samples.csv").unlink()
    with pytest.raises(FileNotFoundError):
        report(tmp_path / "run" / "manifest.json")


def test_main_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "m")
    assert main(["sample", "-e", "1/4", "-N", "2", "--out", out]) == 0
    man = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert man["config"]["epsilons"] == [0.25]
    assert main(["report", str(tmp_path / "m" / "manifest.json")]) == 0


def test_cli_failed_checks_give_nonzero_exit(tmp_path, monkeypatch):
    import roughpipe.cli as cli
    from roughpipe.campaigns import Check

    def fake(cfg, w, failures, checks):
        w.put("x.csv", "a\n1\n")
        checks.append(Check(0, "forced", 1.0, "< 0", False))

    monkeypatch.setitem(cli._RUNNERS, "sample", fake)
    assert main(["sample", "--out", str(tmp_path / "f"), "--check"]) == 1
    assert main(["sample", "--out", str(tmp_path / "g")]) == 0
