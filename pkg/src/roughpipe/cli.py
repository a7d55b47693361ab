"""Configuration, campaign orchestration, artifacts and reports.

Every campaign writes CSV/JSON/SVG artifacts plus ``manifest.json`` into its
output directory.  Per-sample seeds are ``base_seed XOR index``.  Samples run
in a process pool; results are merged in index order, so the numbers do not
depend on the worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .campaigns import (
    CORRELATION_SOLVER,
    Check,
    WallLawSpec,
    check_concentration,
    check_conservation,
    check_correlation,
    check_saint_venant,
    check_wall_laws,
    correlation_campaign,
    make_sample,
    run_records,
    saint_venant_pair,
    sample_seed,
    summarize,
)
from .effective import alpha_table_csv
from .geometry import CylGrid, build_mask, staircase_area, validate_thickness
from .stokes import SolverConfig, solve_ns_flux
from .verification import _csv, decay_csv, fit_rate, rates_csv, tails_csv

log = logging.getLogger("roughpipe")

CAMPAIGNS = (
    "sample", "solve", "boundary-layer", "alpha", "convergence",
    "poiseuille", "saint-venant", "concentration", "correlation",
)
VERBS = {
    "sample": "sample", "solve": "solve", "bl": "boundary-layer", "alpha": "alpha",
    "convergence": "convergence", "poiseuille": "poiseuille", "saint-venant": "saint-venant",
    "concentration": "concentration", "correlation": "correlation",
}
# campaign defaults for fields left as None: (period_T, s, axisym)
_DEFAULTS = {"saint-venant": (8.0, 4, True), "correlation": (3.0, 2, False)}


# ---------------------------------------------------------------- config
@dataclass
class ExperimentConfig:
    campaign: str
    epsilons: tuple = (0.125,)
    period_T: Optional[float] = None
    phi: float = 0.1
    n_samples: int = 8
    s: Optional[int] = None
    base_seed: int = 0
    construction: str = "bernoulli"
    axisym: Optional[bool] = None
    ell: float = 0.5
    n_cells: int = 6
    workers: int = 1
    check: bool = False
    out_dir: str = "runs/default"
    solver: Optional[SolverConfig] = None

    def __post_init__(self):
        if self.campaign not in CAMPAIGNS:
            raise ValueError(f"unknown campaign {self.campaign!r}")
        self.epsilons = tuple(float(e) for e in self.epsilons)
        if not self.epsilons:
            raise ValueError("need at least one epsilon")
        for e in self.epsilons:
            inv = 1.0 / e if e > 0 else 0.0
            if e <= 0 or e > 0.5 or abs(inv - round(inv)) > 1e-9:
                raise ValueError(f"epsilon {e} is not 1/n with n >= 2")
        if self.n_samples < 1 or self.n_cells < 1 or self.workers < 1:
            raise ValueError("n_samples, n_cells and workers must be >= 1")
        if self.construction not in ("bernoulli", "poisson", "smooth"):
            raise ValueError(f"unknown construction {self.construction!r}")

    def resolved(self) -> "ExperimentConfig":
        """Copy with every campaign default filled in."""
        T, s, ax = _DEFAULTS.get(self.campaign, (1.0, 4, True))
        solver = self.solver
        if solver is None:
            solver = CORRELATION_SOLVER if self.campaign == "correlation" else SolverConfig()
        return dataclasses.replace(
            self,
            period_T=T if self.period_T is None else float(self.period_T),
            s=s if self.s is None else int(self.s),
            axisym=ax if self.axisym is None else bool(self.axisym),
            solver=solver,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if d.get("solver") is not None:
            d["solver"] = SolverConfig(**d["solver"])
        if "epsilons" in d:
            d["epsilons"] = tuple(d["epsilons"])
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class RunManifest:
    config: dict
    version: str
    artifacts: dict = field(default_factory=dict)  # relative path -> sha256
    sample_artifacts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    completed: bool = False

    @property
    def passed(self) -> bool:
        return self.completed and all(c["passed"] for c in self.checks)

    def dumps(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


# ---------------------------------------------------------------- artifacts
class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.artifacts = {}
        self.samples = []

    def put(self, rel: str, content, sample=False):
        data = content.encode() if isinstance(content, str) else content
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        self.artifacts[rel] = hashlib.sha256(data).hexdigest()
        if sample:
            self.samples.append(rel)


def _svg(fig) -> str:
    import matplotlib.pyplot as plt

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "roughpipe"
    return plt.subplots(figsize=(5, 3.6))


def _tag(eps) -> str:
    return f"eps{int(round(1 / eps))}"


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# ---------------------------------------------------------------- per-sample jobs
def _sample_job(args):
    cfg, eps, i = args
    seed = sample_seed(cfg.base_seed, i)
    try:
        smp = make_sample(cfg.construction, eps, cfg.period_T, seed, cfg.axisym)
        rep = validate_thickness(smp, CylGrid(eps, cfg.period_T, cfg.s, axisym=cfg.axisym))
        row = [eps, i, seed, smp.construction, int(rep.passed), staircase_area(smp), float(smp.levels.mean())]
        return row, smp.dumps(), None
    except Exception as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


def _solve_job(args):
    cfg, eps, i = args
    seed = sample_seed(cfg.base_seed, i)
    try:
        smp = make_sample(cfg.construction, eps, cfg.period_T, seed, cfg.axisym)
        sol = solve_ns_flux(build_mask(smp, CylGrid(eps, cfg.period_T, cfg.s, axisym=cfg.axisym)), cfg.phi, cfg.solver)
        fl = sol.slice_fluxes()
        m = abs(float(np.mean(fl)))
        spread = float(np.ptp(fl) / m) if m > 0 else float(np.ptp(fl))
        row = [eps, i, seed, float(sol.flux), float(sol.G), float(sol.max_divergence), spread, sol.iterations]
        return row, sol.field.dumps(), None
    except Exception as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------- campaigns
def _specs(cfg):
    return [
        WallLawSpec(eps, cfg.period_T, cfg.s, cfg.phi, cfg.ell, cfg.construction, cfg.axisym, cfg.solver)
        for eps in cfg.epsilons
    ]


def _record_failures(summary_or_records, eps, failures):
    recs = getattr(summary_or_records, "records", summary_or_records)
    for r in recs:
        if not r.ok:
            failures.append({"epsilon": eps, "index": r.index, "seed": r.seed, "error": r.error.splitlines()[0]})


def _campaign_sample(cfg, w, failures, checks):
    rows = []
    for eps in cfg.epsilons:
        res = _map(_sample_job, [(cfg, eps, i) for i in range(cfg.n_samples)], cfg.workers)
        for i, (row, text, err) in enumerate(res):
            if err:
                failures.append({"epsilon": eps, "index": i, "seed": sample_seed(cfg.base_seed, i), "error": err})
                continue
            rows.append(row)
            w.put(f"samples/{_tag(eps)}/sample_{i:04d}.json", text, sample=True)
    w.put("samples.csv", _csv(["epsilon", "index", "seed", "construction", "thickness_ok", "wall_area", "mean_level"], rows))


def _campaign_solve(cfg, w, failures, checks):
    rows = []
    for eps in cfg.epsilons:
        res = _map(_solve_job, [(cfg, eps, i) for i in range(cfg.n_samples)], cfg.workers)
        for i, (row, data, err) in enumerate(res):
            if err:
                failures.append({"epsilon": eps, "index": i, "seed": sample_seed(cfg.base_seed, i), "error": err})
                continue
            rows.append(row)
            w.put(f"fields/{_tag(eps)}/field_{i:04d}.npz", data, sample=True)
    w.put("solve.csv", _csv(["epsilon", "index", "seed", "flux", "G", "max_divergence", "flux_spread", "picard_iterations"], rows))
    if rows:
        checks += check_conservation([r[6] for r in rows], [r[5] for r in rows], cfg.solver.linear_tol)


def _bl_summaries(cfg, failures, with_ns):
    out = []
    for spec in _specs(cfg):
        recs = run_records(spec, cfg.n_samples, cfg.base_seed, cfg.workers, with_ns=with_ns)
        _record_failures(recs, spec.epsilon, failures)
        if any(r.ok for r in recs):
            out.append(summarize(spec, recs))
    return out


def _profile_plot(summaries):
    fig, ax = _figure()
    for S in summaries:
        g = CylGrid(S.spec.epsilon, S.spec.period_T, S.spec.s, axisym=S.spec.axisym)
        r = g.r_centers[: g.k_wall]
        prof = np.mean([x.profile for x in S.records if x.ok], axis=0)
        ax.plot(r, prof / S.spec.epsilon, lw=1, label=f"eps = 1/{int(round(1 / S.spec.epsilon))}")
        m = S.model
        ax.plot(r, m.alpha + m.beta * r**2, "k--", lw=0.7)
    ax.set_xlabel("r")
    ax.set_ylabel("mean boundary layer / eps")
    ax.legend(fontsize=7)
    return _svg(fig)


def _bl_tables(w, summaries):
    rows = []
    for S in summaries:
        for x in S.records:
            if x.ok:
                d = x.bl_diagnostics
                rows.append([S.spec.epsilon, x.index, x.seed, x.normalization_flux, d["sup_interior"],
                             d["sup_interior_over_eps"], d["l2_slice"], d["grad_l2_slice"], d["weighted_grad_l2_slice"]])
    w.put("boundary_layer.csv", _csv(["epsilon", "index", "seed", "normalization_flux", "sup_interior", "sup_interior_over_eps",
                                      "l2_slice", "grad_l2_slice", "weighted_grad_l2_slice"], rows))


def _normalization_check(summaries):
    e = max(float(np.max(S.per_sample["normalization_error"])) for S in summaries)
    n = sum(S.n_ok for S in summaries)
    return [Check(3, f"max |flux - pi/2| over {n} samples", e, "<= 1e-8", e <= 1e-8)]


def _campaign_bl(cfg, w, failures, checks):
    S = _bl_summaries(cfg, failures, with_ns=False)
    _bl_tables(w, S)
    if S:
        w.put("profile.svg", _profile_plot(S))
        checks += _normalization_check(S)
        checks += check_conservation([v for s in S for v in s.per_sample["flux_spread"]],
                                     [v for s in S for v in s.per_sample["max_divergence"]], cfg.solver.linear_tol)


def _campaign_alpha(cfg, w, failures, checks):
    S = _bl_summaries(cfg, failures, with_ns=False)
    _bl_tables(w, S)
    w.put("alpha.csv", alpha_table_csv([s.model for s in S]))
    for s in S:
        w.put(f"models/{_tag(s.spec.epsilon)}.json", s.model.dumps())
    if S:
        w.put("profile.svg", _profile_plot(S))
        checks += _normalization_check(S)
        checks += [c for c in _model_checks(S)]


def _model_checks(S):
    flux = max(abs(s.model.beta + 2 * s.model.alpha) / s.spec.epsilon for s in S)
    out = [Check(6, "max |beta + 2 alpha| / eps", flux, "<= 5", flux <= 5)]
    if len(S) >= 3:
        f = fit_rate([(s.spec.epsilon, s.model.laminar_misfit) for s in S])
        out.append(Check(6, "profile misfit slope", f.slope, "[1.6, 2.4]", 1.6 <= f.slope <= 2.4))
    return out


_ERROR_KEYS = ("err_u0", "err_uN", "grad_err_u0", "grad_err_uN", "wgrad_err_uN", "err_u0_full", "grad_err_u0_full",
               "dp_err_refined", "dp_err_classical")


def _ensemble_tables(w, S):
    rows = [[s.spec.epsilon, s.n_ok] + [s.mean[k] for k in _ERROR_KEYS] for s in S]
    w.put("ensemble.csv", _csv(["epsilon", "N"] + list(_ERROR_KEYS), rows))
    w.put("alpha.csv", alpha_table_csv([s.model for s in S]))
    for k in _ERROR_KEYS:
        w.put(f"rates/{k}.csv", rates_csv([(s.spec.epsilon, s.mean[k], s.sd[k], s.n_ok) for s in S]))
    if len(S) >= 3:
        fits = []
        for k in _ERROR_KEYS:
            f = fit_rate([(s.spec.epsilon, s.mean[k]) for s in S])
            fits.append([k, f.slope, f.intercept, f.r2])
        w.put("rates.csv", _csv(["functional", "slope", "intercept", "r2"], fits))


def _error_plot(S, keys, ylabel):
    fig, ax = _figure()
    eps = np.array([s.spec.epsilon for s in S])
    for k in keys:
        ax.loglog(eps, [s.mean[k] for s in S], "o-", lw=1, ms=3, label=k)
    ax.loglog(eps, eps**1.5 * S[0].mean[keys[0]] / eps[0] ** 1.5, "k:", lw=0.7, label="slope 3/2")
    ax.loglog(eps, eps * S[0].mean[keys[0]] / eps[0], "k--", lw=0.7, label="slope 1")
    ax.set_xlabel("eps")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    return _svg(fig)


def _campaign_convergence(cfg, w, failures, checks):
    S = _bl_summaries(cfg, failures, with_ns=True)
    if not S:
        return
    _ensemble_tables(w, S)
    w.put("errors.svg", _error_plot(S, ["err_u0", "err_uN", "wgrad_err_uN"], "ensemble mean slice error"))
    checks += check_conservation([v for s in S for v in s.per_sample["flux_spread"]],
                                 [v for s in S for v in s.per_sample["max_divergence"]], cfg.solver.linear_tol)
    checks += _normalization_check(S)
    if len(S) >= 3:
        checks += check_wall_laws(S)


def _campaign_poiseuille(cfg, w, failures, checks):
    S = _bl_summaries(cfg, failures, with_ns=True)
    if not S:
        return
    _ensemble_tables(w, S)
    rows = []
    for s in S:
        for x in s.records:
            if x.ok:
                rows.append([s.spec.epsilon, x.index, x.seed, x.pressure_drop, x.G])
    w.put("pressure_drop.csv", _csv(["epsilon", "index", "seed", "pressure_drop", "G"], rows))
    w.put("pressure.svg", _error_plot(S, ["dp_err_refined", "dp_err_classical"], "mean pressure-drop error"))
    if len(S) >= 3:
        checks += [c for c in check_wall_laws(S) if c.criterion == 7]


def _campaign_concentration(cfg, w, failures, checks):
    S = _bl_summaries(cfg, failures, with_ns=False)
    rows = []
    for s in S:
        t = s.tails
        if t is None:
            continue
        w.put(f"tails/{_tag(s.spec.epsilon)}.csv", tails_csv(t))
        rows.append([s.spec.epsilon, s.n_ok, t.mean, t.sd, t.rescaled_sd, t.entropy, float(t.log_mgf[-1])])
    w.put("concentration.csv", _csv(["epsilon", "N", "mean_X", "sd_X", "rescaled_sd", "entropy", "log_mgf_t3"], rows))
    if S and all(s.tails is not None for s in S):
        fig, ax = _figure()
        for s in S:
            ax.hist(s.tails.rescaled, bins=16, histtype="step", label=f"eps = 1/{int(round(1 / s.spec.epsilon))}")
        ax.set_xlabel("eps^-3/2 X")
        ax.legend(fontsize=7)
        w.put("concentration.svg", _svg(fig))
        checks += check_concentration(S)
        checks += _normalization_check(S)


def _campaign_saint_venant(cfg, w, failures, checks):
    fits = saint_venant_pair(cfg.epsilons[0], cfg.period_T, cfg.s, cfg.base_seed, config=cfg.solver)
    rows = []
    fig, ax = _figure()
    for name, f in fits.items():
        w.put(f"decay_{name}.csv", decay_csv(f))
        rows.append([name, f.rate, f.r2, int(f.monotone())])
        ax.semilogy(f.t, f.H, "o-", ms=3, lw=1, label=f"{name}: rate {f.rate:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("H(t)")
    ax.legend(fontsize=7)
    w.put("decay.svg", _svg(fig))
    w.put("saint_venant.csv", _csv(["pipe", "rate", "r2", "monotone"], rows))
    checks += check_saint_venant(fits)


def _campaign_correlation(cfg, w, failures, checks):
    results = []
    rows, peaks = [], []
    for eps in cfg.epsilons:
        try:
            res = correlation_campaign(eps, cfg.n_cells, cfg.period_T, cfg.s, cfg.base_seed, axisym=cfg.axisym, config=cfg.solver)
        except Exception as exc:
            failures.append({"epsilon": eps, "index": -1, "seed": cfg.base_seed, "error": f"{type(exc).__name__}: {exc}"})
            continue
        results.append(res)
        for (i, j), p, r2, rate in zip(res.cells, res.profiles, res.r2, res.rates):
            peaks.append([eps, i, j, p.peak(), rate, r2])
            for d, m, l2 in zip(p.distance, p.max_abs, p.l2):
                rows.append([eps, i, j, float(d), float(m), float(l2)])
    w.put("correlation.csv", _csv(["epsilon", "i", "j", "distance", "max_abs", "l2"], rows))
    w.put("peaks.csv", _csv(["epsilon", "i", "j", "peak", "decay_rate", "r2"], peaks))
    if results:
        fig, ax = _figure()
        for res in results:
            for p in res.profiles:
                ax.semilogy(p.distance, np.maximum(p.max_abs, 1e-300), lw=0.7)
        ax.set_xlabel("axial distance from the flipped cell")
        ax.set_ylabel("max interior |difference|")
        w.put("correlation.svg", _svg(fig))
    if len(results) >= 2:
        checks += check_correlation(results)


_RUNNERS = {
    "sample": _campaign_sample,
    "solve": _campaign_solve,
    "boundary-layer": _campaign_bl,
    "alpha": _campaign_alpha,
    "convergence": _campaign_convergence,
    "poiseuille": _campaign_poiseuille,
    "saint-venant": _campaign_saint_venant,
    "concentration": _campaign_concentration,
    "correlation": _campaign_correlation,
}


def run(config: ExperimentConfig) -> RunManifest:
    cfg = config.resolved()
    w = _Writer(Path(cfg.out_dir))
    w.put("config.json", cfg.dumps())
    failures, checks = [], []
    t0 = time.perf_counter()
    completed = True
    try:
        _RUNNERS[cfg.campaign](cfg, w, failures, checks)
    except Exception as exc:  # campaign-level failure: still write a manifest
        completed = False
        failures.append({"epsilon": None, "index": -1, "seed": None, "error": f"{type(exc).__name__}: {exc}"})
        log.exception("campaign %s failed", cfg.campaign)
    failures_csv = _csv(["epsilon", "index", "seed", "error"], [[f["epsilon"], f["index"], f["seed"], f["error"]] for f in failures])
    w.put("failures.csv", failures_csv)
    man = RunManifest(
        config=cfg.to_dict(),
        version=__version__,
        artifacts=dict(sorted(w.artifacts.items())),
        sample_artifacts=sorted(w.samples),
        timings={"total_seconds": round(time.perf_counter() - t0, 3)},
        checks=[dataclasses.asdict(c) for c in checks],
        failures=failures,
        completed=completed,
    )
    (Path(cfg.out_dir) / "manifest.json").write_text(man.dumps())
    return man


# ---------------------------------------------------------------- report
def _md_table(text: str, max_rows: int = 40) -> list:
    lines = [ln.split(",") for ln in text.strip().splitlines()]
    if not lines:
        return []
    out = ["| " + " | ".join(lines[0]) + " |", "|" + "---|" * len(lines[0])]
    body = lines[1:]
    for row in body[:max_rows]:
        out.append("| " + " | ".join(row) + " |")
    if len(body) > max_rows:
        out.append(f"| ... {len(body) - max_rows} more rows |")
    return out


def report(manifest_path) -> str:
    """Human-readable summary of a finished run; depends only on the manifest and its artifacts."""
    manifest_path = Path(manifest_path)
    man = RunManifest.loads(manifest_path.read_text())
    root = manifest_path.parent
    missing = [p for p in man.artifacts if not (root / p).exists()]
    if missing:
        raise FileNotFoundError(f"missing artifacts: {missing}")
    bad = [p for p, h in man.artifacts.items() if hashlib.sha256((root / p).read_bytes()).hexdigest() != h]
    cfg = man.config
    out = [f"# roughpipe {cfg['campaign']} campaign", "", f"version {man.version}; completed: {man.completed}", ""]
    out += ["## Configuration", ""]
    for k in sorted(cfg):
        out.append(f"- {k}: {json.dumps(cfg[k], sort_keys=True)}")
    out += ["", "## Acceptance checks", ""]
    if man.checks:
        out += [Check(**c).line() for c in man.checks]
    else:
        out.append("no acceptance checks for this campaign")
    out += ["", f"overall: {'PASS' if man.passed else 'FAIL'}", "", "## Tables", ""]
    tables = [p for p in man.artifacts if p.endswith(".csv") and p not in man.sample_artifacts and "/" not in p]
    for p in tables:
        if p == "failures.csv":
            continue
        out += [f"### {p}", ""] + _md_table((root / p).read_text()) + [""]
    svgs = [p for p in man.artifacts if p.endswith(".svg")]
    if svgs:
        out += ["## Figures", ""] + [f"![{p}]({p})" for p in svgs] + [""]
    out += ["## Failure ledger", ""]
    if man.failures:
        out += [f"- eps={f['epsilon']} index={f['index']} seed={f['seed']}: {f['error']}" for f in man.failures]
    else:
        out.append("no failures")
    if bad:
        out += ["", "## Checksum mismatches", ""] + [f"- {p}" for p in bad]
    out.append(f"\nper-sample artifacts: {len(man.sample_artifacts)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- argument parsing
def _epsilon(text: str) -> float:
    return float(Fraction(text))


def _parser():
    p = argparse.ArgumentParser(prog="roughpipe", description="Wall-law experiments for randomly rough pipes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        q = sub.add_parser(verb)
        q.add_argument("--config", help="JSON ExperimentConfig used as the base; flags override it")
        q.add_argument("--epsilon", "-e", type=_epsilon, action="append", help="roughness size, e.g. 1/8 (repeatable)")
        q.add_argument("--T", dest="period_T", type=float)
        q.add_argument("--phi", type=float)
        q.add_argument("-N", "--n-samples", dest="n_samples", type=int)
        q.add_argument("-s", type=int)
        q.add_argument("--seed", dest="base_seed", type=int)
        q.add_argument("--construction", choices=("bernoulli", "poisson", "smooth"))
        g = q.add_mutually_exclusive_group()
        g.add_argument("--axisym", dest="axisym", action="store_true", default=None)
        g.add_argument("--3d", dest="axisym", action="store_false")
        q.add_argument("--ell", type=float)
        q.add_argument("--cells", dest="n_cells", type=int)
        q.add_argument("--workers", type=int)
        q.add_argument("--check", action="store_true", default=None, help="evaluate acceptance thresholds")
        q.add_argument("--out", dest="out_dir")
        q.add_argument("--method", choices=("auto", "direct", "minres"))
        q.add_argument("--linear-tol", type=float)
    r = sub.add_parser("report")
    r.add_argument("manifest")
    r.add_argument("-o", "--output")
    return p


def config_from_args(ns) -> ExperimentConfig:
    base = json.loads(Path(ns.config).read_text()) if ns.config else {}
    base["campaign"] = VERBS[ns.verb]
    for k in ("period_T", "phi", "n_samples", "s", "base_seed", "construction", "axisym", "ell", "n_cells",
              "workers", "check", "out_dir"):
        v = getattr(ns, k)
        if v is not None:
            base[k] = v
    if ns.epsilon:
        base["epsilons"] = ns.epsilon
    if ns.method is not None or ns.linear_tol is not None:
        solver = dict(base.get("solver") or {})
        if ns.method is not None:
            solver["method"] = ns.method
        if ns.linear_tol is not None:
            solver["linear_tol"] = ns.linear_tol
        base["solver"] = solver
    return ExperimentConfig.from_dict(base)


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if ns.verb == "report":
        text = report(ns.manifest)
        if ns.output:
            Path(ns.output).write_text(text)
        else:
            sys.stdout.write(text)
        return 0 if RunManifest.loads(Path(ns.manifest).read_text()).passed else 1
    cfg = config_from_args(ns)
    man = run(cfg)
    for c in man.checks:
        print(Check(**c).line())
    print(f"{cfg.campaign}: {len(man.artifacts)} artifacts, {len(man.failures)} failures -> {Path(cfg.resolved().out_dir) / 'manifest.json'}")
    ok = man.completed and (not cfg.check or man.passed)
    return 0 if ok else 1
