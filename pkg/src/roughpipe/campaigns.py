"""Ensemble campaigns shared by the command line and the acceptance tests.

Per-sample records hold only alpha-independent quantities.  Errors against
u^N = u0 + eps*alpha*u1 are recovered exactly from the quadratic forms
|w|^2, <w, a>, |a|^2 with w = u - u0 and a = u1, once the ensemble alpha is
known.
"""

from __future__ import annotations

import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boundary_layer import compute_boundary_layer
from .effective import EffectiveModel, fit_profile, hagen_poiseuille, mean_profile, poiseuille_prediction
from .geometry import CylGrid, build_mask, sample_bernoulli, sample_poisson, smooth, validate_thickness
from .norms import gradient_entries, profile_entries, velocity_entries
from .stokes import SolverConfig, solve_ns_flux
from .verification import concentration_stats, delta_weight, pressure_drop

log = logging.getLogger(__name__)


def sample_seed(base_seed: int, index: int) -> int:
    """Per-sample seed: base XOR index."""
    return int(base_seed) ^ int(index)


def make_sample(construction, eps, T, seed, axisym):
    if construction == "bernoulli":
        return sample_bernoulli(eps, T, seed, axisym=axisym)
    if construction == "poisson":
        return sample_poisson(eps, T, seed)
    if construction == "smooth":
        return smooth(eps, T, axisym=axisym)
    raise ValueError(f"unknown construction {construction!r}")


@dataclass(frozen=True)
class WallLawSpec:
    epsilon: float
    period_T: float = 1.0
    s: int = 4
    phi: float = 0.1
    ell: float = 0.5
    construction: str = "bernoulli"
    axisym: bool = True
    solver: SolverConfig = SolverConfig()


@dataclass
class SampleRecord:
    index: int
    seed: int
    ok: bool
    error: str = ""
    profile: Optional[np.ndarray] = None
    core: Optional[np.ndarray] = None
    quad: dict = field(default_factory=dict)  # name -> (|w|^2, <w,a>, |a|^2) in the first window
    pressure_drop: float = float("nan")
    G: float = float("nan")
    flux_spread: float = float("nan")
    normalization_flux: float = float("nan")
    max_divergence: float = float("nan")
    picard_iterations: int = 0
    bl_diagnostics: dict = field(default_factory=dict)


def _spread(fl):
    """Relative spread of the slice fluxes (absolute when the mean flux vanishes)."""
    m = abs(float(np.mean(fl)))
    return float(np.ptp(fl) / m) if m > 0 else float(np.ptp(fl))


def _quad(w, a, weight):
    return (float(np.sum(weight * w * w)), float(np.sum(weight * w * a)), float(np.sum(weight * a * a)))


def run_sample(spec: WallLawSpec, index: int, base_seed: int, with_ns: bool = True) -> SampleRecord:
    seed = sample_seed(base_seed, index)
    try:
        smp = make_sample(spec.construction, spec.epsilon, spec.period_T, seed, spec.axisym)
        grid = CylGrid(spec.epsilon, spec.period_T, spec.s, axisym=spec.axisym)
        rep = validate_thickness(smp, grid)
        if not rep.passed:
            raise ValueError("; ".join(rep.violations))
        mask = build_mask(smp, grid)
        bl = compute_boundary_layer(mask, spec.solver, smp)
        r, prof = bl.axial_profile()
        core, _ = bl.core_vector()
        bl_div = bl.solution.max_divergence
        if not with_ns:
            return SampleRecord(
                index=index,
                seed=seed,
                ok=True,
                profile=prof,
                core=core,
                normalization_flux=bl.normalization_flux,
                flux_spread=_spread(bl.disc.flux_per_slice(bl.solution.u)),
                max_divergence=bl_div,
                bl_diagnostics=dict(bl.diagnostics),
            )
        ns = solve_ns_flux(mask, spec.phi, spec.solver)
        d = ns.disc
        hp = hagen_poiseuille(spec.phi)
        c = 2 * spec.phi / np.pi
        u1 = lambda rr: -c * (1 - 2 * rr**2)  # noqa: E731
        du1 = lambda rr: 4 * c * rr  # noqa: E731
        win = (0.0, 1.0)
        quad = {}
        v = velocity_entries(d, ns.u, hp.u)
        a = profile_entries(d, u1)
        gv = gradient_entries(d, ns.u, hp.dudr)
        ga = gradient_entries(d, np.zeros(d.n_u), lambda rr: -du1(rr))
        for name, (w_e, a_e, core_w, wfn) in {
            "u": (v, a, True, None),
            "u_full": (v, a, False, None),
            "grad": (gv, ga, True, None),
            "grad_full": (gv, ga, False, None),
            "wgrad": (gv, ga, True, delta_weight),
        }.items():
            sel = (w_e.x1 >= win[0]) & (w_e.x1 < win[1])
            wt = (w_e.weight_core if core_w else w_e.weight)[sel]
            if wfn is not None:
                wt = wt * wfn(w_e.r[sel]) ** 2
            quad[name] = _quad(w_e.values[sel], a_e.values[sel], wt)
        fl = d.flux_per_slice(ns.u)
        return SampleRecord(
            index=index,
            seed=seed,
            ok=True,
            profile=prof,
            core=core,
            quad=quad,
            pressure_drop=pressure_drop(ns, spec.ell),
            G=ns.G,
            flux_spread=max(_spread(fl), _spread(bl.disc.flux_per_slice(bl.solution.u))),
            normalization_flux=bl.normalization_flux,
            max_divergence=max(ns.max_divergence, bl_div),
            picard_iterations=ns.iterations,
            bl_diagnostics=dict(bl.diagnostics),
        )
    except Exception as exc:  # crash isolation: record and continue
        log.warning("sample %d (seed %d) failed: %s", index, seed, exc)
        return SampleRecord(index=index, seed=seed, ok=False, error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def _run_one(args):
    return run_sample(*args)


def run_records(spec: WallLawSpec, n: int, base_seed: int, workers: int = 1, with_ns: bool = True) -> list:
    """Per-sample records in index order (deterministic regardless of workers)."""
    jobs = [(spec, i, base_seed, with_ns) for i in range(n)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs))


def _err(q, eps_alpha):
    ww, wa, aa = q
    return float(np.sqrt(max(ww - 2 * eps_alpha * wa + eps_alpha**2 * aa, 0.0)))


@dataclass
class EnsembleSummary:
    spec: WallLawSpec
    n_ok: int
    failures: list
    model: EffectiveModel
    mean: dict  # functional name -> ensemble mean
    sd: dict
    per_sample: dict  # functional name -> array
    tails: object
    records: list = field(repr=False, default_factory=list)


def _wall_law_functionals(ok, ea, pred, classical):
    return {
        "err_u0": np.array([_err(x.quad["u"], 0.0) for x in ok]),
        "err_u0_full": np.array([_err(x.quad["u_full"], 0.0) for x in ok]),
        "err_uN": np.array([_err(x.quad["u"], ea) for x in ok]),
        "grad_err_u0": np.array([_err(x.quad["grad"], 0.0) for x in ok]),
        "grad_err_u0_full": np.array([_err(x.quad["grad_full"], 0.0) for x in ok]),
        "grad_err_uN": np.array([_err(x.quad["grad"], ea) for x in ok]),
        "wgrad_err_uN": np.array([_err(x.quad["wgrad"], ea) for x in ok]),
        "dp_err_refined": np.array([abs(x.pressure_drop - pred) for x in ok]),
        "dp_err_classical": np.array([abs(x.pressure_drop - classical) for x in ok]),
    }


def summarize(spec: WallLawSpec, records: list, fit_radius=None) -> EnsembleSummary:
    ok = [r for r in records if r.ok]
    failures = [(r.index, r.seed, r.error.splitlines()[0]) for r in records if not r.ok]
    if not ok:
        raise RuntimeError("every sample failed")
    grid = CylGrid(spec.epsilon, spec.period_T, spec.s, axisym=spec.axisym)
    r = grid.r_centers[: grid.k_wall]
    model = fit_profile(r, mean_profile([x.profile for x in ok]), spec.epsilon, grid.hr, fit_radius, len(ok))
    ea = spec.epsilon * model.alpha
    pred = poiseuille_prediction(spec.phi, spec.ell, spec.epsilon, model.alpha)
    classical = poiseuille_prediction(spec.phi, spec.ell, spec.epsilon, 0.0)
    per = {
        "normalization_error": np.array([abs(x.normalization_flux - np.pi / 2) for x in ok]),
        "flux_spread": np.array([x.flux_spread for x in ok]),
        "max_divergence": np.array([x.max_divergence for x in ok]),
    }
    if all(x.quad for x in ok):
        per.update(_wall_law_functionals(ok, ea, pred, classical))
    tails = None
    if len(ok) >= 2:
        weights = _core_weights(grid)
        tails = concentration_stats([x.core for x in ok], spec.epsilon, weights=weights, min_size=2)
    return EnsembleSummary(
        spec=spec,
        n_ok=len(ok),
        failures=failures,
        model=model,
        mean={k: float(np.mean(v)) for k, v in per.items()},
        sd={k: float(np.std(v, ddof=1)) if v.size > 1 else 0.0 for k, v in per.items()},
        per_sample=per,
        tails=tails,
        records=records,
    )


def _core_weights(grid):
    """Weights matching BoundaryLayerField.core_vector for this grid."""
    from .geometry import SolidMask
    from .mimetic import Discretization

    d = Discretization(SolidMask(grid, np.ones(grid.shape, bool)))
    r = d.face_coords[:, 2]
    x = d.face_coords[:, 0]
    tol = 1e-9 * grid.hr
    w = np.where(r < 1 - tol, d.face_W, np.where(r < 1 + tol, 0.5 * d.face_W, 0.0))
    sel = (w > 0) & (x >= 0.0) & (x < 1.0)
    return w[sel]


def run_wall_law_ensemble(spec: WallLawSpec, n: int, base_seed: int = 0, workers: int = 1) -> EnsembleSummary:
    return summarize(spec, run_records(spec, n, base_seed, workers))


# ---------------------------------------------------------------- other campaigns
@dataclass(frozen=True)
class SmoothOracleRow:
    s: int
    h: float
    rel_l2: float
    G: float
    G_rel_err: float
    flux_spread: float
    max_divergence: float


def smooth_oracle(epsilon=1 / 8, s_values=(2, 4, 8), phi=0.1, period_T=1.0, config=SolverConfig()) -> list:
    """Stokes flow in the smooth pipe against the exact Hagen-Poiseuille solution."""
    from .stokes import solve_stokes_flux

    hp = hagen_poiseuille(phi)
    rows = []
    for s in s_values:
        grid = CylGrid(epsilon, period_T, s)
        sol = solve_stokes_flux(build_mask(smooth(epsilon, period_T), grid), phi, config)
        d = sol.disc
        e = velocity_entries(d, sol.u, hp.u).norm()
        ref = profile_entries(d, hp.u).norm()
        rows.append(
            SmoothOracleRow(
                s=s,
                h=float(grid.hr),
                rel_l2=float(e / ref) if ref > 0 else float(e),
                G=float(sol.G),
                G_rel_err=float(abs(sol.G - hp.G) / abs(hp.G)) if hp.G != 0 else abs(sol.G),
                flux_spread=_spread(d.flux_per_slice(sol.u)),
                max_divergence=float(sol.max_divergence),
            )
        )
    return rows


def saint_venant_pair(epsilon=1 / 8, period_T=8.0, s=4, seed=7, spec=None, config=SolverConfig()):
    """Decay fits for the smooth pipe and one rough Bernoulli pipe of the same grid."""
    from .verification import ForcingSpec, saint_venant_decay

    spec = ForcingSpec(0.0, 0.5) if spec is None else spec
    grid = CylGrid(epsilon, period_T, s)
    out = {}
    for name, smp in (("smooth", smooth(epsilon, period_T)), ("rough", sample_bernoulli(epsilon, period_T, seed, axisym=True))):
        out[name] = saint_venant_decay(build_mask(smp, grid), spec, config)
    return out


CORRELATION_SOLVER = SolverConfig(method="minres", linear_tol=1e-13, max_krylov=20000)


@dataclass
class CorrelationResult:
    epsilon: float
    cells: list
    profiles: list
    peaks: np.ndarray
    r2: np.ndarray
    rates: np.ndarray
    base_divergence: float = 0.0
    base_flux_spread: float = 0.0

    @property
    def mean_peak(self) -> float:
        """Geometric mean of the single-cell peaks."""
        return float(np.exp(np.mean(np.log(self.peaks))))


def correlation_campaign(epsilon, n_cells=6, period_T=3.0, s=2, seed=11, cell_seed=0, axisym=False, config=CORRELATION_SOLVER):
    """Flip ``n_cells`` random roughness cells of one sample, one at a time."""
    from .boundary_layer import compute_rough_poiseuille, correlation_experiment

    smp = sample_bernoulli(epsilon, period_T, seed, axisym=axisym)
    grid = CylGrid(epsilon, period_T, s, axisym=axisym)
    base = compute_rough_poiseuille(build_mask(smp, grid), config)
    rng = np.random.default_rng(cell_seed)
    cells, profiles = [], []
    for _ in range(n_cells):
        i = int(rng.integers(smp.levels.shape[0]))
        j = int(rng.integers(smp.levels.shape[1]))
        cells.append((i, j))
        profiles.append(correlation_experiment(smp, (i, j), grid, config, base=base))
    fits = [p.decay_fit() for p in profiles]
    return CorrelationResult(
        epsilon=float(epsilon),
        cells=cells,
        profiles=profiles,
        peaks=np.array([p.peak() for p in profiles]),
        r2=np.array([f[2] for f in fits]),
        rates=np.array([-f[0] for f in fits]),
        base_divergence=float(base.max_divergence),
        base_flux_spread=_spread(base.slice_fluxes()),
    )


# ---------------------------------------------------------------- acceptance checks
@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    value: float
    target: str
    passed: bool

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.criterion}: {self.name} = {self.value:.6g} (target {self.target})"


def _in(x, lo, hi):
    return bool(np.isfinite(x) and lo <= x <= hi)


def check_smooth_oracle(rows) -> list:
    from .verification import fit_rate

    f = fit_rate([(r.h, r.rel_l2) for r in rows])
    fine = rows[-1]
    return [
        Check(1, "smooth L2 error slope", f.slope, "2.0 +/- 0.3", _in(f.slope, 1.7, 2.3)),
        Check(1, "finest relative L2 error", fine.rel_l2, "<= 1e-3", fine.rel_l2 <= 1e-3),
        Check(1, "finest relative G error", fine.G_rel_err, "<= 1e-3", fine.G_rel_err <= 1e-3),
    ]


def check_conservation(spreads, divergences, linear_tol) -> list:
    s = float(np.max(spreads))
    d = float(np.max(divergences))
    return [
        Check(2, "max relative slice-flux spread", s, "<= 1e-10", s <= 1e-10),
        Check(2, "max relative cell divergence", d, f"<= {linear_tol:g}", d <= linear_tol),
    ]


def check_normalization(summary: EnsembleSummary, minimum=100) -> list:
    e = float(np.max(summary.per_sample["normalization_error"]))
    return [
        Check(3, "samples", summary.n_ok, f">= {minimum}", summary.n_ok >= minimum),
        Check(3, "max |flux - pi/2|", e, "<= 1e-8", e <= 1e-8),
    ]


def _rate(summaries, key):
    from .verification import fit_rate

    return fit_rate([(s.spec.epsilon, s.mean[key]) for s in summaries])


def check_wall_laws(summaries) -> list:
    """Rate checks on a sweep of ensemble summaries."""
    from .verification import fit_rate

    out = []
    f = _rate(summaries, "err_u0")
    out += [Check(4, "u0 error slope", f.slope, "[0.75, 1.25]", _in(f.slope, 0.75, 1.25)),
            Check(4, "u0 error R^2", f.r2, ">= 0.9", f.r2 >= 0.9)]
    f = _rate(summaries, "grad_err_u0")
    out += [Check(4, "u0 gradient error slope", f.slope, "[0.3, 0.7]", _in(f.slope, 0.3, 0.7)),
            Check(4, "u0 gradient error R^2", f.r2, ">= 0.9", f.r2 >= 0.9)]
    f = _rate(summaries, "err_uN")
    out += [Check(5, "uN error slope", f.slope, "[1.25, 1.75]", _in(f.slope, 1.25, 1.75)),
            Check(5, "uN error R^2", f.r2, ">= 0.9", f.r2 >= 0.9)]
    small = [s for s in summaries if s.spec.epsilon <= 1 / 16 + 1e-12]
    gap = max((s.mean["err_uN"] / s.mean["err_u0"] for s in small), default=float("nan"))
    out.append(Check(5, "max uN/u0 error ratio (eps <= 1/16)", gap, "< 1", bool(gap < 1)))
    flux = max(abs(s.model.beta + 2 * s.model.alpha) / s.spec.epsilon for s in summaries)
    out.append(Check(6, "max |beta + 2 alpha| / eps", flux, "<= 5", flux <= 5))
    f = fit_rate([(s.spec.epsilon, s.model.laminar_misfit) for s in summaries])
    out.append(Check(6, "profile misfit slope", f.slope, "[1.6, 2.4]", _in(f.slope, 1.6, 2.4)))
    f = _rate(summaries, "dp_err_refined")
    out.append(Check(7, "pressure-drop error slope", f.slope, "[1.1, 1.9]", _in(f.slope, 1.1, 1.9)))
    gap = max((s.mean["dp_err_refined"] / s.mean["dp_err_classical"] for s in small), default=float("nan"))
    out.append(Check(7, "max refined/classical error ratio (eps <= 1/16)", gap, "< 1", bool(gap < 1)))
    return out


def check_saint_venant(fits) -> list:
    sm, ro = fits["smooth"], fits["rough"]
    ratio = max(sm.rate, ro.rate) / min(sm.rate, ro.rate) if min(sm.rate, ro.rate) > 0 else float("inf")
    return [
        Check(8, "smooth decay rate", sm.rate, "> 0", sm.rate > 0),
        Check(8, "rough decay rate", ro.rate, "> 0", ro.rate > 0),
        Check(8, "min semilog R^2", min(sm.r2, ro.r2), ">= 0.95", min(sm.r2, ro.r2) >= 0.95),
        Check(8, "rate ratio", ratio, "<= 2", ratio <= 2),
    ]


def check_correlation(results) -> list:
    from .verification import fit_rate

    r2 = min(float(np.min(c.r2)) for c in results)
    f = fit_rate([(c.epsilon, c.mean_peak) for c in results]).slope if len(results) >= 3 else _two_point(results)
    return [
        Check(9, "min semilog R^2 beyond 4 eps", r2, ">= 0.9", r2 >= 0.9),
        Check(9, "peak amplitude slope", f, "3 +/- 0.7", _in(f, 2.3, 3.7)),
    ]


def _two_point(results):
    a, b = results[0], results[-1]
    return float(np.log(a.mean_peak / b.mean_peak) / np.log(a.epsilon / b.epsilon))


def check_concentration(summaries) -> list:
    from .verification import rescaled_sd_spread

    tails = [s.tails for s in summaries]
    spread = rescaled_sd_spread(tails)
    n = min(s.n_ok for s in summaries)
    return [
        Check(10, "ensemble size", n, ">= 64", n >= 64),
        Check(10, "sd(X) eps^-3/2 spread", spread, "<= 2", spread <= 2),
        Check(10, "MGF finite on [0, 3]", float(all(t.mgf_finite() for t in tails)), "1", all(t.mgf_finite() for t in tails)),
    ]
