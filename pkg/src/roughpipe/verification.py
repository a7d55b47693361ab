"""Error functionals, rate fits, pressure drops, Saint-Venant decay and tail statistics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .effective import NavierApprox, hagen_poiseuille
from .geometry import SolidMask
from .norms import gradient_entries, velocity_entries
from .stokes import FlowSolution, SolverConfig, solve_stokes_forced


# ---------------------------------------------------------------- slice errors
@dataclass(frozen=True)
class SliceErrorReport:
    phi: float
    epsilon: float
    seed: Optional[int]
    err_u0: np.ndarray  # ||u - u0|| on unit-pipe slices
    err_uN: np.ndarray  # ||u - uN|| on unit-pipe slices
    grad_err_u0: np.ndarray  # ||grad u - grad u0|| on unit-pipe slices
    wgrad_err_uN: np.ndarray  # ||delta (grad u - grad uN)|| on unit-pipe slices
    grad_err_uN: np.ndarray = field(default=None)
    err_u0_full: np.ndarray = field(default=None)  # same as err_u0 over the whole fluid slice
    grad_err_u0_full: np.ndarray = field(default=None)

    def __post_init__(self):
        for a in self._fields().values():
            if np.any(np.asarray(a) < 0):
                raise ValueError("norms must be nonnegative")

    def _fields(self):
        names = ("err_u0", "err_uN", "grad_err_u0", "wgrad_err_uN", "grad_err_uN", "err_u0_full", "grad_err_u0_full")
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}

    def uloc(self):
        return {k: float(np.max(v)) for k, v in self._fields().items()}


def _windows(T):
    return [(k, k + 1) for k in range(int(np.ceil(float(T))))]


def delta_weight(r):
    return np.clip(1.0 - np.asarray(r), 0.0, None)


def wall_law_errors(solution: FlowSolution, navier_model: NavierApprox, grid=None, seed=None) -> SliceErrorReport:
    d = solution.disc
    g = d.grid
    if grid is not None and grid != g:
        raise ValueError("grid mismatch between solution and request")
    if not np.isclose(solution.flux, navier_model.phi, rtol=1e-8, atol=1e-14):
        raise ValueError("solution flux and model phi differ")
    if not np.isclose(float(g.epsilon), navier_model.epsilon):
        raise ValueError("solution epsilon and model epsilon differ")
    hp = hagen_poiseuille(navier_model.phi)
    v0 = velocity_entries(d, solution.u, hp.u)
    vN = velocity_entries(d, solution.u, navier_model.u)
    g0 = gradient_entries(d, solution.u, hp.dudr)
    gN = gradient_entries(d, solution.u, navier_model.dudr)
    win = _windows(g.period_T)
    return SliceErrorReport(
        phi=float(navier_model.phi),
        epsilon=float(g.epsilon),
        seed=seed,
        err_u0=np.array([v0.norm(core=True, window=w) for w in win]),
        err_uN=np.array([vN.norm(core=True, window=w) for w in win]),
        grad_err_u0=np.array([g0.norm(core=True, window=w) for w in win]),
        wgrad_err_uN=np.array([gN.norm(core=True, window=w, weight_fn=delta_weight) for w in win]),
        grad_err_uN=np.array([gN.norm(core=True, window=w) for w in win]),
        err_u0_full=np.array([v0.norm(window=w) for w in win]),
        grad_err_u0_full=np.array([g0.norm(window=w) for w in win]),
    )


# ---------------------------------------------------------------- rate fits
@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: tuple  # ((log eps, log err), ...)


def fit_rate(points) -> RateFit:
    """Log-log OLS of (epsilon, error) pairs."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 3:
        raise ValueError("need at least three points")
    eps, err = np.array(pts).T
    if np.any(err <= 0) or np.any(eps <= 0):
        raise ValueError("errors and epsilons must be positive")
    x, y = np.log(eps), np.log(err)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - A @ [slope, intercept]) ** 2) / ss if ss > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(r2), tuple(zip(x.tolist(), y.tolist())))


# ---------------------------------------------------------------- pressure drop
def _station_mean(solution: FlowSolution, station: int, radius: float) -> float:
    """Area mean of the pressure fluctuation over r <= radius at x1 = station*h1."""
    fld = solution.field
    g = fld.grid
    V = np.asarray(g.cell_volumes())
    sel = (g.r_centers <= radius)[None, None, :] & fld.mask.fluid
    layers = [(station - 1) % g.n1, station % g.n1]
    num = sum(np.sum((fld.p * V)[i][sel[i]]) for i in layers)
    den = sum(np.sum(V[i][sel[i]]) for i in layers)
    return float(num / den)


def _station_index(grid, ell):
    m = float(ell) / grid.h1
    if abs(m - round(m)) > 1e-9:
        raise ValueError("ell must be a multiple of the axial spacing")
    if float(ell) > float(grid.period_T) / 2 + 1e-12 or ell < 0:
        raise ValueError("ell must lie in [0, T/2]")
    return int(round(m))


def pressure_drop(solution: FlowSolution, ell: float, radius: float = 0.5) -> float:
    """p(0) - p(ell) from interior disk averages, including the mean drive G*ell."""
    g = solution.field.grid
    m = _station_index(g, ell)
    if m == 0:
        return 0.0
    return _station_mean(solution, 0, radius) - _station_mean(solution, m, radius) + solution.G * float(ell)


def pressure_drop_axis(solution: FlowSolution, ell: float) -> float:
    """Same drop from the innermost cell ring only (the raw near-axis value)."""
    return pressure_drop(solution, ell, radius=solution.field.grid.r_centers[0])


# ---------------------------------------------------------------- Saint-Venant
@dataclass(frozen=True)
class ForcingSpec:
    """Axial body force of given amplitude on cells with x1 in [x0, x1) and r < radius."""

    x0: float
    x1: float
    radius: float = 0.5
    amplitude: float = 1.0
    component: int = 0  # 0 axial, 1 angular, 2 radial


def forcing_cells(mask: SolidMask, spec: ForcingSpec) -> np.ndarray:
    g = mask.grid
    f = np.zeros((3,) + g.shape)
    xc = g.x_centers
    sel = ((xc >= spec.x0) & (xc < spec.x1))[:, None, None] & (g.r_centers < spec.radius)[None, None, :]
    f[spec.component] = np.where(sel & mask.fluid, spec.amplitude, 0.0)
    return f


@dataclass(frozen=True)
class DecayFit:
    t: np.ndarray
    H: np.ndarray
    rate: float
    r2: float
    trivial: bool = False
    fit_range: tuple = (2.0, None)

    def monotone(self, rtol=1e-12) -> bool:
        return bool(np.all(np.diff(self.H) <= rtol * max(self.H.max(initial=0.0), 1e-300)))


def tail_energy(solution: FlowSolution, spec: ForcingSpec, t_values) -> np.ndarray:
    """H(t): gradient energy of cells at periodic axial distance >= t from the forcing slab."""
    d = solution.disc
    T = float(d.grid.period_T)
    ge = gradient_entries(d, solution.u)
    x = np.mod(ge.x1, T)
    below = np.mod(spec.x0 - x, T)
    above = np.mod(x - spec.x1, T)
    inside = (x >= spec.x0) & (x <= spec.x1)
    dist = np.where(inside, 0.0, np.minimum(below, above))
    e = ge.weight * ge.values**2
    order = np.argsort(dist)
    cums = np.cumsum(e[order][::-1])[::-1]  # energy at distance >= dist[order][k]
    ds = dist[order]
    idx = np.searchsorted(ds, np.asarray(t_values, dtype=float), side="left")
    return np.array([cums[i] if i < ds.size else 0.0 for i in idx])


def saint_venant_decay(
    mask: SolidMask,
    forcing_spec: ForcingSpec,
    config: SolverConfig = SolverConfig(),
    t_min: float = 2.0,
    t_max: Optional[float] = None,
    n_t: int = 31,
) -> DecayFit:
    """Zero-flux forced Stokes flow and exponential fit of its tail energy."""
    T = float(mask.grid.period_T)
    if t_max is None:
        t_max = T / 2 - 0.5
    t = np.linspace(t_min, t_max, n_t)
    if forcing_spec.amplitude == 0:
        return DecayFit(t, np.zeros_like(t), float("nan"), float("nan"), trivial=True, fit_range=(t_min, t_max))
    sol = solve_stokes_forced(mask, forcing_cells(mask, forcing_spec), config)
    H = tail_energy(sol, forcing_spec, t)
    if not np.all(H > 0):
        return DecayFit(t, H, float("nan"), float("nan"), trivial=True, fit_range=(t_min, t_max))
    A = np.vstack([t, np.ones_like(t)]).T
    y = np.log(H)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - A @ [slope, icpt]) ** 2) / ss if ss > 0 else 1.0
    return DecayFit(t, H, float(-slope), float(r2), fit_range=(t_min, t_max))


# ---------------------------------------------------------------- concentration
@dataclass(frozen=True)
class TailDiagnostics:
    epsilon: float
    X: np.ndarray
    mean: float
    sd: float
    rescaled: np.ndarray  # eps^{-3/2} X
    rescaled_sd: float
    mgf_t: np.ndarray
    log_mgf: np.ndarray  # log E exp(t * rescaled)
    subgauss_s: np.ndarray
    log_mgf_sq: np.ndarray  # log E exp(s * rescaled^2)
    entropy: float  # plug-in Ent[rescaled^2]

    def mgf_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.log_mgf)))

    def mgf_convex(self, tol=1e-12) -> bool:
        return bool(np.all(np.diff(self.log_mgf, 2) >= -tol * max(1.0, np.abs(self.log_mgf).max())))


def deviation_norms(vectors: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """X_n = ||v_n - mean||_w with the ensemble mean taken in index order."""
    stack = np.stack([np.asarray(v, dtype=float) for v in vectors])
    mean = stack.mean(axis=0)
    return np.sqrt(((stack - mean) ** 2) @ np.asarray(weights, dtype=float))


def concentration_stats(
    ensemble, epsilon: float, weights: Optional[np.ndarray] = None, min_size: int = 32,
    t_grid=np.linspace(0.0, 3.0, 31), s_grid=np.linspace(0.0, 0.5, 11),
) -> TailDiagnostics:
    """Tail diagnostics from boundary-layer fields, or from raw core vectors with ``weights``."""
    if len(ensemble) < min_size:
        raise ValueError(f"ensemble of {len(ensemble)} below the minimum {min_size}")
    if weights is None:
        pairs = [b.core_vector() for b in ensemble]
        weights = pairs[0][1]
        vectors = [p[0] for p in pairs]
    else:
        vectors = ensemble
    X = deviation_norms(vectors, weights)
    eps = float(epsilon)
    Y = eps**-1.5 * X
    n = Y.size
    log_mgf = np.array([logsumexp(t * Y) - np.log(n) for t in t_grid])
    log_sq = np.array([logsumexp(s * Y**2) - np.log(n) for s in s_grid])
    Z = Y**2
    mz = Z.mean()
    with np.errstate(divide="ignore", invalid="ignore"):
        zlogz = np.where(Z > 0, Z * np.log(Z), 0.0)
        ent = float(zlogz.mean() - (mz * np.log(mz) if mz > 0 else 0.0))
    return TailDiagnostics(
        epsilon=eps,
        X=X,
        mean=float(X.mean()),
        sd=float(X.std(ddof=1)) if n > 1 else 0.0,
        rescaled=Y,
        rescaled_sd=float(Y.std(ddof=1)) if n > 1 else 0.0,
        mgf_t=np.asarray(t_grid, dtype=float),
        log_mgf=log_mgf,
        subgauss_s=np.asarray(s_grid, dtype=float),
        log_mgf_sq=log_sq,
        entropy=ent,
    )


def rescaled_sd_spread(diags: Sequence[TailDiagnostics]) -> float:
    """max/min of sd(X) eps^{-3/2} across an epsilon sweep."""
    v = np.array([d.rescaled_sd for d in diags])
    if np.any(v <= 0):
        return float("inf")
    return float(v.max() / v.min())


# ---------------------------------------------------------------- tables
def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def rates_csv(rows) -> str:
    """rows: (epsilon, mean_error, sd, N)."""
    return _csv(["epsilon", "mean_error", "sd", "N"], rows)


def decay_csv(fit: DecayFit) -> str:
    return _csv(["t", "H"], zip(fit.t, fit.H))


def tails_csv(diag: TailDiagnostics) -> str:
    return _csv(["n", "X", "rescaled"], zip(range(diag.X.size), diag.X, diag.rescaled))
