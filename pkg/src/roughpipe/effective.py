"""Effective slip model: alpha from boundary-layer ensembles, slip length, Navier approximation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

FLUX_TOL_C = 5.0


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class HagenPoiseuille:
    phi: float

    def u(self, r):
        return (2 * self.phi / np.pi) * (1 - np.asarray(r, dtype=float) ** 2)

    def dudr(self, r):
        return (2 * self.phi / np.pi) * (-2 * np.asarray(r, dtype=float))

    def p(self, x1):
        return -(8 * self.phi / np.pi) * np.asarray(x1, dtype=float)

    @property
    def G(self):
        return 8 * self.phi / np.pi


def hagen_poiseuille(phi: float) -> HagenPoiseuille:
    return HagenPoiseuille(float(phi))


def slip_length(alpha: float, epsilon: float) -> float:
    denom = 1.0 - 2.0 * epsilon * alpha
    if abs(denom) < 1e-12:
        raise ValueError("slip length has a pole at 2*alpha*epsilon = 1")
    return epsilon * alpha / denom


def tolerance_flux(epsilon: float, C: float = FLUX_TOL_C) -> float:
    return C * epsilon


@dataclass(frozen=True)
class EffectiveModel:
    epsilon: float
    alpha: float
    beta: float
    fit_residual: float
    flux_residual: float
    lam: float
    n: int
    laminar_misfit: float = 0.0
    fit_radius: float = 1.0

    def flux_constraint_ok(self, C: float = FLUX_TOL_C) -> bool:
        return abs(self.beta + 2 * self.alpha) <= tolerance_flux(self.epsilon, C)

    def dumps(self) -> str:
        return json.dumps({k: repr(v) if isinstance(v, float) else v for k, v in asdict(self).items()}, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "EffectiveModel":
        d = json.loads(text)
        return cls(**{k: (int(v) if k == "n" else float(v)) for k, v in d.items()})

    def csv_row(self):
        return [repr(self.epsilon), self.n, repr(self.alpha), repr(self.beta), repr(self.lam),
                repr(self.fit_residual), repr(self.flux_residual)]


ALPHA_CSV_HEADER = ["epsilon", "N", "alpha", "beta", "lambda", "fit_residual", "flux_residual"]


def alpha_table_csv(models: Sequence[EffectiveModel]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ALPHA_CSV_HEADER)
    for m in models:
        w.writerow(m.csv_row())
    return buf.getvalue()


def fit_profile(r, mean, epsilon, hr, fit_radius=None, n=1, residual_cap=None) -> EffectiveModel:
    """Fit mean(r) = eps*(alpha + beta r^2) with weight r on face rings r < fit_radius.

    ``r`` are ring radii spaced ``hr`` covering [0, 1).
    """
    r = np.asarray(r, dtype=float)
    mean = np.asarray(mean, dtype=float)
    eps = float(epsilon)
    if fit_radius is None:
        fit_radius = max(1 - 8 * eps, 0.5)
    ring = 2 * np.pi * r * hr
    sel = r < fit_radius
    if sel.sum() < 2:
        raise FitError("fewer than two rings inside the fit window")
    A = np.vstack([np.ones(sel.sum()), r[sel] ** 2]).T
    sw = np.sqrt(ring[sel])
    coef, *_ = np.linalg.lstsq(A * sw[:, None], mean[sel] * sw, rcond=None)
    a, b = coef
    fit_res = float(np.sqrt(np.sum(ring[sel] * (mean[sel] - A @ coef) ** 2)))
    scale = float(np.sqrt(np.sum(ring[sel] * mean[sel] ** 2)))
    if residual_cap is not None and fit_res > residual_cap * max(scale, 1e-300):
        raise FitError(f"fit residual {fit_res:.3e} exceeds cap (scale {scale:.3e})")
    alpha, beta = a / eps, b / eps
    flux_res = float(abs(np.sum(ring * mean)))
    misfit = float(np.sqrt(np.sum(ring * (mean - eps * alpha * (1 - 2 * r**2)) ** 2)))
    return EffectiveModel(
        epsilon=eps,
        alpha=float(alpha),
        beta=float(beta),
        fit_residual=fit_res,
        flux_residual=flux_res,
        lam=slip_length(float(alpha), eps),
        n=int(n),
        laminar_misfit=misfit,
        fit_radius=float(fit_radius),
    )


def mean_profile(profiles: Sequence[np.ndarray]) -> np.ndarray:
    """Ensemble mean in index order (fixed reduction order)."""
    if len(profiles) == 0:
        raise FitError("empty ensemble")
    stack = np.stack([np.asarray(p, dtype=float) for p in profiles])
    return stack.mean(axis=0)


def estimate_alpha(ensemble, fit_radius=None, residual_cap=0.05) -> EffectiveModel:
    """Fit alpha, beta from a list of BoundaryLayerField sharing epsilon and grid."""
    if len(ensemble) == 0:
        raise FitError("empty ensemble")
    grid = ensemble[0].disc.grid
    for b in ensemble[1:]:
        if b.disc.grid != grid:
            raise FitError("ensemble members use different grids")
    r, _ = ensemble[0].axial_profile()
    m = mean_profile([b.axial_profile()[1] for b in ensemble])
    return fit_profile(r, m, float(grid.epsilon), grid.hr, fit_radius, len(ensemble), residual_cap)


@dataclass(frozen=True)
class NavierApprox:
    phi: float
    epsilon: float
    alpha: float

    @property
    def lam(self):
        return slip_length(self.alpha, self.epsilon)

    def u(self, r):
        r = np.asarray(r, dtype=float)
        c = 2 * self.phi / np.pi
        return c * (1 - r**2) - self.epsilon * self.alpha * c * (1 - 2 * r**2)

    def dudr(self, r):
        r = np.asarray(r, dtype=float)
        c = 2 * self.phi / np.pi
        return c * (-2 * r) - self.epsilon * self.alpha * c * (-4 * r)

    def p(self, x1):
        x1 = np.asarray(x1, dtype=float)
        return -(8 * self.phi / np.pi) * x1 + self.epsilon * self.alpha * (16 * self.phi / np.pi) * x1

    def flux(self) -> float:
        """Flux through the unit disk (Gauss-Legendre, exact for this quadratic)."""
        x, w = np.polynomial.legendre.leggauss(4)
        r = 0.5 * (x + 1)
        return float(np.sum(0.5 * w * self.u(r) * 2 * np.pi * r))

    def wall_strain(self) -> float:
        """Tangential component of the strain rate D(u)n at r = 1 with inward normal."""
        return float(-0.5 * self.dudr(1.0))

    def slip_ratio(self) -> float:
        return float(self.u(1.0) / self.wall_strain())


def build_navier_approx(phi: float, epsilon: float, alpha: float) -> NavierApprox:
    return NavierApprox(float(phi), float(epsilon), float(alpha))


def poiseuille_prediction(phi: float, ell: float, epsilon: float, alpha: float) -> float:
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return 8 * phi * ell / np.pi * (1 - 2 * epsilon * alpha)
