"""Normalized boundary layer of a rough pipe and its local diagnostics.

The boundary layer is U0 - V, where U0 = (1 - r^2) e1 (extended by the same
formula into the rough band) and V is the rough-pipe Stokes flow with the
flux pi/2 of U0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import CylGrid, RoughPipeSample, SolidMask, build_mask, perturb_one_cell
from .norms import gradient_entries, velocity_entries
from .stokes import FlowSolution, SolverConfig, solve_stokes_flux

NORMALIZATION_FLUX = np.pi / 2


def laminar_profile(r):
    return 1.0 - np.asarray(r) ** 2


def laminar_slope(r):
    return -2.0 * np.asarray(r)


def interior_radius(epsilon: float, collar: float = 8.0) -> float:
    """Radius of the interior region r < 1 - collar*eps, never below 1/2."""
    return max(1.0 - collar * float(epsilon), 0.5)


def compute_rough_poiseuille(mask: SolidMask, config: SolverConfig = SolverConfig()) -> FlowSolution:
    return solve_stokes_flux(mask, NORMALIZATION_FLUX, config)


@dataclass(frozen=True, eq=False)
class BoundaryLayerField:
    v_bl: np.ndarray  # unknown-face vector
    normalization_flux: float
    solution: FlowSolution = field(repr=False)
    sample: Optional[RoughPipeSample] = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def disc(self):
        return self.solution.disc

    @property
    def epsilon(self):
        return float(self.disc.grid.epsilon)

    def axial_profile(self):
        """(r, mean axial v_bl) over x1 and theta on the face rings inside r < 1."""
        d = self.disc
        g = d.grid
        full = d.to_full(self.v_bl)
        ax = d.block_view(full, "ax")[:, :, : g.k_wall]
        return g.r_centers[: g.k_wall].copy(), ax.mean(axis=(0, 1))

    def core_vector(self, window=(0.0, 1.0)):
        """(values, weights) of v_bl on all faces with r <= 1 in an axial window.

        The layout depends only on the grid, so vectors of different samples
        can be compared entrywise.
        """
        d = self.disc
        g = d.grid
        r = d.face_coords[:, 2]
        x = d.face_coords[:, 0]
        tol = 1e-9 * g.hr
        w = np.where(r < 1 - tol, d.face_W, np.where(r < 1 + tol, 0.5 * d.face_W, 0.0))
        sel = (w > 0) & (x >= window[0]) & (x < window[1])
        return d.to_full(self.v_bl)[sel], w[sel]


def _size_diagnostics(disc, v_bl, V_u, eps):
    g = disc.grid
    f = disc.u_faces
    r = disc.face_coords[f, 2]
    inner = r <= max(1 - 4 * eps, 0.5) + 1e-12
    sup_in = float(np.max(np.abs(v_bl[inner]), initial=0.0))
    ve = velocity_entries(disc, -V_u, lambda rr: -laminar_profile(rr))  # entries of U0 - V
    ge = gradient_entries(disc, V_u, laminar_slope)  # grad V - grad U0
    T = float(g.period_T)
    l2 = max(ve.norm(core=True, window=(k, k + 1)) for k in range(int(np.ceil(T))))
    gl2 = max(ge.norm(core=True, window=(k, k + 1)) for k in range(int(np.ceil(T))))
    wgl2 = max(
        ge.norm(core=True, window=(k, k + 1), weight_fn=lambda rr: np.clip(1 - rr, 0, None))
        for k in range(int(np.ceil(T)))
    )
    return {
        "sup_interior": sup_in,
        "sup_interior_over_eps": sup_in / eps,
        "l2_slice": l2,
        "grad_l2_slice": gl2,
        "weighted_grad_l2_slice": wgl2,
    }


def compute_boundary_layer(
    mask: SolidMask, config: SolverConfig = SolverConfig(), sample: Optional[RoughPipeSample] = None
) -> BoundaryLayerField:
    sol = compute_rough_poiseuille(mask, config)
    d = sol.disc
    U0 = d.sample_profile(laminar_profile)
    v = U0 - sol.u
    v.setflags(write=False)
    norm_flux = float(np.mean(d.flux_per_slice(U0 - v)))
    diag = _size_diagnostics(d, v, sol.u, float(mask.grid.epsilon))
    diag["slice_flux_spread"] = float(np.ptp(d.flux_per_slice(U0 - v)))
    return BoundaryLayerField(v, norm_flux, sol, sample, diag)


@dataclass(frozen=True)
class CorrelationProfile:
    distance: np.ndarray  # periodic axial distance of each layer centre from z1
    max_abs: np.ndarray
    l2: np.ndarray
    z: tuple  # (x1, theta, r) of the perturbed cell centre on r = 1
    interior_radius: float
    epsilon: float

    def __post_init__(self):
        if np.any(self.max_abs < 0) or np.any(self.l2 < 0):
            raise ValueError("profile must be nonnegative")

    def peak(self) -> float:
        return float(np.max(self.max_abs, initial=0.0))

    def decay_fit(self, min_distance=None, max_distance=None, which="max_abs"):
        """Semilog OLS of the profile against distance; returns (slope, intercept, R^2)."""
        y = getattr(self, which)
        lo = 4 * self.epsilon if min_distance is None else min_distance
        sel = (self.distance > lo) & (y > 0)
        if max_distance is not None:
            sel &= self.distance <= max_distance
        x, ly = self.distance[sel], np.log(y[sel])
        if x.size < 3:
            raise ValueError("fewer than three points in the fit range")
        A = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
        pred = A @ coef
        ss = np.sum((ly - ly.mean()) ** 2)
        r2 = 1 - np.sum((ly - pred) ** 2) / ss if ss > 0 else 1.0
        return float(coef[0]), float(coef[1]), float(r2)

    def monotone_beyond(self, collar=None, rtol=1e-9) -> bool:
        lo = 4 * self.epsilon if collar is None else collar
        order = np.argsort(self.distance)
        y = self.max_abs[order][self.distance[order] > lo]
        return bool(np.all(np.diff(y) <= rtol * max(y.max(initial=0), 1e-300)))


def correlation_experiment(
    sample: RoughPipeSample,
    cell: tuple,
    grid: CylGrid,
    config: SolverConfig = SolverConfig(),
    perturbed: Optional[RoughPipeSample] = None,
    base: Optional[FlowSolution] = None,
) -> CorrelationProfile:
    """Interior influence of flipping one roughness cell on the boundary layer.

    ``perturbed`` overrides the flipped sample (used to check that identical
    inputs give a zero profile).  ``base`` re-uses a precomputed rough
    Poiseuille solution of ``sample`` on ``grid``.
    """
    if not sample.construction.startswith("Bernoulli"):
        raise ValueError("correlation experiment expects a Bernoulli-type sample")
    i, j = cell
    other = perturb_one_cell(sample, i, j) if perturbed is None else perturbed
    v = base if base is not None else compute_rough_poiseuille(build_mask(sample, grid), config)
    u_a = v.u.copy()
    disc = v.disc
    w = compute_rough_poiseuille(build_mask(other, grid), config)
    if w.disc.n_u != disc.n_u or not np.array_equal(w.disc.u_faces, disc.u_faces):
        # unknown sets differ at the flipped cell; compare on the full face arrays
        diff_full = disc.to_full(u_a) - w.disc.to_full(w.u)
    else:
        diff_full = disc.to_full(u_a - w.u)
    eps = float(grid.epsilon)
    T = float(grid.period_T)
    r_int = interior_radius(eps)
    coords = disc.face_coords
    inner = coords[:, 2] < r_int - 1e-12
    layer = np.floor(coords[:, 0] / grid.h1 + 1e-9).astype(int) % grid.n1
    vals = np.abs(diff_full)
    wts = disc.face_W
    z1 = (i + 0.5) * eps
    z_th = (j + 0.5) * 2 * np.pi * eps if not sample.axisym else 0.0
    centres = (np.arange(grid.n1) + 0.5) * grid.h1
    dist_layer = np.abs(centres - z1)
    dist_layer = np.minimum(dist_layer, T - dist_layer)
    mx = np.zeros(grid.n1)
    sq = np.zeros(grid.n1)
    np.maximum.at(mx, layer[inner], vals[inner])
    np.add.at(sq, layer[inner], wts[inner] * vals[inner] ** 2)
    # merge layers at the same distance
    key = np.round(dist_layer / grid.h1 * 2).astype(int)
    uniq = np.unique(key)
    dist = np.array([dist_layer[key == k].mean() for k in uniq])
    mxd = np.array([mx[key == k].max() for k in uniq])
    l2d = np.array([np.sqrt(sq[key == k].sum() / np.count_nonzero(key == k) / grid.h1) for k in uniq])
    return CorrelationProfile(dist, mxd, l2d, (z1, z_th, 1.0), r_int, eps)
