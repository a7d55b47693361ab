"""Periodic Stokes and Navier-Stokes solves on a masked cylindrical grid.

The mean axial pressure gradient G is the unknown conjugate to the flux.
Stokes flows are computed once with G = 1 and rescaled.  Navier-Stokes
uses a lagged Picard iteration on the rotational form, re-using one
factorization of the Stokes matrix; the flux is restored exactly after
each step by adding a multiple of the G = 1 field.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import SolidMask
from .mimetic import Discretization

log = logging.getLogger(__name__)

class SolverError(RuntimeError):
    pass


class PicardDivergence(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    linear_tol: float = 1e-12
    max_krylov: int = 5000
    picard_tol: float = 1e-10
    max_picard: int = 60
    relaxation: float = 1.0
    method: str = "auto"  # auto | direct | minres
    max_flux: float = 0.2

    def __post_init__(self):
        if not (self.linear_tol > 0 and self.picard_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.relaxation <= 1):
            raise ValueError("relaxation must lie in (0, 1]")
        if self.method not in ("auto", "direct", "minres"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_krylov < 1 or self.max_picard < 1:
            raise ValueError("iteration caps must be positive")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StaggeredFlowField:
    """Face velocities and cell pressure fluctuation on the full grid arrays.

    Solid faces and cells hold zeros.  The total pressure is p - G*x1.
    """

    mask: SolidMask
    u1: np.ndarray  # (n1, nth, nr) axial faces
    uth: np.ndarray  # (n1, nth, nr) angular faces (zeros when axisymmetric)
    ur: np.ndarray  # (n1, nth, nr+1) radial faces
    p: np.ndarray  # (n1, nth, nr) cells
    G: float

    @property
    def grid(self):
        return self.mask.grid

    def total_pressure(self):
        x = self.grid.x_centers[:, None, None]
        return np.where(self.mask.fluid, self.p - self.G * x, 0.0)

    def dumps(self) -> bytes:
        """Deterministic .npz bytes (fixed key order, no timestamps)."""
        g = self.grid
        meta = {
            "epsilon": str(g.epsilon),
            "period_T": str(g.period_T),
            "s": g.s,
            "axisym": g.axisym,
            "G": repr(float(self.G)),
            "layout": "u1[i,j,k] at x1=i*h1; uth[i,j,k] at theta=j*hth; ur[i,j,k] at r=k*hr; p at cell centres",
        }
        buf = io.BytesIO()
        np.savez(
            buf,
            meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
            fluid=self.mask.fluid,
            u1=self.u1,
            uth=self.uth,
            ur=self.ur,
            p=self.p,
        )
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class FlowSolution:
    field: StaggeredFlowField
    flux: float
    G: float
    residual: float
    max_divergence: float
    iterations: int = 0
    u: np.ndarray = field(default=None, repr=False)  # unknown-vector form
    p_vec: np.ndarray = field(default=None, repr=False)
    disc: Discretization = field(default=None, repr=False)

    def slice_fluxes(self):
        return self.disc.flux_per_slice(self.u)


class StokesSystem:
    """Saddle-point system [[K, -D^T], [-D, 0]] with the pressure gauge fixed.

    The direct path pins the pressure of the first fluid cell (a dense
    mean-zero row would destroy the sparse ordering); the Krylov path borders
    the system with the mean-zero row.  Pressures are returned with zero mean.
    """

    def __init__(self, disc: Discretization, config: SolverConfig = SolverConfig()):
        self.disc = disc
        self.config = config
        method = config.method
        if method == "auto":
            # sparse LU fills badly on 3D saddle-point systems
            method = "minres" if disc.swirl else "direct"
        self.method = method

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        d = self.disc
        if self.method == "direct":
            Dp = d.D[1:]
            return sp.bmat([[d.K, -Dp.T], [-Dp, None]], format="csc")
        V = sp.csr_matrix(d.V[:, None])
        return sp.bmat([[d.K, -d.D.T, None], [-d.D, None, V], [None, V.T, None]], format="csr")

    @property
    def size(self):
        return self.matrix.shape[0]

    @cached_property
    def _lu(self):
        if self.disc.n_p == 0:
            raise SolverError("empty fluid region")
        try:
            return spla.splu(self.matrix, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise SolverError(f"singular Stokes system: {exc}") from exc

    @cached_property
    def _precond(self):
        import pyamg

        d = self.disc
        ml = pyamg.smoothed_aggregation_solver(d.K.tocsr(), symmetry="symmetric")
        amg = ml.aspreconditioner(cycle="V")
        vol = d.V.sum()
        nu = d.n_u

        def apply(x):
            y = np.empty_like(x)
            y[:nu] = amg @ x[:nu]
            y[nu:-1] = x[nu:-1] / d.V
            y[-1] = x[-1] / vol
            return y

        return spla.LinearOperator((self.size, self.size), matvec=apply)

    @cached_property
    def _poisson(self):
        import pyamg

        d = self.disc
        # pin the first cell: the periodic Neumann problem is singular
        L = (d.D @ sp.diags(1.0 / d.W) @ d.D.T).tocsr()[1:, 1:]
        return pyamg.smoothed_aggregation_solver(L, symmetry="symmetric")

    def _project(self, u):
        """Remove the Krylov divergence residual: u - W^-1 D^T psi with (D W^-1 D^T) psi = D u."""
        d = self.disc
        div = d.D @ u
        if d.n_p < 2 or not np.any(div):
            return u
        psi = np.zeros(d.n_p)
        psi[1:] = self._poisson.solve(div[1:], tol=1e-14, accel="cg", maxiter=500)
        return u - (d.D.T @ psi) / d.W

    def _minres(self, b):
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b)
        x, info = spla.minres(
            self.matrix, b, M=self._precond, rtol=self.config.linear_tol, maxiter=self.config.max_krylov
        )
        if info != 0:
            res = np.linalg.norm(self.matrix @ x - b) / bnorm
            raise SolverError(f"MINRES did not converge (info={info}, residual={res:.3e})")
        return x

    def solve(self, rhs_u):
        """Return (u, zero-mean p, relative residual) for the momentum rhs ``rhs_u``."""
        d = self.disc
        b = np.zeros(self.size)
        b[: d.n_u] = rhs_u
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros(d.n_u), np.zeros(d.n_p), 0.0
        if self.method == "direct":
            x = self._lu.solve(b)
            x += self._lu.solve(b - self.matrix @ x)  # one refinement step
            p = np.concatenate([[0.0], x[d.n_u :]])
        else:
            x = np.zeros(self.size)
            # the divergence projection perturbs the momentum residual; one correction pass restores it
            for _ in range(2):
                dx = self._minres(b - self.matrix @ x)
                x += dx
                x[: d.n_u] = self._project(x[: d.n_u])
            p = x[d.n_u : -1]
        res = np.linalg.norm(self.matrix @ x - b) / bnorm
        if not np.isfinite(res):
            raise SolverError("non-finite solution (disconnected fluid region?)")
        return x[: d.n_u], _zero_mean(d, p), res

    @cached_property
    def unit_drive(self):
        """Solution for G = 1 and its (mean) slice flux."""
        u, p, res = self.solve(self.disc.axial_drive())
        flux = float(np.mean(self.disc.flux_per_slice(u)))
        if not flux > 0:
            raise SolverError("unit drive produced no flux; fluid region not connected along x1")
        return u, p, res, flux


_SYSTEMS: dict = {}


def get_system(mask: SolidMask, config: SolverConfig) -> StokesSystem:
    """Cache the factorized system for the most recent mask (per process)."""
    key = (id(mask), config)
    sysm = _SYSTEMS.get(key)
    if sysm is None or sysm.disc.mask is not mask:
        _SYSTEMS.clear()
        sysm = StokesSystem(Discretization(mask), config)
        _SYSTEMS[key] = sysm
    return sysm


def _package(disc, u, p, G, residual, iterations=0):
    full = disc.to_full(u)
    g = disc.grid
    uth = disc.block_view(full, "th") if disc.swirl else np.zeros(g.shape)
    pf = np.zeros(g.shape)
    pf.ravel()[disc.p_cells] = p
    fld = StaggeredFlowField(
        mask=disc.mask,
        u1=_frozen(disc.block_view(full, "ax")),
        uth=_frozen(uth),
        ur=_frozen(disc.block_view(full, "r")),
        p=_frozen(pf),
        G=float(G),
    )
    fluxes = disc.flux_per_slice(u)
    div = disc.relative_divergence(u)
    return FlowSolution(
        field=fld,
        flux=float(np.mean(fluxes)),
        G=float(G),
        residual=float(residual),
        max_divergence=float(np.max(np.abs(div), initial=0.0)),
        iterations=iterations,
        u=_frozen(u),
        p_vec=_frozen(p),
        disc=disc,
    )


def _zero_mean(disc, p):
    return p - (disc.V @ p) / disc.V.sum()


def solve_stokes_flux(mask: SolidMask, phi: float, config: SolverConfig = SolverConfig()) -> FlowSolution:
    if not np.isfinite(phi):
        raise ValueError("phi must be finite")
    sysm = get_system(mask, config)
    uG, pG, res, fG = sysm.unit_drive
    c = phi / fG
    return _package(sysm.disc, c * uG, c * pG, c, res)


def solve_ns_flux(mask: SolidMask, phi: float, config: SolverConfig = SolverConfig()) -> FlowSolution:
    if abs(phi) > config.max_flux:
        raise ValueError(f"|phi| = {abs(phi)} exceeds the smallness bound {config.max_flux}")
    sysm = get_system(mask, config)
    d = sysm.disc
    uG, pG, res, fG = sysm.unit_drive
    u = (phi / fG) * uG
    if phi == 0:
        return _package(d, u, np.zeros(d.n_p), 0.0, res)
    omega = config.relaxation
    it = 0
    norm0 = np.sqrt(d.W @ u**2)
    while True:
        it += 1
        w, pw, res = sysm.solve(-d.W * d.advection(u))
        c = (phi - float(np.mean(d.flux_per_slice(w)))) / fG
        u_new = w + c * uG
        delta = np.sqrt(d.W @ (u_new - u) ** 2) / norm0
        u = (1 - omega) * u + omega * u_new
        if not np.isfinite(delta) or delta > 1e3:
            raise PicardDivergence(f"Picard diverged at iteration {it} (phi={phi})")
        if delta < config.picard_tol:
            break
        if it >= config.max_picard:
            raise PicardDivergence(f"Picard did not converge in {it} iterations (last change {delta:.2e})")
    # final consistent pressure for the converged u
    w, pw, res = sysm.solve(-d.W * d.advection(u))
    c = (phi - float(np.mean(d.flux_per_slice(w)))) / fG
    p = _zero_mean(d, pw + c * pG - d.kinetic_energy_cells(u))
    return _package(d, u, p, c, res, iterations=it)


def potential_forcing(mask: SolidMask, g) -> np.ndarray:
    """Face force equal to the discrete gradient of a cell scalar g (full face numbering)."""
    d = Discretization(mask)
    gv = np.asarray(g, dtype=float).ravel()
    f = np.zeros(d.n_face_full)
    act = d.face_active
    f[act] = (gv[d.face_hi[act]] - gv[d.face_lo[act]]) / d.face_dual[act]
    return f


def cell_forcing_to_faces(disc: Discretization, f_cells) -> np.ndarray:
    """Average a cell-centred vector force (3, n1, nth, nr) = (f1, f_theta, f_r) to faces."""
    f1, fth, fr = (np.asarray(a, dtype=float).ravel() for a in f_cells)
    out = np.zeros(disc.n_face_full)
    lo, hi = disc.face_lo, disc.face_hi
    for block, comp in (("ax", f1), ("th", fth), ("r", fr)):
        if block not in disc.blocks:
            continue
        b = disc.blocks[block]
        sl = slice(b.offset, b.offset + int(np.prod(b.shape)))
        out[sl] = 0.5 * (comp[lo[sl]] + comp[hi[sl]])
    return out


def solve_stokes_forced(mask: SolidMask, f, config: SolverConfig = SolverConfig()) -> FlowSolution:
    """Zero-flux Stokes flow driven by a body force.

    ``f`` is either a cell array (3, n1, nth, nr) of (f1, f_theta, f_r) or a
    face array in full face numbering.
    """
    sysm = get_system(mask, config)
    d = sysm.disc
    f = np.asarray(f, dtype=float)
    f_full = f if f.ndim == 1 else cell_forcing_to_faces(d, f)
    if f_full.shape != (d.n_face_full,):
        raise ValueError("forcing has the wrong shape")
    uG, pG, _, fG = sysm.unit_drive
    w, pw, res = sysm.solve(d.weighted_force(f_full))
    c = -float(np.mean(d.flux_per_slice(w))) / fG
    return _package(d, w + c * uG, _zero_mean(d, pw + c * pG), c, res)


def compute_flux(field: StaggeredFlowField, t_index: int) -> float:
    """Flux through the axial station x1 = t_index * h1."""
    g = field.grid
    if not (0 <= t_index < g.n1):
        raise IndexError(f"t_index {t_index} outside [0, {g.n1})")
    area = g.hth * g.hr * g.r_centers
    return float((field.u1[t_index] * area[None, :]).sum())
