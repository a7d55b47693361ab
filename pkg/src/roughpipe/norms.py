"""Quadrature entries for L2 norms of staggered velocity fields and their gradients.

Every routine returns an ``Entries`` record: one value per quadrature point
together with its full fluid weight, the part of that weight lying inside
the unit pipe r < 1, and the axial coordinate.  Squared norms over any
axial window are weighted sums of squared values.

Velocity components live on faces, diagonal gradient components at cell
centres and off-diagonal components on edges (with the cylindrical metric
terms).  Where one of the two faces of a difference is not an unknown, the
wall value 0 is used: at half spacing if the wall is the face between two
solid cells, at full spacing if the missing face is itself a wall face.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mimetic import Discretization


@dataclass(frozen=True)
class Entries:
    values: np.ndarray
    weight: np.ndarray
    weight_core: np.ndarray
    x1: np.ndarray
    r: np.ndarray

    def __add__(self, other):
        return Entries(*(np.concatenate([a, b]) for a, b in zip(self._parts(), other._parts())))

    def _parts(self):
        return (self.values, self.weight, self.weight_core, self.x1, self.r)

    def sub(self, keep):
        return Entries(*(a[keep] for a in self._parts()))

    def norm(self, core=False, window=None, region: Optional[Callable] = None, weight_fn=None):
        """Weighted L2 norm, optionally restricted to an axial window [a, b) and a radial region."""
        w = self.weight_core if core else self.weight
        v = self.values
        sel = np.ones(v.size, bool)
        if window is not None:
            sel &= (self.x1 >= window[0]) & (self.x1 < window[1])
        if region is not None:
            sel &= region(self.r)
        wf = 1.0 if weight_fn is None else weight_fn(self.r[sel]) ** 2
        return float(np.sqrt(np.sum(wf * w[sel] * v[sel] ** 2)))


def _fields(disc: Discretization, u):
    full = disc.to_full(u)
    u1 = disc.block_view(full, "ax")
    ur = disc.block_view(full, "r")
    uth = disc.block_view(full, "th") if disc.swirl else np.zeros(disc.grid.shape)
    return u1, uth, ur


def velocity_entries(disc: Discretization, u, profile: Optional[Callable] = None) -> Entries:
    """Entries of u - profile(r) e1 on all unknown faces."""
    g = disc.grid
    f = disc.u_faces
    kind = disc.face_kind[f]
    xyz = disc.face_coords[f]
    vals = np.array(u, dtype=float)
    if profile is not None:
        ax = kind == "ax"
        vals[ax] -= profile(xyz[ax, 2])
    w = disc.W.copy()
    r = xyz[:, 2]
    tol = 1e-9 * g.hr
    core = np.where(r < 1 - tol, w, np.where(r < 1 + tol, 0.5 * w, 0.0))
    return Entries(vals, w, core, xyz[:, 0], r)


def profile_entries(disc: Discretization, profile: Callable) -> Entries:
    """Entries of the field profile(r) e1 sampled on the same faces (u = 0)."""
    e = velocity_entries(disc, np.zeros(disc.n_u), profile)
    return Entries(-e.values, e.weight, e.weight_core, e.x1, e.r)


def _difference(a_lo, a_hi, act_lo, act_hi, half_lo, half_hi, L):
    """Staggered difference with wall fallback; NaN where both sides are walls."""
    L = np.broadcast_to(L, a_lo.shape)
    out = np.full(a_lo.shape, np.nan)
    both = act_lo & act_hi
    out[both] = (a_hi[both] - a_lo[both]) / L[both]
    only_hi = act_hi & ~act_lo
    d = np.where(half_lo, 0.5, 1.0) * L
    out[only_hi] = a_hi[only_hi] / d[only_hi]
    only_lo = act_lo & ~act_hi
    d = np.where(half_hi, 0.5, 1.0) * L
    out[only_lo] = -a_lo[only_lo] / d[only_lo]
    return out


def gradient_entries(disc: Discretization, u, dprofile: Optional[Callable] = None) -> Entries:
    """Entries of grad u - grad(profile(r) e1); ``dprofile`` is the r-derivative."""
    g = disc.grid
    F = disc.mask.fluid
    n1, nth, nr = g.shape
    h1, hth, hr = g.h1, g.hth, g.hr
    rc, rf = g.r_centers, g.r_faces
    kw = g.k_wall
    u1, uth, ur = _fields(disc, u)
    full_act = disc.face_active
    A1 = disc.block_view(full_act, "ax")
    Ar = disc.block_view(full_act, "r")
    Ath = disc.block_view(full_act, "th") if disc.swirl else np.zeros(g.shape, bool)
    e = disc.edges
    out = []

    def add(vals, w, wc, x, r):
        vals, w, wc, x, r = (np.broadcast_to(a, vals.shape).ravel() for a in (vals, w, wc, x, r))
        keep = np.isfinite(vals) & (w > 0)
        out.append(Entries(vals[keep], w[keep], wc[keep], x[keep], r[keep]))

    # diagonal components at fluid cell centres
    V = disc.cell_volume.reshape(g.shape)
    Vc = np.where(F, V, 0.0)
    Vcore = np.where(np.arange(nr)[None, None, :] < kw, Vc, 0.0)
    xc = g.x_centers[:, None, None]
    rcb = rc[None, None, :]
    add((np.roll(u1, -1, 0) - u1) / h1, Vc, Vcore, xc, rcb)
    add((ur[:, :, 1:] - ur[:, :, :-1]) / hr, Vc, Vcore, xc, rcb)
    add((np.roll(uth, -1, 1) - uth) / (rcb * hth) + 0.5 * (ur[:, :, 1:] + ur[:, :, :-1]) / rcb, Vc, Vcore, xc, rcb)

    def solid_pair(a, b):
        return ~a & ~b

    Fpad = np.concatenate([F, np.zeros((n1, nth, 1), bool)], axis=2)  # cell nr is solid
    Fm = np.concatenate([np.zeros((n1, nth, 1), bool), F], axis=2)  # cell k-1 for k = 0..nr

    # angular edges (if, j, kf), kf = 1..nr
    sl = slice(1, None)
    n_ax = n1 * nth * (nr + 1) if disc.swirl else 0
    n_rd = n1 * nth * nr if disc.swirl else 0
    off_th = n_ax + n_rd
    dual = e["dual"][off_th:].reshape(n1, nth, nr + 1)[:, :, sl]
    dual_lo = e["dual_lo"][off_th:].reshape(n1, nth, nr + 1)[:, :, sl]
    kf = np.arange(1, nr + 1)
    ell = rf[kf] * hth
    w = ell * dual
    wc = ell * np.where(kf < kw, dual, np.where(kf == kw, dual_lo, 0.0))
    xe = (np.arange(n1) * h1)[:, None, None]
    re = rf[kf][None, None, :]
    u1p = np.concatenate([u1, np.zeros((n1, nth, 1))], axis=2)
    A1p = np.concatenate([A1, np.zeros((n1, nth, 1), bool)], axis=2)
    solid1 = solid_pair(np.roll(Fpad, 1, 0), Fpad)  # axial face with both cells solid
    d = _difference(
        u1p[:, :, :-1], u1p[:, :, 1:], A1p[:, :, :-1], A1p[:, :, 1:], solid1[:, :, :-1], solid1[:, :, 1:], hr
    )
    if dprofile is not None:
        d = d - dprofile(re)
    add(d, w, wc, xe, re)
    solid_r = solid_pair(Fm, Fpad)  # radial face with both cells solid
    d = _difference(
        np.roll(ur, 1, 0)[:, :, sl],
        ur[:, :, sl],
        np.roll(Ar, 1, 0)[:, :, sl],
        Ar[:, :, sl],
        np.roll(solid_r, 1, 0)[:, :, sl],
        solid_r[:, :, sl],
        h1,
    )
    add(d, w, wc, xe, re)

    if disc.swirl:
        solid_th = solid_pair(np.roll(F, 1, 1), F)
        # radial edges (if, jf, k)
        dual = e["dual"][n_ax:off_th].reshape(n1, nth, nr)
        w = hr * dual
        wc = np.where(np.arange(nr)[None, None, :] < kw, w, 0.0)
        re = rc[None, None, :]
        d = _difference(
            np.roll(u1, 1, 1), u1, np.roll(A1, 1, 1), A1, np.roll(solid1[:, :, :-1], 1, 1), solid1[:, :, :-1],
            re * hth,
        )
        add(d, w, wc, xe, re)
        d = _difference(
            np.roll(uth, 1, 0), uth, np.roll(Ath, 1, 0), Ath, np.roll(solid_th, 1, 0), solid_th, h1
        )
        add(d, w, wc, xe, re)

        # axial edges (i, jf, kf), kf = 1..nr
        dual = e["dual"][:n_ax].reshape(n1, nth, nr + 1)[:, :, sl]
        dual_lo = e["dual_lo"][:n_ax].reshape(n1, nth, nr + 1)[:, :, sl]
        w = h1 * dual
        wc = h1 * np.where(kf < kw, dual, np.where(kf == kw, dual_lo, 0.0))
        xa = g.x_centers[:, None, None]
        re = rf[kf][None, None, :]
        uthp = np.concatenate([uth, np.zeros((n1, nth, 1))], axis=2)
        Athp = np.concatenate([Ath, np.zeros((n1, nth, 1), bool)], axis=2)
        solid_thp = solid_pair(np.roll(Fpad, 1, 1), Fpad)
        d = _difference(
            uthp[:, :, :-1], uthp[:, :, 1:], Athp[:, :, :-1], Athp[:, :, 1:], solid_thp[:, :, :-1],
            solid_thp[:, :, 1:], hr,
        )
        add(d, w, wc, xa, re)
        d = _difference(
            np.roll(ur, 1, 1)[:, :, sl], ur[:, :, sl], np.roll(Ar, 1, 1)[:, :, sl], Ar[:, :, sl],
            np.roll(solid_r, 1, 1)[:, :, sl], solid_r[:, :, sl], re * hth,
        )
        d = d - 0.5 * (uthp[:, :, :-1] + uthp[:, :, 1:]) / re
        add(d, w, wc, xa, re)

    res = out[0]
    for o in out[1:]:
        res = res + o
    return res
