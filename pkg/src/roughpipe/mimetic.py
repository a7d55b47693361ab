"""Staggered finite-volume operators on a masked cylindrical grid.

Unknowns are normal velocities on fluid faces (axial u1, angular u_theta,
radial u_r) and pressure on fluid cells.  The viscous operator is the
covolume form curl curl - grad div, built from edge circulations, so the
cylindrical metric enters only through exact face areas, edge lengths and
dual areas.  All momentum rows are multiplied by the face dual volume
W = area * dual length, which makes the saddle-point matrix symmetric.

Faces are numbered axial | angular | radial; angular faces are omitted in
axisymmetric mode (nth == 1, no swirl).  Edges are numbered
axial | radial | angular.  Axial edges on the axis are merged into one edge
per axial cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import CylGrid, SolidMask


def _roll(a, shift, axis):
    return np.roll(a, shift, axis=axis)


@dataclass(frozen=True)
class FaceBlock:
    name: str
    offset: int
    shape: tuple


class Discretization:
    def __init__(self, mask: SolidMask):
        self.mask = mask
        self.grid: CylGrid = mask.grid
        g = self.grid
        self.swirl = g.nth > 1
        F = mask.fluid
        n1, nth, nr = g.shape
        self.shape = g.shape
        ncell = n1 * nth * nr
        self.cell_id = np.arange(ncell).reshape(g.shape)

        # ---- faces ------------------------------------------------------
        blocks = {}
        off = 0
        blocks["ax"] = FaceBlock("ax", off, (n1, nth, nr))
        off += ncell
        if self.swirl:
            blocks["th"] = FaceBlock("th", off, (n1, nth, nr))
            off += ncell
        blocks["r"] = FaceBlock("r", off, (n1, nth, nr + 1))
        off += n1 * nth * (nr + 1)
        self.blocks = blocks
        self.n_face_full = off

        rc, rf = g.r_centers, g.r_faces
        h1, hth, hr = g.h1, g.hth, g.hr
        active, area, dual, lo, hi = [], [], [], [], []
        coords = []
        I, J, K = np.meshgrid(np.arange(n1), np.arange(nth), np.arange(nr), indexing="ij")

        # axial faces (i,j,k) sit between cells (i-1,j,k) and (i,j,k)
        act = F & _roll(F, 1, 0)
        active.append(act.ravel())
        area.append(np.broadcast_to(hth * hr * rc, g.shape).ravel())
        dual.append(np.full(ncell, h1))
        lo.append(self.cell_id[(I - 1) % n1, J, K].ravel())
        hi.append(self.cell_id.ravel())
        coords.append(np.stack([I * h1, (J + 0.5) * hth, rc[K]], -1).reshape(-1, 3))

        if self.swirl:
            act = F & _roll(F, 1, 1)
            active.append(act.ravel())
            area.append(np.full(ncell, h1 * hr))
            dual.append(np.broadcast_to(hth * rc, g.shape).ravel())
            lo.append(self.cell_id[I, (J - 1) % nth, K].ravel())
            hi.append(self.cell_id.ravel())
            coords.append(np.stack([(I + 0.5) * h1, J * hth, rc[K]], -1).reshape(-1, 3))

        Ir, Jr, Kr = np.meshgrid(np.arange(n1), np.arange(nth), np.arange(nr + 1), indexing="ij")
        Fpad_lo = np.concatenate([np.zeros((n1, nth, 1), bool), F], axis=2)  # cell k-1
        Fpad_hi = np.concatenate([F, np.zeros((n1, nth, 1), bool)], axis=2)  # cell k
        act = Fpad_lo & Fpad_hi
        active.append(act.ravel())
        area.append(np.broadcast_to(h1 * hth * rf, (n1, nth, nr + 1)).ravel())
        dual.append(np.full(n1 * nth * (nr + 1), hr))
        lo.append(self.cell_id[Ir, Jr, np.clip(Kr - 1, 0, nr - 1)].ravel())
        hi.append(self.cell_id[Ir, Jr, np.clip(Kr, 0, nr - 1)].ravel())
        coords.append(np.stack([(Ir + 0.5) * h1, (Jr + 0.5) * hth, rf[Kr]], -1).reshape(-1, 3))

        self.face_active = np.concatenate(active)
        self.face_area = np.concatenate(area)
        self.face_dual = np.concatenate(dual)
        self.face_lo = np.concatenate(lo)
        self.face_hi = np.concatenate(hi)
        self.face_coords = np.concatenate(coords)
        self.face_kind = np.concatenate(
            [np.full(int(np.prod(b.shape)), n, dtype="<U2") for n, b in blocks.items()]
        )
        self.face_W = self.face_area * self.face_dual

        self.u_faces = np.flatnonzero(self.face_active)  # full ids of unknowns
        self.n_u = self.u_faces.size
        self.u_index = np.full(self.n_face_full, -1)
        self.u_index[self.u_faces] = np.arange(self.n_u)
        self.W = self.face_W[self.u_faces]

        self.p_cells = np.flatnonzero(F.ravel())
        self.n_p = self.p_cells.size
        self.p_index = np.full(ncell, -1)
        self.p_index[self.p_cells] = np.arange(self.n_p)
        self.cell_volume = np.asarray(g.cell_volumes()).ravel()
        self.V = self.cell_volume[self.p_cells]

    # ------------------------------------------------------------------
    def fid(self, block, i, j, k):
        """Full face id for block/(i,j,k), with periodic wrap in i and j."""
        b = self.blocks[block]
        n1, nth, nk = b.shape
        return b.offset + ((np.asarray(i) % n1) * nth + (np.asarray(j) % nth)) * nk + np.asarray(k)

    def block_view(self, values_full, block):
        b = self.blocks[block]
        return values_full[b.offset : b.offset + int(np.prod(b.shape))].reshape(b.shape)

    def to_full(self, u):
        full = np.zeros(self.n_face_full)
        full[self.u_faces] = u
        return full

    # ------------------------------------------------------------------
    @cached_property
    def D(self) -> sp.csr_matrix:
        """Volume-integrated divergence: (D u)_c = sum of outward face fluxes."""
        f = self.u_faces
        rows = np.concatenate([self.p_index[self.face_lo[f]], self.p_index[self.face_hi[f]]])
        cols = np.concatenate([np.arange(self.n_u)] * 2)
        vals = np.concatenate([self.face_area[f], -self.face_area[f]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_p, self.n_u))

    @cached_property
    def edges(self):
        return self._build_edges()

    def _build_edges(self):
        """Circulation stencils, lengths and (fluid) dual areas of all edges."""
        g = self.grid
        F = self.mask.fluid
        n1, nth, nr = g.shape
        h1, hth, hr = g.h1, g.hth, g.hr
        rc, rf = g.r_centers, g.r_faces

        def fluid(i, j, k):
            k = np.asarray(k)
            ok = (k >= 0) & (k < nr)
            return np.where(ok, F[np.asarray(i) % n1, np.asarray(j) % nth, np.clip(k, 0, nr - 1)], False)

        rows, cols, vals = [], [], []
        lengths, dual_lo, dual_hi, ecoords, etype = [], [], [], [], []
        off = 0

        def add(eids, fids, coef):
            eids, fids, coef = np.broadcast_arrays(eids, fids, coef)
            rows.append(eids.ravel())
            cols.append(fids.ravel())
            vals.append(coef.ravel().astype(float))

        if self.swirl:
            # axial edges (i, jf, kf): vorticity along x1
            i, j, k = np.meshgrid(np.arange(n1), np.arange(nth), np.arange(nr + 1), indexing="ij")
            eid = off + (i * nth + j) * (nr + 1) + k
            eid = np.where(k == 0, off + (i * nth) * (nr + 1), eid)  # merge the axis
            kk = np.clip(k, 0, nr - 1)
            km = np.clip(k - 1, 0, nr - 1)
            add(eid, self.fid("th", i, j, kk), np.where(k < nr, hth * rc[kk], 0.0))
            add(eid, self.fid("th", i, j, km), np.where(k >= 1, -hth * rc[km], 0.0))
            add(eid, self.fid("r", i, j - 1, k), hr)
            add(eid, self.fid("r", i, j, k), -hr)
            q_lo = hth / 2 * (rf[k] ** 2 - np.maximum(rf[k] - hr / 2, 0) ** 2) / 2
            q_hi = hth / 2 * ((rf[k] + hr / 2) ** 2 - rf[k] ** 2) / 2
            a_lo = q_lo * (fluid(i, j - 1, k - 1).astype(float) + fluid(i, j, k - 1))
            a_hi = q_hi * (fluid(i, j - 1, k).astype(float) + fluid(i, j, k))
            n_e = n1 * nth * (nr + 1)
            dlo = np.zeros(n_e)
            dhi = np.zeros(n_e)
            np.add.at(dlo, (eid - off).ravel(), a_lo.ravel())
            np.add.at(dhi, (eid - off).ravel(), a_hi.ravel())
            dual_lo.append(dlo)
            dual_hi.append(dhi)
            lengths.append(np.full(n_e, h1))
            ecoords.append(np.stack([(i + 0.5) * h1, j * hth, rf[k]], -1).reshape(-1, 3))
            etype.append(np.full(n_e, 0))
            off += n_e

            # radial edges (if, jf, k): vorticity along r
            i, j, k = np.meshgrid(np.arange(n1), np.arange(nth), np.arange(nr), indexing="ij")
            eid = off + (i * nth + j) * nr + k
            add(eid, self.fid("th", i - 1, j, k), hth * rc[k])
            add(eid, self.fid("th", i, j, k), -hth * rc[k])
            add(eid, self.fid("ax", i, j, k), h1)
            add(eid, self.fid("ax", i, j - 1, k), -h1)
            q = (h1 / 2) * (rc[k] * hth / 2)
            cnt = (
                fluid(i - 1, j - 1, k).astype(float) + fluid(i, j - 1, k) + fluid(i - 1, j, k) + fluid(i, j, k)
            )
            n_e = n1 * nth * nr
            dual_lo.append((q * cnt).ravel())
            dual_hi.append(np.zeros(n_e))
            lengths.append(np.full(n_e, hr))
            ecoords.append(np.stack([i * h1, j * hth, rc[k]], -1).reshape(-1, 3))
            etype.append(np.full(n_e, 1))
            off += n_e

        # angular edges (if, j, kf): vorticity along theta
        i, j, k = np.meshgrid(np.arange(n1), np.arange(nth), np.arange(nr + 1), indexing="ij")
        eid = off + (i * nth + j) * (nr + 1) + k
        kk = np.clip(k, 0, nr - 1)
        km = np.clip(k - 1, 0, nr - 1)
        add(eid, self.fid("ax", i, j, km), np.where(k >= 1, h1, 0.0))
        add(eid, self.fid("ax", i, j, kk), np.where(k < nr, -h1, 0.0))
        add(eid, self.fid("r", i, j, k), hr)
        add(eid, self.fid("r", i - 1, j, k), -hr)
        q = (h1 / 2) * (hr / 2)
        a_lo = q * (fluid(i - 1, j, k - 1).astype(float) + fluid(i, j, k - 1))
        a_hi = q * (fluid(i - 1, j, k).astype(float) + fluid(i, j, k))
        n_e = n1 * nth * (nr + 1)
        dual_lo.append(a_lo.ravel())
        dual_hi.append(a_hi.ravel())
        lengths.append((rf[k] * hth).ravel())
        ecoords.append(np.stack([i * h1, (j + 0.5) * hth, rf[k]], -1).reshape(-1, 3))
        etype.append(np.full(n_e, 2))
        off += n_e

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        ui = self.u_index[cols]
        keep = (ui >= 0) & (vals != 0)
        C = sp.csr_matrix((vals[keep], (rows[keep], ui[keep])), shape=(off, self.n_u))
        dual_lo = np.concatenate(dual_lo)
        dual_hi = np.concatenate(dual_hi)
        return {
            "C": C,
            "length": np.concatenate(lengths),
            "dual": dual_lo + dual_hi,
            "dual_lo": dual_lo,
            "coords": np.concatenate(ecoords),
            "type": np.concatenate(etype),
            "n": off,
        }

    @cached_property
    def vorticity_op(self) -> sp.csr_matrix:
        """Edge vorticity component omega_e = circulation / fluid dual area."""
        e = self.edges
        inv = np.divide(1.0, e["dual"], out=np.zeros_like(e["dual"]), where=e["dual"] > 0)
        return sp.diags(inv) @ e["C"]

    @cached_property
    def K(self) -> sp.csr_matrix:
        """Weighted vector Laplacian (-W Delta): C^T diag(l/A*) C + D^T V^-1 D."""
        e = self.edges
        lam = np.divide(e["length"], e["dual"], out=np.zeros_like(e["dual"]), where=e["dual"] > 0)
        curl = e["C"].T @ sp.diags(lam) @ e["C"]
        div = self.D.T @ sp.diags(1.0 / self.V) @ self.D
        return (curl + div).tocsr()

    # ------------------------------------------------------------------
    def axial_drive(self) -> np.ndarray:
        """Weighted rhs of a unit axial body force."""
        rhs = np.zeros(self.n_u)
        rhs[self.face_kind[self.u_faces] == "ax"] = self.W[self.face_kind[self.u_faces] == "ax"]
        return rhs

    def weighted_force(self, force_full) -> np.ndarray:
        """Project a physical face force (full face numbering) onto the unknowns."""
        return self.W * np.asarray(force_full)[self.u_faces]

    def sample_profile(self, f_axial, block="ax"):
        """Axial velocity field f(r) on active axial faces (unknown numbering)."""
        out = np.zeros(self.n_u)
        sel = self.face_kind[self.u_faces] == block
        out[sel] = f_axial(self.face_coords[self.u_faces[sel], 2])
        return out

    def flux_per_slice(self, u) -> np.ndarray:
        """Flux through every axial station x1 = i*h1."""
        full = self.to_full(u)
        ax = self.block_view(full, "ax")
        A = self.block_view(self.face_area, "ax")
        return (ax * A).sum(axis=(1, 2))

    def divergence(self, u) -> np.ndarray:
        """Cell divergence (per unit volume)."""
        return (self.D @ u) / self.V

    def relative_divergence(self, u) -> np.ndarray:
        """|net outflow| of each cell over the largest total face-flux magnitude of any cell."""
        scale = np.max(abs(self.D) @ np.abs(u), initial=0.0)
        if scale == 0:
            return np.zeros(self.n_p)
        return np.abs(self.D @ u) / scale

    # ------------------------------------------------------------------
    @cached_property
    def _advection_ops(self):
        """Sparse pieces of the rotational advection term omega x u."""
        g = self.grid
        n1, nth, nr = g.shape
        e = self.edges
        n_e = e["n"]
        eoff = {}
        o = 0
        if self.swirl:
            eoff["ax"] = o
            o += n1 * nth * (nr + 1)
            eoff["r"] = o
            o += n1 * nth * nr
        eoff["th"] = o

        def eid(kind, i, j, k):
            i = np.asarray(i) % n1
            j = np.asarray(j) % nth
            k = np.asarray(k)
            if kind == "ax":
                out = eoff["ax"] + (i * nth + j) * (nr + 1) + k
                return np.where(k == 0, eoff["ax"] + (i * nth) * (nr + 1), out)
            if kind == "r":
                return eoff["r"] + (i * nth + j) * nr + k
            return eoff["th"] + (i * nth + j) * (nr + 1) + k

        def uidx(block, i, j, k):
            b = self.blocks[block]
            k = np.asarray(k)
            ok = (k >= 0) & (k < b.shape[2])
            f = self.fid(block, i, j, np.clip(k, 0, b.shape[2] - 1))
            return np.where(ok, self.u_index[f], -1)

        terms = []

        def term(sign, face_block, fshape, edge_kind, edge_sel, comp_block, comp_sel):
            """sign * avg_{edges}( omega_e * avg_{faces}(u_comp) ) on face_block."""
            i, j, k = np.meshgrid(*(np.arange(n) for n in fshape), indexing="ij")
            tgt = uidx(face_block, i, j, k)
            ok = tgt >= 0
            rows_f, cols_f = [], []
            edge_list = [edge_sel(i, j, k, s) for s in (0, 1)]
            for ed in edge_list:
                rows_f.append(tgt[ok])
                cols_f.append(eid(edge_kind, *ed)[ok])
            Pf = sp.csr_matrix(
                (np.full(2 * ok.sum(), 0.5), (np.concatenate(rows_f), np.concatenate(cols_f))),
                shape=(self.n_u, n_e),
            )
            # velocity averaged onto each edge of this kind
            ei, ej, ek = np.meshgrid(
                *(np.arange(n) for n in ((n1, nth, nr + 1) if edge_kind != "r" else (n1, nth, nr))),
                indexing="ij",
            )
            rows_u, cols_u = [], []
            for s in (0, 1):
                src = uidx(comp_block, *comp_sel(ei, ej, ek, s))
                good = src >= 0
                rows_u.append(eid(edge_kind, ei, ej, ek)[good])
                cols_u.append(src[good])
            Pu = sp.csr_matrix(
                (np.full(sum(r.size for r in rows_u), 0.5), (np.concatenate(rows_u), np.concatenate(cols_u))),
                shape=(n_e, self.n_u),
            )
            terms.append((sign, Pf, Pu))

        full = (n1, nth, nr)
        rshape = (n1, nth, nr + 1)
        # axial faces: N1 = -omega_theta u_r (+ omega_r u_theta)
        term(-1, "ax", full, "th", lambda i, j, k, s: (i, j, k + s), "r", lambda i, j, k, s: (i - 1 + s, j, k))
        # radial faces: Nr = omega_theta u1 (- omega_1 u_theta)
        term(+1, "r", rshape, "th", lambda i, j, k, s: (i + s, j, k), "ax", lambda i, j, k, s: (i, j, k - 1 + s))
        if self.swirl:
            term(+1, "ax", full, "r", lambda i, j, k, s: (i, j + s, k), "th", lambda i, j, k, s: (i - 1 + s, j, k))
            term(-1, "r", rshape, "ax", lambda i, j, k, s: (i, j + s, k), "th", lambda i, j, k, s: (i, j, k - 1 + s))
            # angular faces: N_theta = omega_1 u_r - omega_r u1
            term(+1, "th", full, "ax", lambda i, j, k, s: (i, j, k + s), "r", lambda i, j, k, s: (i, j - 1 + s, k))
            term(-1, "th", full, "r", lambda i, j, k, s: (i + s, j, k), "ax", lambda i, j, k, s: (i, j - 1 + s, k))
        return terms

    def advection(self, u) -> np.ndarray:
        """Rotational advection omega x u on the unknown faces (physical units)."""
        omega = self.vorticity_op @ u
        out = np.zeros(self.n_u)
        for sign, Pf, Pu in self._advection_ops:
            out += sign * (Pf @ (omega * (Pu @ u)))
        return out

    def kinetic_energy_cells(self, u) -> np.ndarray:
        """|u|^2 / 2 at fluid cell centres (averaging squared face values)."""
        full = self.to_full(u) ** 2
        ke = np.zeros(self.grid.shape)
        ax = self.block_view(full, "ax")
        ke += 0.5 * (ax + np.roll(ax, -1, axis=0))
        rr = self.block_view(full, "r")
        ke += 0.5 * (rr[:, :, :-1] + rr[:, :, 1:])
        if self.swirl:
            th = self.block_view(full, "th")
            ke += 0.5 * (th + np.roll(th, -1, axis=1))
        return 0.5 * ke.ravel()[self.p_cells]
