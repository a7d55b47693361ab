"""Random rough pipe samples, cylindrical grids and solid masks.

Coordinates are (x1, theta, r).  A sample stores the wall radius on a lattice
of boundary cells: axial width eps / raster, angular width 2*pi*eps / raster.
Bernoulli samples use raster 1 (one bit per eps x 2*pi*eps cell).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import ndimage

CONSTRUCTIONS = ("Bernoulli3D", "BernoulliAxisym", "PoissonBump", "Smooth")

# radius_field is stored as integer levels: radius = 1 + level * eps / LEVELS
LEVELS = 2


class GeometryError(ValueError):
    pass


def _as_int_ratio(value: float, unit: float, what: str) -> int:
    """Return value/unit as a positive int or raise GeometryError."""
    q = Fraction(value).limit_denominator(1 << 20) / Fraction(unit).limit_denominator(1 << 20)
    if q.denominator != 1 or q.numerator <= 0:
        raise GeometryError(f"{what} must be a positive integer, got {float(q):g}")
    return int(q.numerator)


def roughness_count(epsilon: float) -> int:
    """M = 1/eps; rejects epsilon values whose reciprocal is not an integer."""
    if not (0 < epsilon <= 1):
        raise GeometryError(f"epsilon must lie in (0, 1], got {epsilon}")
    return _as_int_ratio(1.0, epsilon, "1/epsilon")


def axial_count(epsilon: float, period_T: float) -> int:
    return _as_int_ratio(period_T, epsilon, "period_T/epsilon")


@dataclass(frozen=True, eq=False)
class RoughPipeSample:
    """A periodized rough cylinder.

    ``levels[i, j]`` is the wall height of boundary cell (i, j) in units of
    eps/2, so radius = 1 + levels * eps / 2 and levels ranges over {0, 1, 2}.
    """

    epsilon: float
    period_T: float
    levels: np.ndarray
    construction: str
    seed: Optional[int] = None
    axisym: bool = False
    raster: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.construction not in CONSTRUCTIONS:
            raise GeometryError(f"unknown construction {self.construction!r}")
        M = roughness_count(self.epsilon)
        n_ax = axial_count(self.epsilon, self.period_T)
        lv = np.ascontiguousarray(self.levels, dtype=np.int8)
        expected = (n_ax * self.raster, 1 if self.axisym else M * self.raster)
        if lv.shape != expected:
            raise GeometryError(f"levels shape {lv.shape} != expected {expected}")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def M(self) -> int:
        return roughness_count(self.epsilon)

    @property
    def radius_field(self) -> np.ndarray:
        return 1.0 + self.levels.astype(float) * self.epsilon / LEVELS

    @property
    def shape(self) -> tuple:
        return self.levels.shape

    def __eq__(self, other):
        if not isinstance(other, RoughPipeSample):
            return NotImplemented
        return (
            self.epsilon == other.epsilon
            and self.period_T == other.period_T
            and self.construction == other.construction
            and self.seed == other.seed
            and self.axisym == other.axisym
            and self.raster == other.raster
            and np.array_equal(self.levels, other.levels)
        )

    __hash__ = None

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "epsilon": Fraction(self.epsilon).limit_denominator(1 << 20).__str__(),
            "period_T": Fraction(self.period_T).limit_denominator(1 << 20).__str__(),
            "construction": self.construction,
            "seed": self.seed,
            "axisym": self.axisym,
            "raster": self.raster,
            "level_unit": f"epsilon/{LEVELS}",
            "shape": list(self.levels.shape),
            "radius_field": ["".join(str(int(v)) for v in row) for row in self.levels],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RoughPipeSample":
        levels = np.array([[int(c) for c in row] for row in d["radius_field"]], dtype=np.int8)
        levels = levels.reshape(d["shape"])
        return cls(
            epsilon=float(Fraction(d["epsilon"])),
            period_T=float(Fraction(d["period_T"])),
            levels=levels,
            construction=d["construction"],
            seed=d["seed"],
            axisym=bool(d["axisym"]),
            raster=int(d.get("raster", 1)),
        )

    @classmethod
    def loads(cls, text: str) -> "RoughPipeSample":
        return cls.from_dict(json.loads(text))


def from_bits(epsilon, period_T, bits, axisym=False, seed=None) -> RoughPipeSample:
    """Bernoulli sample with prescribed bits (testing hook and sampler back end)."""
    bits = np.asarray(bits)
    if not np.isin(bits, (0, 1)).all():
        raise GeometryError("Bernoulli bits must be 0 or 1")
    return RoughPipeSample(
        epsilon=epsilon,
        period_T=period_T,
        levels=(bits * LEVELS).astype(np.int8),
        construction="BernoulliAxisym" if axisym else "Bernoulli3D",
        seed=seed,
        axisym=axisym,
    )


def smooth(epsilon, period_T, axisym=True) -> RoughPipeSample:
    M = roughness_count(epsilon)
    n_ax = axial_count(epsilon, period_T)
    return RoughPipeSample(
        epsilon, period_T, np.zeros((n_ax, 1 if axisym else M), np.int8), "Smooth", axisym=axisym
    )


def sample_bernoulli(epsilon, period_T, seed, axisym=False) -> RoughPipeSample:
    """Independent fair bits per eps-cell; radius 1 + eps * bit.

    In axisymmetric mode a single bit is drawn per axial cell.
    """
    M = roughness_count(epsilon)
    n_ax = axial_count(epsilon, period_T)
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n_ax, 1 if axisym else M), dtype=np.int8)
    return from_bits(epsilon, period_T, bits, axisym=axisym, seed=seed)


def sample_poisson(epsilon, period_T, seed, raster=2) -> RoughPipeSample:
    """Unit-intensity Poisson points on the rescaled strip, one bump per point.

    The strip [0, T/eps) x [0, 2*pi/eps) (arc-length units) is periodized.
    Each point raises the wall to 1 + eps/2 on the scaled cylindrical cube
    |x1 - z1| < eps, |theta - theta_z| < eps.  Bumps are rasterized onto a
    lattice ``raster`` times finer than the eps-cells by cell-centre
    inclusion; overlapping bumps merge by union.
    """
    M = roughness_count(epsilon)
    n_ax = axial_count(epsilon, period_T)
    rng = np.random.default_rng(seed)
    L1, L2 = period_T / epsilon, 2 * np.pi / epsilon
    n_pts = rng.poisson(L1 * L2)
    pts = rng.uniform(size=(n_pts, 2)) * np.array([L1, L2])
    # back to physical units: x1 = eps * s1, theta = eps * s2
    z1, zt = epsilon * pts[:, 0], epsilon * pts[:, 1]

    na, nt = n_ax * raster, M * raster
    xc = (np.arange(na) + 0.5) * (period_T / na)
    tc = (np.arange(nt) + 0.5) * (2 * np.pi / nt)
    levels = np.zeros((na, nt), dtype=np.int8)
    for a, b in zip(z1, zt):
        dx = np.abs((xc - a + period_T / 2) % period_T - period_T / 2)
        dt = np.abs((tc - b + np.pi) % (2 * np.pi) - np.pi)
        levels[np.ix_(dx < epsilon, dt < epsilon)] = 1
    return RoughPipeSample(
        epsilon, period_T, levels, "PoissonBump", seed=seed, raster=raster,
        meta={"n_points": int(n_pts)},
    )


def perturb_one_cell(sample: RoughPipeSample, i: int, j: int) -> RoughPipeSample:
    """Flip Bernoulli bit (i, j); everything else is copied."""
    if not sample.construction.startswith("Bernoulli") and sample.construction != "Smooth":
        raise GeometryError("perturb_one_cell needs a Bernoulli sample")
    n_ax, n_th = sample.shape
    if not (0 <= i < n_ax and 0 <= j < n_th):
        raise IndexError(f"cell ({i}, {j}) outside {sample.shape}")
    bits = (sample.levels // LEVELS).astype(np.int8).copy()
    bits[i, j] ^= 1
    return from_bits(sample.epsilon, sample.period_T, bits, axisym=sample.axisym, seed=sample.seed)


# ----------------------------------------------------------------------------
# grid and mask
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CylGrid:
    """Uniform cylindrical grid on [0, T) x [0, 2pi) x [0, 1 + eps].

    ``s`` grid cells per eps in x1 and r, and per 2*pi*eps in theta.  With
    ``axisym`` there is a single angular cell and no swirl unknown.
    """

    epsilon: float
    period_T: float
    s: int
    axisym: bool = True

    def __post_init__(self):
        if self.s < 1:
            raise GeometryError("s must be >= 1")
        roughness_count(self.epsilon)
        axial_count(self.epsilon, self.period_T)

    @property
    def M(self):
        return roughness_count(self.epsilon)

    @property
    def n1(self):
        return self.s * axial_count(self.epsilon, self.period_T)

    @property
    def nth(self):
        return 1 if self.axisym else self.s * self.M

    @property
    def nr(self):
        return self.s * (self.M + 1)

    @property
    def r_max(self):
        return 1.0 + self.epsilon

    @property
    def h1(self):
        return self.period_T / self.n1

    @property
    def hth(self):
        return 2 * np.pi / self.nth

    @property
    def hr(self):
        return self.epsilon / self.s

    @property
    def k_wall(self):
        """Radial face index of r = 1."""
        return self.s * self.M

    @property
    def shape(self):
        return (self.n1, self.nth, self.nr)

    @property
    def r_centers(self):
        return (np.arange(self.nr) + 0.5) * self.hr

    @property
    def r_faces(self):
        return np.arange(self.nr + 1) * self.hr

    @property
    def x_centers(self):
        return (np.arange(self.n1) + 0.5) * self.h1

    @property
    def x_faces(self):
        return np.arange(self.n1) * self.h1

    def cell_volumes(self):
        v = self.h1 * self.hth * self.hr * self.r_centers
        return np.broadcast_to(v, self.shape)


@dataclass(frozen=True, eq=False)
class SolidMask:
    grid: CylGrid
    fluid: np.ndarray  # bool (n1, nth, nr)

    @property
    def n_fluid(self):
        return int(self.fluid.sum())


def check_alignment(sample: RoughPipeSample, grid: CylGrid):
    if sample.epsilon != grid.epsilon or sample.period_T != grid.period_T:
        raise GeometryError("grid and sample disagree on epsilon or period")
    n_th = sample.levels.shape[1]
    if grid.axisym and n_th != 1 and sample.levels.any():
        raise GeometryError("an axisymmetric grid needs an axisymmetric sample")
    if grid.s % sample.raster:
        raise GeometryError(f"s={grid.s} is not a multiple of raster={sample.raster}")
    if np.any((grid.s * sample.levels.astype(int)) % LEVELS):
        raise GeometryError(f"s={grid.s} cannot place radius 1 + eps/2 on a radial face")


def build_mask(sample: RoughPipeSample, grid: CylGrid) -> SolidMask:
    """Cell is fluid iff its radial centre lies below the local wall radius."""
    check_alignment(sample, grid)
    lv = sample.levels
    if grid.axisym and lv.shape[1] != 1:
        lv = lv[:, :1]  # all zero, checked above
    rep1 = grid.n1 // lv.shape[0]
    rep2 = grid.nth // lv.shape[1]
    lv_grid = np.repeat(np.repeat(lv, rep1, axis=0), rep2, axis=1)
    # wall face index in radial cells: k_wall + level * s / LEVELS
    k_top = grid.k_wall + (lv_grid.astype(int) * grid.s) // LEVELS
    fluid = np.arange(grid.nr)[None, None, :] < k_top[:, :, None]
    return SolidMask(grid, fluid)


def wall_area_from_mask(mask: SolidMask) -> float:
    """Total fluid/solid interface area measured on the mask."""
    g, F = mask.grid, mask.fluid
    area = 0.0
    # radial faces: between k-1 and k, plus the outer boundary
    rf = g.r_faces
    up = np.concatenate([F, np.zeros(F.shape[:2] + (1,), bool)], axis=2)
    lo = np.concatenate([np.zeros(F.shape[:2] + (1,), bool), F], axis=2)
    mism = up != lo
    mism[:, :, 0] = False
    area += (mism * (g.h1 * g.hth * rf)[None, None, :]).sum()
    # axial faces
    mism = F != np.roll(F, 1, axis=0)
    area += (mism * (g.hth * g.hr * g.r_centers)[None, None, :]).sum()
    if not g.axisym:
        mism = F != np.roll(F, 1, axis=1)
        area += mism.sum() * g.h1 * g.hr
    return float(area)


def staircase_area(sample: RoughPipeSample) -> float:
    """Analytic area of the staircase wall r = radius(x1, theta)."""
    rho = sample.radius_field
    n_ax, n_th = rho.shape
    dx = sample.period_T / n_ax
    dth = 2 * np.pi / n_th
    area = (rho * dx * dth).sum()  # cylindrical wall pieces
    # axial risers: annular sectors between neighbouring radii
    a = np.roll(rho, 1, axis=0)
    area += (np.abs(rho**2 - a**2) / 2 * dth).sum()
    if not sample.axisym and n_th > 1:
        b = np.roll(rho, 1, axis=1)
        area += (np.abs(rho - b) * dx).sum()
    return float(area)


@dataclass
class ThicknessReport:
    passed: bool
    violations: list

    def __bool__(self):
        return self.passed


def validate_thickness(sample: RoughPipeSample, grid: Optional[CylGrid] = None) -> ThicknessReport:
    """Check 1 <= radius <= 1 + eps, lattice alignment and fluid connectivity."""
    violations = []
    rho = sample.radius_field
    eps = sample.epsilon
    bad = np.argwhere((rho < 1 - 1e-12) | (rho > 1 + eps + 1e-12))
    for i, j in bad:
        violations.append(f"radius {rho[i, j]:.6g} at cell ({i}, {j}) outside [1, 1+eps]")
    try:
        roughness_count(eps)
        axial_count(eps, sample.period_T)
    except GeometryError as exc:
        violations.append(str(exc))
    if sample.construction.startswith("Bernoulli") and not np.isin(sample.levels, (0, LEVELS)).all():
        violations.append("Bernoulli radius not in {1, 1+eps}")
    if sample.construction == "PoissonBump" and not np.isin(sample.levels, (0, 1)).all():
        violations.append("Poisson radius not in {1, 1+eps/2}")
    if not violations:
        if grid is None:
            grid = CylGrid(eps, sample.period_T, s=max(2, sample.raster), axisym=sample.axisym)
        mask = build_mask(sample, grid)
        F = mask.fluid
        core = F[:, :, : grid.k_wall]
        if not core.all():
            violations.append("unit cylinder D_1 is not entirely fluid")
        structure = ndimage.generate_binary_structure(3, 1)
        # periodic in x1 and theta: tile once in each periodic direction
        tiled = np.concatenate([F, F], axis=0)
        if F.shape[1] > 1:
            tiled = np.concatenate([tiled, tiled], axis=1)
        _, n_comp = ndimage.label(tiled, structure=structure)
        if n_comp != 1:
            violations.append(f"fluid region has {n_comp} components")
    return ThicknessReport(not violations, violations)
