import numpy as np
import pytest

from roughpipe.effective import hagen_poiseuille
from roughpipe.geometry import CylGrid, build_mask, sample_bernoulli, smooth
from roughpipe.norms import velocity_entries
from roughpipe.stokes import (
    SolverConfig,
    compute_flux,
    potential_forcing,
    solve_ns_flux,
    solve_stokes_flux,
    solve_stokes_forced,
)


@pytest.fixture(scope="module")
def rough_mask():
    return build_mask(sample_bernoulli(0.125, 1.0, 4, axisym=True), CylGrid(0.125, 1.0, 4))


@pytest.fixture(scope="module")
def smooth_mask():
    return build_mask(smooth(0.125, 1.0), CylGrid(0.125, 1.0, 4))


def test_smooth_pipe_is_hagen_poiseuille(smooth_mask):
    phi = 0.1
    sol = solve_stokes_flux(smooth_mask, phi)
    hp = hagen_poiseuille(phi)
    rel = velocity_entries(sol.disc, sol.u, hp.u).norm() / velocity_entries(sol.disc, 0 * sol.u, lambda r: -hp.u(r)).norm()
    assert rel < 2e-3
    assert sol.G == pytest.approx(8 * phi / np.pi, rel=2e-3)


def test_smooth_3d_matches_axisymmetric():
    g3 = CylGrid(0.25, 1.0, 2, axisym=False)
    g2 = CylGrid(0.25, 1.0, 2, axisym=True)
    a = solve_stokes_flux(build_mask(smooth(0.25, 1.0, axisym=False), g3), 0.1)
    b = solve_stokes_flux(build_mask(smooth(0.25, 1.0), g2), 0.1)
    assert a.G == pytest.approx(b.G, rel=1e-10)
    assert np.allclose(a.field.u1, b.field.u1[:, :1, :], atol=1e-11)
    assert np.abs(a.field.uth).max() < 1e-11


def test_zero_flux_gives_zero_field(rough_mask):
    for solve in (solve_stokes_flux, solve_ns_flux):
        sol = solve(rough_mask, 0.0)
        assert not np.any(sol.u) and sol.G == 0


def test_stokes_is_linear_in_flux(rough_mask):
    a = solve_stokes_flux(rough_mask, 0.05)
    b = solve_stokes_flux(rough_mask, 0.1)
    assert np.allclose(b.u, 2 * a.u, rtol=0, atol=1e-14)
    assert b.G == pytest.approx(2 * a.G, rel=1e-12)


def test_flux_constant_across_stations(rough_mask):
    sol = solve_ns_flux(rough_mask, 0.1)
    fl = [compute_flux(sol.field, t) for t in range(rough_mask.grid.n1)]
    assert np.ptp(fl) <= 1e-10 * 0.1
    assert np.mean(fl) == pytest.approx(0.1, rel=1e-12)
    assert sol.max_divergence <= SolverConfig().linear_tol


def test_ns_smooth_pipe_one_step(smooth_mask):
    sol = solve_ns_flux(smooth_mask, 0.15)
    st = solve_stokes_flux(smooth_mask, 0.15)
    assert sol.iterations == 1
    assert np.abs(sol.u - st.u).max() < 1e-12


def test_ns_correction_is_quadratic_in_flux(rough_mask):
    d = {}
    for phi in (0.1, 0.05):
        ns = solve_ns_flux(rough_mask, phi)
        stk = solve_stokes_flux(rough_mask, phi)
        d[phi] = np.sqrt(ns.disc.W @ (ns.u - stk.u) ** 2)
    assert d[0.1] / d[0.05] == pytest.approx(4.0, rel=0.05)


def test_smallness_guard(rough_mask):
    with pytest.raises(ValueError):
        solve_ns_flux(rough_mask, 0.5)


def test_potential_forcing_gives_zero_velocity(smooth_mask):
    g = smooth_mask.grid
    xc = g.x_centers[:, None, None]
    rc = g.r_centers[None, None, :]
    gfun = np.sin(2 * np.pi * xc) * np.cos(np.pi * rc) * (rc < 0.8) * np.ones(g.shape)
    gfun = np.where(smooth_mask.fluid, gfun, 0.0)
    sol = solve_stokes_forced(smooth_mask, potential_forcing(smooth_mask, gfun))
    assert np.abs(sol.u).max() < 1e-10
    p = sol.field.p[smooth_mask.fluid]
    ref = gfun[smooth_mask.fluid]
    assert np.allclose(p - p.mean(), ref - ref.mean(), atol=1e-9)


def test_zero_forcing_zero_field(smooth_mask):
    sol = solve_stokes_forced(smooth_mask, np.zeros((3,) + smooth_mask.grid.shape))
    assert not np.any(sol.u)


def test_field_dump_deterministic(rough_mask):
    a = solve_stokes_flux(rough_mask, 0.1).field.dumps()
    b = solve_stokes_flux(rough_mask, 0.1).field.dumps()
    assert a == b


def test_krylov_path_agrees_with_direct():
    m = build_mask(sample_bernoulli(0.25, 1.0, 2, axisym=True), CylGrid(0.25, 1.0, 2))
    a = solve_stokes_flux(m, 0.1, SolverConfig(method="direct"))
    b = solve_stokes_flux(m, 0.1, SolverConfig(method="minres", linear_tol=1e-13))
    assert np.abs(a.u - b.u).max() < 1e-10
    assert b.max_divergence <= 1e-12
    assert np.ptp(b.slice_fluxes()) <= 1e-10 * 0.1


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="lu")
    with pytest.raises(ValueError):
        SolverConfig(relaxation=0)
