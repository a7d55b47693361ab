import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughpipe.geometry import (
    CylGrid,
    GeometryError,
    RoughPipeSample,
    build_mask,
    from_bits,
    perturb_one_cell,
    sample_bernoulli,
    sample_poisson,
    smooth,
    staircase_area,
    validate_thickness,
    wall_area_from_mask,
)

inv_eps = st.sampled_from([2, 4, 8])
seeds = st.integers(0, 2**32 - 1)


def test_angular_cell_count():
    smp = sample_bernoulli(0.25, 1.0, 0)
    assert smp.shape == (4, 4)
    assert smp.M == 4


@pytest.mark.parametrize("eps", [0.3, 0.0, 1.5])
def test_rejects_inadmissible_epsilon(eps):
    with pytest.raises(GeometryError):
        sample_bernoulli(eps, 1.0, 0)


def test_period_must_be_eps_multiple():
    with pytest.raises(GeometryError):
        sample_bernoulli(0.25, 1.1, 0)


def test_all_zero_bits_is_smooth_radius():
    smp = from_bits(0.125, 1.0, np.zeros((8, 8), int))
    assert np.all(smp.radius_field == 1.0)
    g = CylGrid(0.125, 1.0, 2, axisym=False)
    assert np.array_equal(build_mask(smp, g).fluid, build_mask(smooth(0.125, 1.0, axisym=False), g).fluid)


def test_bernoulli_mean_height_monte_carlo():
    # 2e4 cells; exact mean of radius - 1 is eps/2
    eps = 0.125
    h = np.concatenate([sample_bernoulli(eps, 1.0, s).radius_field.ravel() - 1 for s in range(320)])
    assert h.size >= 10_000
    assert abs(h.mean() - eps / 2) < 4 * (eps / 2) / np.sqrt(h.size)


def test_bernoulli_bit_frequency_uniform_across_cells():
    from scipy.stats import chisquare

    eps, n = 0.25, 10_000
    counts = np.zeros((4, 4))
    for s in range(n):
        counts += sample_bernoulli(eps, 1.0, s).levels // 2
    stat = chisquare(counts.ravel()).pvalue
    assert stat > 0.01
    assert np.all(np.abs(counts / n - 0.5) < 0.03)


def test_poisson_mean_count(oracles):
    n = np.array([sample_poisson(0.25, 1.0, s).meta["n_points"] for s in range(1000)])
    lam = oracles["poisson_mean_count_eps_quarter"]
    assert abs(n.mean() - lam) < 4 * np.sqrt(lam / n.size)


def test_poisson_zero_points_is_smooth():
    smp = RoughPipeSample(0.25, 1.0, np.zeros((8, 8), np.int8), "PoissonBump", raster=2)
    assert np.all(smp.radius_field == 1.0)
    assert validate_thickness(smp).passed


@given(seeds)
def test_poisson_radius_values(seed):
    smp = sample_poisson(0.25, 1.0, seed)
    assert set(np.unique(smp.radius_field)) <= {1.0, 1.125}


def test_poisson_samples_pass_validation():
    assert all(validate_thickness(sample_poisson(0.25, 1.0, s)).passed for s in range(100))


@given(inv_eps, seeds, st.booleans())
def test_sampler_deterministic_and_bounded(n, seed, axisym):
    eps = 1 / n
    a = sample_bernoulli(eps, 1.0, seed, axisym=axisym)
    b = sample_bernoulli(eps, 1.0, seed, axisym=axisym)
    assert a == b
    assert np.all((a.radius_field >= 1) & (a.radius_field <= 1 + eps))
    assert validate_thickness(a).passed


@given(inv_eps, seeds)
def test_serialization_round_trip(n, seed):
    smp = sample_bernoulli(1 / n, 1.0, seed)
    back = RoughPipeSample.loads(smp.dumps())
    assert back == smp
    assert back.dumps() == smp.dumps()


@given(seeds, st.integers(0, 3), st.integers(0, 3))
def test_flip_is_involution(seed, i, j):
    smp = sample_bernoulli(0.25, 1.0, seed)
    once = perturb_one_cell(smp, i, j)
    diff = once.levels != smp.levels
    assert diff.sum() == 1 and diff[i, j]
    assert perturb_one_cell(once, i, j) == smp
    assert validate_thickness(once).passed


def test_flip_on_zero_sample_changes_one_cell():
    smp = from_bits(0.25, 1.0, np.zeros((4, 4), int))
    f = perturb_one_cell(smp, 0, 0)
    assert f.radius_field[0, 0] == 1.25
    assert np.count_nonzero(f.radius_field != 1.0) == 1


def test_smooth_mask_is_unit_cylinder():
    g = CylGrid(0.125, 1.0, 4)
    m = build_mask(smooth(0.125, 1.0), g)
    assert np.array_equal(m.fluid[0, 0], g.r_centers < 1)


def test_raised_cell_band_is_fluid():
    bits = np.zeros((4, 4), int)
    bits[1, 2] = 1
    g = CylGrid(0.25, 1.0, 2, axisym=False)
    F = build_mask(from_bits(0.25, 1.0, bits), g).fluid
    band = g.r_centers > 1
    assert F[2:4, 4:6][:, :, band].all()
    assert not F[0:2, :, :][:, :, band].any()


def test_all_ones_count_matches_pipe_of_radius_one_plus_eps():
    eps, s = 0.25, 2
    g = CylGrid(eps, 1.0, s, axisym=False)
    F = build_mask(from_bits(eps, 1.0, np.ones((4, 4), int)), g).fluid
    expected = g.n1 * g.nth * np.count_nonzero(g.r_centers < 1 + eps)
    assert F.sum() == expected


@given(seeds, st.booleans())
def test_mask_area_equals_staircase_area(seed, axisym):
    smp = sample_bernoulli(0.25, 1.0, seed, axisym=axisym)
    m = build_mask(smp, CylGrid(0.25, 1.0, 2, axisym=axisym))
    assert wall_area_from_mask(m) == pytest.approx(staircase_area(smp), rel=1e-13)


def test_staircase_area_oracle(oracles):
    o = oracles["staircase_axisym_area"]
    smp = from_bits(o["epsilon"], o["T"], np.array(o["bits"])[:, None], axisym=True)
    assert staircase_area(smp) == pytest.approx(o["area"], rel=1e-14)


def test_forced_violation_is_located():
    lv = np.zeros((4, 4), np.int8)
    lv[2, 1] = 4  # radius 1 + 2 eps
    smp = RoughPipeSample(0.25, 1.0, lv, "Bernoulli3D")
    rep = validate_thickness(smp)
    assert not rep.passed
    assert any("(2, 1)" in v for v in rep.violations)


def test_axisym_grid_rejects_3d_sample():
    smp = sample_bernoulli(0.25, 1.0, 3)
    with pytest.raises(GeometryError):
        build_mask(smp, CylGrid(0.25, 1.0, 2, axisym=True))
