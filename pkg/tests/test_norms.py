import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughpipe.geometry import CylGrid, build_mask, sample_bernoulli, smooth
from roughpipe.mimetic import Discretization
from roughpipe.norms import gradient_entries, profile_entries, velocity_entries


def _smooth_disc(s, eps=0.125):
    return Discretization(build_mask(smooth(eps, 1.0), CylGrid(eps, 1.0, s)))


def test_poiseuille_gradient_energy_converges(oracles):
    errs = []
    for s in (2, 4, 8):
        d = _smooth_disc(s)
        u = d.sample_profile(lambda r: 1 - r**2)
        e = gradient_entries(d, u).norm(core=True) ** 2
        errs.append(abs(e - oracles["unit_profile_grad_sq"]))
    assert errs[2] < 1e-2
    rate = np.log(errs[0] / errs[2]) / np.log(4)
    assert rate > 1.7


def test_exact_profile_has_zero_velocity_error():
    d = _smooth_disc(4)
    f = lambda r: 1 - r**2  # noqa: E731
    assert velocity_entries(d, d.sample_profile(f), f).norm() < 1e-14


def test_reference_only_entries_share_layout():
    d = Discretization(build_mask(sample_bernoulli(0.25, 1.0, 1, axisym=True), CylGrid(0.25, 1.0, 2)))
    u = np.random.default_rng(0).standard_normal(d.n_u)
    a = gradient_entries(d, u, lambda r: -2 * r)
    b = gradient_entries(d, np.zeros(d.n_u), lambda r: 2 * r)
    c = gradient_entries(d, u)
    assert a.values.shape == b.values.shape == c.values.shape
    assert np.allclose(a.values, c.values - b.values)
    assert np.any(b.values != 0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_norm_is_absolutely_homogeneous(a, b):
    d = _smooth_disc(2, eps=0.25)
    u = d.sample_profile(lambda r: np.cos(r) + 0.5)
    na = velocity_entries(d, a * u).norm()
    assert na == pytest.approx(abs(a) * velocity_entries(d, u).norm(), rel=1e-12, abs=1e-14)
    nb = gradient_entries(d, b * u).norm()
    assert nb == pytest.approx(abs(b) * gradient_entries(d, u).norm(), rel=1e-12, abs=1e-14)


def test_core_weights_within_full_weights():
    d = Discretization(build_mask(sample_bernoulli(0.25, 1.0, 3, axisym=True), CylGrid(0.25, 1.0, 2)))
    e = profile_entries(d, lambda r: 1 + 0 * r)
    assert np.all(e.weight_core <= e.weight + 1e-15)
    # the core weight of the constant 1 integrates the unit disk over a unit slice
    assert np.sum(e.weight_core[e.values != 0]) == pytest.approx(np.pi, rel=0.05)
