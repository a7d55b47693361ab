import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughpipe.boundary_layer import compute_boundary_layer
from roughpipe.effective import (
    EffectiveModel,
    FitError,
    alpha_table_csv,
    build_navier_approx,
    estimate_alpha,
    fit_profile,
    hagen_poiseuille,
    poiseuille_prediction,
    slip_length,
)
from roughpipe.geometry import CylGrid, build_mask, from_bits, sample_bernoulli, smooth

phis = st.floats(-0.2, 0.2)
eas = st.floats(0.0, 0.4)


def _ens(samples, s=4):
    return [compute_boundary_layer(build_mask(x, CylGrid(x.epsilon, x.period_T, s, axisym=x.axisym))) for x in samples]


def test_hagen_poiseuille_values():
    hp = hagen_poiseuille(np.pi / 2)
    assert hp.u(0.0) == 1.0
    assert hp.p(0.0) - hp.p(1.0) == pytest.approx(8 * hp.phi / np.pi)


@given(phis)
def test_hagen_poiseuille_flux(phi):
    x, w = np.polynomial.legendre.leggauss(4)
    r = 0.5 * (x + 1)
    flux = np.sum(0.5 * w * hagen_poiseuille(phi).u(r) * 2 * np.pi * r)
    assert flux == pytest.approx(phi, abs=1e-15)


def test_slip_length(oracles):
    assert slip_length(0.0, 0.1) == 0.0
    assert slip_length(0.5, 0.1) == pytest.approx(oracles["slip_length_eps_alpha_0.05"], rel=1e-14)
    with pytest.raises(ValueError):
        slip_length(5.0, 0.1)


def test_navier_closed_forms(oracles):
    for c in oracles["navier_cases"]:
        m = build_navier_approx(c["phi"], 0.1, c["eps_alpha"] / 0.1)
        assert m.u(1.0) == pytest.approx(c["wall_u"], rel=1e-12)
        assert m.wall_strain() == pytest.approx(c["wall_strain"], rel=1e-12)
        assert m.slip_ratio() == pytest.approx(c["slip_ratio"], rel=1e-12)
        assert m.slip_ratio() == pytest.approx(m.lam, rel=1e-12)


@given(phis, eas)
def test_navier_flux_independent_of_alpha(phi, ea):
    m = build_navier_approx(phi, 0.1, ea / 0.1)
    assert m.flux() == pytest.approx(phi, abs=1e-14)


def test_zero_alpha_recovers_poiseuille():
    m = build_navier_approx(0.1, 0.125, 0.0)
    r = np.linspace(0, 1, 11)
    assert np.array_equal(m.u(r), hagen_poiseuille(0.1).u(r))
    assert m.lam == 0.0


def test_prediction(oracles):
    assert poiseuille_prediction(np.pi / 8, 1.0, 0.1, 0.0) == pytest.approx(oracles["dp_phi_pi_over_8_ell_1"])
    assert poiseuille_prediction(0.1, 0.0, 0.1, 0.3) == 0.0


@given(st.floats(0.01, 0.2), st.floats(0.1, 2.0), eas)
def test_prediction_linear(phi, ell, ea):
    a = poiseuille_prediction(phi, ell, 0.1, ea / 0.1)
    assert poiseuille_prediction(2 * phi, ell, 0.1, ea / 0.1) == pytest.approx(2 * a)
    assert poiseuille_prediction(phi, 3 * ell, 0.1, ea / 0.1) == pytest.approx(3 * a)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_fit_recovers_synthetic_profile(alpha, beta):
    eps, hr = 0.0625, 1 / 64
    r = (np.arange(64) + 0.5) * hr
    m = fit_profile(r, eps * (alpha + beta * r**2), eps, hr)
    assert m.alpha == pytest.approx(alpha, abs=1e-10)
    assert m.beta == pytest.approx(beta, abs=1e-10)
    assert m.fit_residual < 1e-12


def test_fit_window_too_small():
    with pytest.raises(FitError):
        fit_profile(np.array([0.9]), np.array([0.0]), 0.1, 0.1, fit_radius=0.5)


def test_smooth_ensemble_alpha_vanishes_with_grid():
    # the discrete smooth pipe carries an O(h^2) numerical slip and nothing else
    vals = []
    for s in (2, 4, 8):
        m = estimate_alpha(_ens([smooth(0.125, 1.0)], s))
        vals.append(0.125 * abs(m.alpha))
        assert abs(m.beta + 2 * m.alpha) < 0.02
    assert vals[2] < 2e-4
    assert np.log(vals[0] / vals[2]) / np.log(4) == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("idx", [0, 1])
def test_all_ones_alpha_oracle(oracles, idx):
    o = oracles["all_ones"][idx]
    eps = o["epsilon"]
    n = int(round(1 / eps))
    ens = _ens([from_bits(eps, 1.0, np.ones((n, 1), int), axisym=True)], s=4)
    m = estimate_alpha(ens)
    assert eps * m.alpha == pytest.approx(o["eps_alpha"], rel=1e-2)
    assert eps * m.beta == pytest.approx(o["eps_beta"], rel=1e-2)


def test_bernoulli_flux_constraint():
    eps = 0.125
    m = estimate_alpha(_ens([sample_bernoulli(eps, 1.0, s, axisym=True) for s in range(8)]))
    assert m.alpha > 0
    assert m.flux_constraint_ok()


def test_model_serialization():
    m = EffectiveModel(0.125, 0.25, -0.5, 1e-16, 1e-3, slip_length(0.25, 0.125), 64, 1e-3, 0.5)
    assert EffectiveModel.loads(m.dumps()) == m
    assert alpha_table_csv([m]).splitlines()[1].startswith("0.125,64,0.25,-0.5")
