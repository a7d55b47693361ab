import numpy as np
import pytest

from roughpipe.boundary_layer import (
    CorrelationProfile,
    compute_boundary_layer,
    correlation_experiment,
    interior_radius,
)
from roughpipe.geometry import CylGrid, build_mask, from_bits, sample_bernoulli, smooth
from roughpipe.stokes import SolverConfig


def _bl(sample, s=4):
    return compute_boundary_layer(build_mask(sample, CylGrid(sample.epsilon, sample.period_T, s, axisym=sample.axisym)))


def test_smooth_pipe_boundary_layer_vanishes_with_refinement():
    sups = [np.abs(_bl(smooth(0.125, 1.0), s).v_bl).max() for s in (2, 4, 8)]
    assert sups[2] < 2e-3
    assert np.log(sups[0] / sups[2]) / np.log(4) > 1.7


@pytest.mark.parametrize("seed", range(5))
def test_normalization_is_exact(seed):
    bl = _bl(sample_bernoulli(0.125, 1.0, seed, axisym=True))
    assert abs(bl.normalization_flux - np.pi / 2) <= 1e-8
    assert bl.diagnostics["slice_flux_spread"] <= 1e-10


@pytest.mark.parametrize("idx", [0, 1])
def test_all_ones_is_poiseuille_of_larger_pipe(oracles, idx):
    o = oracles["all_ones"][idx]
    eps = o["epsilon"]
    n = int(round(1 / eps))
    bl = _bl(from_bits(eps, 1.0, np.ones((n, 1), int), axisym=True), s=4)
    d = bl.disc
    r = d.face_coords[d.u_faces, 2]
    ax = d.face_kind[d.u_faces] == "ax"
    V = d.sample_profile(lambda rr: 1 - rr**2) - bl.v_bl
    exact = o["c"] * ((1 + eps) ** 2 - r**2)
    assert np.abs(V[ax] - exact[ax]).max() < 5e-3 * o["c"]
    assert np.abs(V[~ax]).max() < 1e-12


def test_interior_radius():
    assert interior_radius(1 / 32) == pytest.approx(0.75)
    assert interior_radius(1 / 8) == 0.5


def test_correlation_identical_inputs_zero_profile():
    smp = sample_bernoulli(0.25, 2.0, 1, axisym=True)
    g = CylGrid(0.25, 2.0, 2)
    prof = correlation_experiment(smp, (0, 0), g, SolverConfig(), perturbed=smp)
    assert prof.peak() == 0.0


def test_correlation_decays_axisymmetric():
    smp = sample_bernoulli(0.125, 2.0, 3, axisym=True)
    prof = correlation_experiment(smp, (3, 0), CylGrid(0.125, 2.0, 4))
    slope, _, r2 = prof.decay_fit()
    assert slope < 0 and r2 >= 0.9
    assert prof.peak() > 0


def test_correlation_rejects_poisson():
    from roughpipe.geometry import sample_poisson

    with pytest.raises(ValueError):
        correlation_experiment(sample_poisson(0.25, 1.0, 0), (0, 0), CylGrid(0.25, 1.0, 2, axisym=False))


def test_profile_rejects_negative():
    with pytest.raises(ValueError):
        CorrelationProfile(np.zeros(2), np.array([-1.0, 0.0]), np.zeros(2), (0, 0, 1), 0.5, 0.25)


def test_size_diagnostics_scale():
    # sup over the interior is O(eps) and the slice L2 norm is O(eps)
    rows = []
    for n in (8, 16):
        d = [_bl(sample_bernoulli(1 / n, 1.0, s, axisym=True)).diagnostics for s in range(4)]
        rows.append((1 / n, np.mean([x["sup_interior"] for x in d]), np.mean([x["l2_slice"] for x in d]),
                     np.mean([x["grad_l2_slice"] for x in d])))
    (e1, s1, l1, g1), (e2, s2, l2, g2) = rows
    k = np.log(e1 / e2)
    assert np.log(s1 / s2) / k > 0.8
    assert np.log(l1 / l2) / k > 0.8
    assert np.log(g1 / g2) / k > 0.3
