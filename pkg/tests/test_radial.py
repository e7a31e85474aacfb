import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from balayage.continuum_kernels import GreenKernelSpec
from balayage.errors import InvalidInputError
from balayage.radial import (RadialGrid, ball_exponent_critical, ball_exponent_flip,
                             build_radial_operator, power_tail_finiteness, radial_power_instance,
                             radial_power_trend, sphere_average)
from balayage.semilinear import solve_fixed


def coarse_from_fine(K_fine, w_fine, w_coarse):
    """Aggregate a refined operator (each cell split in two) onto the parent grid."""
    M = K_fine * w_fine[:, None]
    M = M.reshape(M.shape[0] // 2, 2, -1, 2).sum(axis=(1, 3))
    return M / w_coarse[:, None]


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_d1_operator_matches_dblquad():
    spec = GreenKernelSpec("riesz", 1, 0.5)
    grid = RadialGrid([0.0, 0.5, 1.0, 2.0, 4.0], 1)
    K = build_radial_operator(spec, grid)
    beta = spec.alpha - 1
    for i, j in [(0, 0), (0, 2), (1, 2), (3, 3)]:
        a, b = grid.inner[i], grid.outer[i]
        c, d = grid.inner[j], grid.outer[j]
        f = lambda s, r: (abs(r - s) ** beta if r != s else 0.0) + (r + s) ** beta
        val = integrate.dblquad(f, a, b, c, d, epsrel=1e-10)[0]
        expect = 2 * spec.c * val / grid.weights[i]
        assert K[i, j] == pytest.approx(expect, rel=1e-4)


@pytest.mark.parametrize("d, alpha, edges", [
    (1, 0.5, [0.0, 0.5, 1.0, 2.0, 4.0]),
    (2, 1.0, [0.0, 1.0, 2.0, 4.0]),
    (3, 0.7, [0.0, 0.5, 3.0]),
])
def test_operator_symmetry_positivity_refinement(d, alpha, edges):
    spec = GreenKernelSpec("riesz", d, alpha)
    grid = RadialGrid(edges, d)
    K = build_radial_operator(spec, grid)
    w = grid.weights
    np.testing.assert_allclose(K * w[:, None], (K * w[:, None]).T, rtol=1e-9)
    assert np.all(K > 0)
    e = np.asarray(edges)
    fine_edges = np.sort(np.concatenate([e, 0.5 * (e[:-1] + e[1:])]))
    fine = RadialGrid(fine_edges, d)
    Kf = build_radial_operator(spec, fine)
    np.testing.assert_allclose(coarse_from_fine(Kf, fine.weights, w), K, rtol=1e-7)


@pytest.mark.parametrize("d, alpha", [(2, 1.0), (3, 1.3), (4, 1.7)])
@pytest.mark.parametrize("r, s", [(1.0, 0.3), (0.7, 1.2), (1.0, 0.999)])
def test_sphere_average_matches_angular_quadrature(d, alpha, r, s):
    expo = 0.5 * (alpha - d)
    f = lambda th: ((r - s) ** 2 + 4 * r * s * math.sin(0.5 * th) ** 2) ** expo * math.sin(th) ** (d - 2)
    norm = integrate.quad(lambda th: math.sin(th) ** (d - 2), 0, math.pi)[0]
    expect = integrate.quad(f, 0, math.pi, epsrel=1e-12, limit=400)[0] / norm
    assert float(sphere_average(r, s, d, alpha)) == pytest.approx(expect, rel=1e-10)


def test_newtonian_ball_self_average():
    # mean over the unit ball of the potential (3 - |x|^2) / 6 of its own indicator
    K = build_radial_operator(GreenKernelSpec("newtonian", 3), RadialGrid([0.0, 1.0], 3))
    assert K[0, 0] == pytest.approx(0.4, rel=1e-10)


def test_zero_width_cell_is_inert():
    spec = GreenKernelSpec("riesz", 1, 0.5)
    K = build_radial_operator(spec, RadialGrid([0.0, 1.0, 1.0, 2.0], 1))
    assert not K[1].any() and not K[:, 1].any()


def test_grid_validation():
    with pytest.raises(InvalidInputError):
        RadialGrid([1.0, 0.5])
    with pytest.raises(InvalidInputError):
        RadialGrid.geometric(1.0)
    with pytest.raises(InvalidInputError):
        build_radial_operator(GreenKernelSpec("newtonian", 3), RadialGrid([0.0, 1.0], 1))


@given(st.integers(1, 3), st.floats(0.1, 0.9), st.floats(0.3, 3.0))
def test_finiteness_value_at_zero_level(d, frac, excess):
    alpha = frac * min(2.0, d)
    gamma = alpha + excess
    v = power_tail_finiteness(d, alpha, gamma, 0.0)
    assert v.finite
    assert v.value == pytest.approx(1.0 / (gamma - alpha), rel=1e-8)


@given(st.floats(0.1, 0.9), st.floats(-1.0, 0.0), st.floats(0.01, 1.0))
def test_no_eta_helps_when_gamma_at_most_alpha(alpha, shift, eta):
    gamma = max(alpha + shift, 0.0)
    assert not power_tail_finiteness(1, alpha, gamma, eta * 1.0).finite


def test_thin_set_potential_diverges_past_threshold():
    alpha, gamma, h = 0.5, 1.5, 2.0
    # finite exactly while eta h < gamma - alpha = 1
    assert power_tail_finiteness(1, alpha, gamma, 0.45 * h).finite
    assert not power_tail_finiteness(1, alpha, gamma, 0.5 * h).finite
    assert not power_tail_finiteness(1, alpha, gamma, 0.8 * h).finite


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_ball_flip(alpha):
    assert abs(ball_exponent_flip(alpha) - ball_exponent_critical(alpha)) < 0.005


def test_instance_solves_to_residual():
    inst = radial_power_instance(1, 0.5, 2.0, 1.0, 16.0)
    pb = inst.problem
    rep = solve_fixed(pb.Kp, pb.phi, pb.h)
    assert rep.residual < 1e-9
    assert np.all(rep.u > 0) and np.all(rep.u <= 1.0 + 1e-12)
    # phi vanishes inside the unit ball, so u = h there up to the potential of the outside
    assert 0 < inst.value_at_origin(rep.u) < 1.0
    assert inst.tail_potential(rep.u, 8.0) < inst.tail_potential(rep.u, 2.0)


def test_trend_separates_cases_qualitatively():
    radii = (2.0 ** 4, 2.0 ** 6)
    good = radial_power_trend(1, 0.5, 2.0, 1.0, radii)
    bad = radial_power_trend(1, 0.5, 1.2, 1.0, radii)
    assert all(p.residual < 1e-9 for p in good + bad)
    assert good[-1].gap < good[0].gap
    assert bad[-1].gap > 2 * good[-1].gap
    assert math.isfinite(good[-1].u_origin)
