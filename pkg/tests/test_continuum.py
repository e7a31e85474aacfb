import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from balayage.continuum_kernels import (GreenKernelSpec, SpaceTimePoint, chapman_kolmogorov_residual,
                                        density_eval, density_mass, green_eval, green_from_density,
                                        matching_spec, spacetime_green_eval, spacetime_time_integral)
from balayage.errors import InvalidInputError

coords = st.floats(-3.0, 3.0)


def test_frozen_values():
    assert density_eval("gaussian", 3, 1 / (4 * math.pi), [0, 0, 0], [0, 0, 0]) == pytest.approx(1.0)
    assert density_eval("cauchy", 1, 1.0, [0.0], [0.0]) == pytest.approx(1 / math.pi)
    assert green_eval(GreenKernelSpec("newtonian", 3), [0, 0, 0], [1, 0, 0]) == pytest.approx(
        1 / (4 * math.pi))
    assert green_eval(GreenKernelSpec("riesz", 2, 1.0), [0, 0], [0, 1]) == pytest.approx(
        1 / (2 * math.pi))
    heat = GreenKernelSpec("heat", 2)
    assert green_eval(heat, SpaceTimePoint([0, 0], 0.0), SpaceTimePoint([0, 0], 1.0)) == 0.0
    assert green_eval(heat, SpaceTimePoint([0, 0], 1.0), SpaceTimePoint([0, 0], 0.0)) == pytest.approx(
        1 / (4 * math.pi))


@given(st.floats(0.2, 5.0), st.floats(0.1, 1.9))
def test_riesz_homogeneity(lam, alpha):
    spec = GreenKernelSpec("riesz", 2, alpha)
    x, y = np.array([0.3, -0.2]), np.array([1.1, 0.4])
    scaled = green_eval(spec, lam * x, lam * y)
    assert scaled == pytest.approx(lam ** (alpha - 2) * green_eval(spec, x, y), rel=1e-12)


@given(coords, coords, coords, coords)
def test_symmetry(a, b, c, d):
    x, y = [a, b], [c, d]
    if x == y:
        return
    spec = GreenKernelSpec("riesz", 2, 1.5)
    assert green_eval(spec, x, y) == green_eval(spec, y, x)
    for kind in ("gaussian", "cauchy"):
        assert density_eval(kind, 2, 0.7, x, y) == density_eval(kind, 2, 0.7, y, x)


@pytest.mark.parametrize("kind, d", [("gaussian", 1), ("gaussian", 3), ("cauchy", 1), ("cauchy", 2)])
def test_densities_have_unit_mass(kind, d):
    assert density_mass(kind, d, 0.8) == pytest.approx(1.0, abs=1e-9)


def test_chapman_kolmogorov_cauchy_plane():
    assert chapman_kolmogorov_residual("cauchy", 2, 0.5, 1.0, [0.0, 0.0], [0.7, -0.4]) < 1e-6


@pytest.mark.parametrize("kind, d", [("gaussian", 2), ("cauchy", 1)])
def test_chapman_kolmogorov(kind, d):
    x, y = np.full(d, 0.3), np.full(d, -0.5)
    assert chapman_kolmogorov_residual(kind, d, 0.4, 1.3, x, y) < 1e-6


@pytest.mark.parametrize("kind, d", [("gaussian", 3), ("cauchy", 2), ("gaussian", 4)])
def test_green_from_density(kind, d):
    x, y = np.zeros(d), np.full(d, 0.9)
    expect = green_eval(matching_spec(kind, d), x, y)
    assert green_from_density(kind, d, x, y) == pytest.approx(expect, rel=1e-6)


def test_spacetime_time_integral_is_newtonian():
    x, y = [0.0, 0.0, 0.0], [0.4, 1.0, -0.3]
    expect = green_eval(GreenKernelSpec("newtonian", 3), x, y)
    assert spacetime_time_integral(3, x, y, r=2.5) == pytest.approx(expect, rel=1e-6)
    assert spacetime_green_eval(3, SpaceTimePoint(x, 0.0), SpaceTimePoint(y, 0.0)) == 0.0


def test_invalid_inputs():
    with pytest.raises(InvalidInputError, match="recurrent"):
        green_from_density("gaussian", 2, [0, 0], [1, 0])
    with pytest.raises(InvalidInputError, match="recurrent"):
        green_from_density("cauchy", 1, [0], [1])
    with pytest.raises(InvalidInputError):
        GreenKernelSpec("newtonian", 2)
    with pytest.raises(InvalidInputError):
        GreenKernelSpec("riesz", 1, 1.0)
    with pytest.raises(InvalidInputError):
        GreenKernelSpec("bessel", 3)
    with pytest.raises(InvalidInputError):
        green_eval(GreenKernelSpec("newtonian", 3), [0, 0, 0], [0, 0, 0])
    with pytest.raises(InvalidInputError):
        density_eval("gaussian", 1, 0.0, [0], [1])
    with pytest.raises(InvalidInputError):
        spacetime_time_integral(2, [0, 0], [1, 0])


def test_spec_json_round_trip():
    spec = GreenKernelSpec("riesz", 3, 1.2)
    assert GreenKernelSpec.from_json(spec.to_json()) == spec
