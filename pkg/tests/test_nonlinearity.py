import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from balayage import kernels
from balayage.errors import InvalidInputError
from balayage.nonlinearity import Nonlinearity, truncate_phi


def test_radial_power_frozen_value():
    phi = Nonlinearity.radial_power(1.0, [0.5, 2.0])
    # inside the unit ball it vanishes; at r = 2, t = 1: 2^-1 (2 - 1)
    np.testing.assert_allclose(phi(1.0), [0.0, 0.5], rtol=1e-15)


def test_power_and_linear_values():
    np.testing.assert_allclose(Nonlinearity.power([2.0, 1.0], 3.0)(2.0), [16.0, 8.0])
    np.testing.assert_allclose(Nonlinearity.linear([0.5, 0.0])([4.0, 4.0]), [2.0, 0.0])
    np.testing.assert_array_equal(Nonlinearity.power([1.0], 2.0)(-3.0), [0.0])


def test_tabulated_interpolates_and_holds():
    phi = Nonlinearity.tabulated([0.0, 1.0, 2.0], [[0.0, 1.0, 3.0]])
    assert phi.at(0, 0.5) == pytest.approx(0.5)
    assert phi.at(0, 1.5) == pytest.approx(2.0)
    assert phi.at(0, 10.0) == pytest.approx(3.0)


@pytest.mark.parametrize("grid, values", [
    ([0.5, 1.0], [[0.0, 1.0]]),
    ([0.0, 1.0], [[0.1, 1.0]]),
    ([0.0, 1.0, 2.0], [[0.0, 2.0, 1.0]]),
    ([0.0, 1.0], [[0.0, 1.0, 2.0]]),
])
def test_tabulated_validation(grid, values):
    with pytest.raises(InvalidInputError):
        Nonlinearity.tabulated(grid, values)


def test_factory_validation():
    with pytest.raises(InvalidInputError):
        Nonlinearity.power([1.0], 0.0)
    with pytest.raises(InvalidInputError):
        Nonlinearity.linear([-1.0])
    with pytest.raises(InvalidInputError):
        Nonlinearity.radial_power(1.0, [-1.0])
    with pytest.raises(InvalidInputError):
        Nonlinearity.from_json({"family": "cubic"}, 2)
    with pytest.raises(InvalidInputError):
        Nonlinearity.power([1.0], 2.0).scaled(-1.0)


def test_restriction_cap_and_scaling():
    phi = Nonlinearity.power([1.0, 1.0, 1.0], 2.0)
    cut = truncate_phi(phi, [True, False, True], 3.0)
    np.testing.assert_allclose(cut(2.0), [3.0, 0.0, 3.0])
    np.testing.assert_allclose(cut(1.0), [1.0, 0.0, 1.0])
    np.testing.assert_allclose((2.0 * phi)(3.0), 18.0)
    np.testing.assert_allclose((phi + Nonlinearity.linear([1, 2, 3]))(1.0), [2.0, 3.0, 4.0])
    assert Nonlinearity.zero(3).is_zero() and phi.capped(0.0).is_zero()
    with pytest.raises(InvalidInputError):
        cut + phi


@pytest.mark.parametrize("phi", [
    Nonlinearity.zero(2),
    Nonlinearity.linear([1.0, 0.5]),
    Nonlinearity.power([1.0, 2.0], 1.5),
    Nonlinearity.radial_power(2.0, [0.5, 3.0]),
    Nonlinearity.tabulated([0.0, 1.0], [[0.0, 1.0], [0.0, 2.0]]),
])
def test_json_round_trip(phi):
    back = Nonlinearity.from_json(phi.to_json(), 2)
    for t in (0.0, 0.3, 1.7, 5.0):
        np.testing.assert_array_equal(back(t), phi(t))


@given(st.floats(0.1, 3.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_monotone_and_nonnegative(gamma, s, t):
    lo, hi = sorted((s, t))
    for phi in (Nonlinearity.power([1.0, 0.3], gamma), Nonlinearity.radial_power(gamma, [0.7, 4.0])):
        a, b = phi(lo), phi(hi)
        assert np.all(a >= 0) and np.all(b >= a - 1e-12)


@given(st.floats(0.0, 8.0))
def test_compiled_and_python_point_evaluation_agree(t):
    phi = (Nonlinearity.power([1.0, 2.0], 1.5) + Nonlinearity.radial_power(1.0, [0.5, 2.5])).capped(7.0)
    packed = phi.packed()
    for i in range(2):
        a = kernels._phi_at_py(i, t, *packed)
        b = kernels._phi_at_nb(i, t, *packed)
        assert math.isclose(a, b, rel_tol=1e-14, abs_tol=1e-300)
        assert a == pytest.approx(phi(t)[i], rel=1e-14)
