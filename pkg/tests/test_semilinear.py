import numpy as np
import pytest
from hypothesis import given, settings

from balayage.errors import InvalidInputError, NonConvergenceError
from balayage.instances import jump_chain_problem, random_problem, rng_for
from balayage.nonlinearity import Nonlinearity
from balayage.potential_ops import SubsetMask
from balayage.semilinear import (Exhaustion, SemilinearProblem, P_phi, T_phi, comparison_suite,
                                 h0_minorant, harmonic_minorant_search, residual,
                                 restricted_lower_bound_violation, solve_fixed, solve_problem,
                                 subadditivity_suite, t_phi_stages, thin_set_condition,
                                 verify_identity_suite)

from conftest import problem_from_seed, seeds


def test_zero_phi_returns_h():
    pb = jump_chain_problem(Nonlinearity.zero(6))
    rep = solve_fixed(pb.Kp, pb.phi, pb.h)
    np.testing.assert_array_equal(rep.u, pb.h)
    assert rep.method == "trivial"


@pytest.mark.parametrize("method", ["auto", "gauss-seidel"])
def test_linear_phi_matches_linear_solve(method):
    rho = np.array([0.3, 1.2, 0.7, 0.0, 2.0, 0.5])
    pb = jump_chain_problem(Nonlinearity.linear(rho))
    rep = solve_fixed(pb.Kp, pb.phi, pb.h, method=method)
    exact = np.linalg.solve(np.eye(6) + pb.Kp.K * (pb.Kp.nu * rho), pb.h)
    np.testing.assert_allclose(rep.u, exact, atol=1e-10)


def test_solution_bounds_and_uniqueness():
    pb = jump_chain_problem()
    a = solve_fixed(pb.Kp, pb.phi, pb.h).u
    b = solve_fixed(pb.Kp, pb.phi, pb.h, method="gauss-seidel").u
    np.testing.assert_allclose(a, b, atol=1e-9)
    assert np.all(a >= -1e-12) and np.all(a <= pb.h + 1e-12)
    # off U the potential vanishes
    np.testing.assert_allclose(a[3:], 1.0)


def test_bad_method_and_non_convergence():
    pb = jump_chain_problem(Nonlinearity.power(np.full(6, 50.0), 3.0))
    with pytest.raises(InvalidInputError):
        solve_fixed(pb.Kp, pb.phi, pb.h, method="newton")
    with pytest.raises(NonConvergenceError) as info:
        solve_fixed(pb.Kp, pb.phi, pb.h, method="gauss-seidel", max_sweeps=1)
    assert info.value.diagnostics["iterations"] >= 1


@given(seeds)
def test_monotone_in_h(seed):
    pb = problem_from_seed(seed)
    rng = np.random.default_rng(seed)
    h2 = pb.h * (1.0 + rng.uniform(0.0, 1.0))
    rep = comparison_suite(pb.Kp, pb.phi, [(pb.h, h2)], psi=pb.phi.scaled(0.5))
    assert rep.passed, rep.checks


@given(seeds)
@settings(max_examples=15)
def test_exhaustion_operators(seed):
    pb = problem_from_seed(seed)
    stages = t_phi_stages(pb)
    for a, b in zip(stages, stages[1:]):
        assert np.all(b <= a + 1e-10)
    T = T_phi(pb)
    T2 = T_phi(pb, phi=pb.phi.scaled(2.0))
    assert np.all(T2 <= T + 1e-10)
    # a finite U makes every solvable h its own harmonic majorant
    np.testing.assert_allclose(P_phi(pb, T=T), pb.h, atol=1e-8)
    assert verify_identity_suite(pb).passed


def test_T_equals_solution_when_cap_inactive():
    pb = jump_chain_problem(Nonlinearity.power(np.full(6, 0.5), 2.0))
    np.testing.assert_allclose(T_phi(pb), solve_fixed(pb.Kp, pb.phi, pb.h).u, atol=1e-10)


def test_thin_set_with_zero_phi_is_empty():
    pb = jump_chain_problem(Nonlinearity.zero(6))
    res = thin_set_condition(pb, pb.h, 0.5)
    assert res.A.indices.size == 0 and res.report.passed


def test_thin_set_grows_with_eta():
    pb = jump_chain_problem(Nonlinearity.power(np.full(6, 4.0), 1.0))
    u = solve_fixed(pb.Kp, pb.phi, pb.h).u
    sets = [thin_set_condition(pb, u, eta) for eta in (0.2, 0.5, 0.9)]
    for small, big in zip(sets, sets[1:]):
        assert small.A <= big.A
    assert all(r.report.passed for r in sets)
    with pytest.raises(InvalidInputError):
        thin_set_condition(pb, u, 1.0)
    with pytest.raises(InvalidInputError):
        thin_set_condition(pb, pb.h, 0.5)


def test_subadditivity_and_a_bound():
    pb = jump_chain_problem()
    assert subadditivity_suite(pb, Nonlinearity.linear(np.ones(6))).passed
    assert restricted_lower_bound_violation(pb, [True, False, True, False, False, False]) < 1e-10


def test_h0_requires_harmonic_h():
    pb = jump_chain_problem()
    res = h0_minorant(pb.P, pb.U, pb.h, pb.exhaustion)
    for a, b in zip(res.sequence, res.sequence[1:]):
        assert np.all(b >= a - 1e-12)
    assert np.all(res.h0 <= pb.h + 1e-12)
    with pytest.raises(InvalidInputError):
        h0_minorant(pb.P, pb.U, np.array([2.0, 1, 1, 1, 1, 1]), pb.exhaustion)


def test_harmonic_minorant_search_with_zero_phi_returns_h():
    pb = jump_chain_problem(Nonlinearity.zero(6))
    res = harmonic_minorant_search(pb)
    assert res.found and res.classification == "solved-problem1"
    np.testing.assert_allclose(res.g, pb.h, atol=1e-8)


def test_solve_problem_classification():
    rep = solve_problem(random_problem(rng_for(4, 0), family="power"))
    assert rep.classification == "solved-problem1"
    assert rep.residual < 1e-10


def test_problem_validation():
    pb = jump_chain_problem()
    with pytest.raises(InvalidInputError, match="vanish identically"):
        pb.with_h(np.array([0.0, 0, 0, 1, 1, 1]))
    with pytest.raises(InvalidInputError):
        pb.with_phi(Nonlinearity.zero(5))
    with pytest.raises(InvalidInputError):
        Exhaustion((SubsetMask.from_indices(6, [0, 1]), SubsetMask.from_indices(6, [0])))
    bad = Exhaustion((SubsetMask.from_indices(6, [0]),))
    with pytest.raises(InvalidInputError, match="union"):
        SemilinearProblem(pb.Kp, pb.phi, pb.h, pb.U, bad, pb.P)


def test_json_round_trip():
    pb = random_problem(rng_for(9, 1))
    back = SemilinearProblem.from_json(pb.to_json())
    np.testing.assert_array_equal(back.Kp.K, pb.Kp.K)
    np.testing.assert_array_equal(back.h, pb.h)
    u = solve_fixed(pb.Kp, pb.phi, pb.h).u
    assert residual(back.Kp, back.phi, u, back.h) < 1e-10
