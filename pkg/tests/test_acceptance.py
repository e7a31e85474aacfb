"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

    python3 -m pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

from balayage import radial, verify
from balayage.instances import jump_chain_problem
from balayage.semilinear import P_phi, h0_minorant, harmonic_minorant_search, residual
from balayage.tolerances import DEFAULTS

SEED = 0
INSTANCES = 500


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def worst(records):
    bad = [r for r in records if not r.passed]
    top = max(records, key=lambda r: r.residual / r.threshold)
    return bad, f"{len(records) - len(bad)}/{len(records)} checks, worst {top.check_name} {top.residual:.2e}"


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_criterion_1_discrete_oracles(capsys):
    recs, dt = timed(verify.discrete_oracle_suite, SEED, INSTANCES)
    bad, msg = worst(recs)
    assert len(recs) == 3 * INSTANCES
    assert all(r.threshold == 1e-8 for r in recs)
    report(capsys, 1, not bad and dt < 30, f"{msg}, {dt:.1f} s (limit 30 s)")


def test_criterion_2_hunt_formula(capsys):
    recs = verify.hunt_suite(SEED, INSTANCES, sets=3)
    bad, msg = worst(recs)
    assert len(recs) == 3 * INSTANCES
    report(capsys, 2, not bad and all(r.residual < 1e-10 for r in recs), msg)


def test_criterion_3_domination(capsys):
    recs = verify.domination_suite(SEED, INSTANCES)
    bad, msg = worst(recs)
    report(capsys, 3, len(recs) == INSTANCES and not bad, f"{len(bad)} violations; {msg}")


def test_criterion_4_solver_contract(capsys):
    recs = verify.solver_suite(SEED, INSTANCES)
    bad, msg = worst(recs)
    residuals = [r.residual for r in recs if r.check_name.startswith("residual")]
    agree = [r.residual for r in recs if r.check_name == "paths agree"]
    ok = not bad and max(residuals) < 1e-9 and max(agree) < 1e-9
    report(capsys, 4, ok, f"max residual {max(residuals):.2e}, max path gap {max(agree):.2e}; {msg}")


def test_criterion_5_identity_suite(capsys):
    recs, dt = timed(verify.identity_suite, SEED, 200)
    bad, msg = worst(recs)
    names = {r.check_name for r in recs}
    assert {"T+KT=P", "P(Ph)=Ph", "solvable<=>Ph=h", "T^{phi_A}h>=h-R_h^A",
            "T^phi+T^psi<=I+T^(phi+psi)", "P^(c phi)=P^phi"} <= names
    ok = not bad and all(r.residual < 1e-8 for r in recs) and dt < 60
    report(capsys, 5, ok, f"{msg}, {dt:.1f} s (limit 60 s)")


def test_criterion_6_nonlocal_case(capsys):
    pb = jump_chain_problem()
    U = pb.U.members
    h0 = h0_minorant(pb.P, pb.U, pb.h, pb.exhaustion).h0
    Ph = P_phi(pb)
    sol = harmonic_minorant_search(pb)
    res = residual(pb.Kp, pb.phi, sol.u, sol.g) if sol.found else np.inf
    ok = (np.all(h0 <= Ph + 1e-11) and np.all(Ph <= pb.h + 1e-11) and np.all(h0[U] > 0)
          and sol.found and res < 1e-9)
    report(capsys, 6, bool(ok), f"min h0 on U {h0[U].min():.3f}, P^phi h on U {np.round(Ph[U], 4)}, "
           f"minorant-search residual {res:.2e}")


def test_criterion_7_kernel_identities(capsys):
    recs, dt = timed(verify.kernel_suite)
    bad, msg = worst(recs)
    counts = {c: sum(r.check_name == c for r in recs)
              for c in ("chapman-kolmogorov", "green-from-density", "time-integral")}
    assert counts == {"chapman-kolmogorov": 54, "green-from-density": 10, "time-integral": 5}
    report(capsys, 7, not bad and dt < 20, f"{msg}, {dt:.1f} s (limit 20 s)")


def test_criterion_8_finiteness_dichotomy(capsys):
    triples = verify.finiteness_triples(SEED, 50, 5)
    verdicts = [radial.power_tail_finiteness(d, a, g, c).finite for d, a, g, c in triples]
    matches = sum(v == (c < g - a) for v, (d, a, g, c) in zip(verdicts, triples))
    boundary_divergent = not any(verdicts[:5])
    report(capsys, 8, matches == 50 and boundary_divergent,
           f"{matches}/50 verdicts match, boundary cases divergent: {boundary_divergent}")


def test_criterion_9_solvability_trend(capsys):
    alpha, h = 0.5, 1.0
    radii = (2.0 ** 4, 2.0 ** 6, 2.0 ** 8, 2.0 ** 10)
    t0 = time.perf_counter()
    good = radial.radial_power_trend(1, alpha, alpha + h + 0.5, h, radii)
    bad = radial.radial_power_trend(1, alpha, alpha + h - 0.3, h, radii)
    dt = time.perf_counter() - t0
    solvable_gap = good[-1].gap
    gaps = [p.gap for p in bad]
    nondecreasing = all(b >= a - DEFAULTS["monotone"] for a, b in zip(gaps, gaps[1:]))
    ok = (solvable_gap < 1e-3 and gaps[-1] >= 0.05 and nondecreasing and dt < 120
          and all(p.residual < 1e-9 for p in good + bad))
    report(capsys, 9, ok,
           f"solvable gap at R=2^10 {solvable_gap:.4f} (need < 1e-3); nonsolvable gaps "
           f"{[round(g, 4) for g in gaps]} (need >= 0.05, nondecreasing); {dt:.1f} s")


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_criterion_10_ball_exponent(capsys, alpha):
    flip = radial.ball_exponent_flip(alpha)
    crit = radial.ball_exponent_critical(alpha)
    report(capsys, 10, abs(flip - crit) <= 0.005,
           f"alpha={alpha}: flip {flip:.6f}, expected {crit:.6f}")


def test_criterion_11_lattice_decay(capsys):
    excess = verify.lattice_decay_excess(N=20, a=3.0, rate=0.5)
    report(capsys, 11, excess < 1e-10, f"largest excess of P_t u over e^(-t/2) u: {excess:.2e}")
