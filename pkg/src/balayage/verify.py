"""Verification suites producing one record per (instance, check).

Each suite is a pure function of ``(seed, instances, tolerances)``; records
are ordered by instance id so that CSV output is byte-deterministic.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from scipy.optimize import linprog

from . import continuum_kernels as ck
from . import radial
from .instances import jump_chain_problem, random_chain, random_problem, random_subset, rng_for
from .markov_core import (PoissonSemigroupEval, left_translation_chain, poisson_apply,
                          potential_kernel)
from .nonlinearity import Nonlinearity
from .potential_ops import (WeightedPotentialKernel, domination_check, harmonic_kernel,
                            hunt_formula_check, reduced_function)
from .semilinear import (P_phi, T_phi, h0_minorant, harmonic_minorant_search, k_phi,
                         restricted_lower_bound_violation, solve_fixed, subadditivity_suite,
                         verify_identity_suite)
from .tolerances import tolerance_table


@dataclass(frozen=True)
class VerificationRecord:
    instance_id: str
    check_name: str
    residual: float
    threshold: float
    wall_time_ms: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.threshold)


class _Recorder:
    def __init__(self, suite: str):
        self.suite = suite
        self.records: List[VerificationRecord] = []
        self._t = time.perf_counter()

    def add(self, instance, check: str, residual: float, threshold: float):
        now = time.perf_counter()
        self.records.append(VerificationRecord(f"{self.suite}/{instance}", check, float(residual),
                                               float(threshold), 1e3 * (now - self._t)))
        self._t = now


def _sup(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _rel(a, b) -> float:
    return abs(a - b) / abs(b)


# ------------------------------------------------------------- oracles

def neumann_oracle(Q: np.ndarray) -> np.ndarray:
    """``sum_k Q^k`` by repeated squaring: ``prod_j (I + Q^{2^j})``."""
    n = Q.shape[0]
    S = np.eye(n)
    Qp = Q.copy()
    for _ in range(64):
        S = S + Qp @ S
        Qp = Qp @ Qp
        if np.max(np.abs(Qp), initial=0.0) < 1e-18:
            break
    return S


def harmonic_oracle(P: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Minimal exit distribution ``sum_k P_VV^k P_{V,V^c}`` by the Neumann oracle."""
    n = P.shape[0]
    H = np.eye(n)
    vin, vout = np.flatnonzero(V), np.flatnonzero(~V)
    H[vin] = 0.0
    if vin.size and vout.size:
        H[np.ix_(vin, vout)] = neumann_oracle(P[np.ix_(vin, vin)]) @ P[np.ix_(vin, vout)]
    return H


def reduced_lp_oracle(P: np.ndarray, u: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Least supermedian majorant of ``u`` on ``A``: minimise ``sum w`` over
    ``P w <= w``, ``w >= u`` on ``A``, ``w >= 0``."""
    n = P.shape[0]
    rows = [P - np.eye(n)]
    rhs = [np.zeros(n)]
    if A.any():
        rows.append(-np.eye(n)[A])
        rhs.append(-u[A])
    res = linprog(np.ones(n), A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                  bounds=[(0, None)] * n, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return res.x


# -------------------------------------------------------------- suites

def discrete_oracle_suite(seed: int = 0, instances: int = 500, tol=None) -> List[VerificationRecord]:
    t = tolerance_table(tol)
    rec = _Recorder("oracle")
    for i in range(instances):
        rng = rng_for(seed, i, 1)
        P = random_chain(rng)
        A = P.P
        rec.add(i, "potential_kernel", _sup(potential_kernel(P) - neumann_oracle(A)), t["oracle"])
        V = random_subset(rng, P.n, proper=False).members
        rec.add(i, "harmonic_kernel", _sup(harmonic_kernel(P, V).H - harmonic_oracle(A, V)),
                t["oracle"])
        u = rng.uniform(0.0, 2.0, P.n)
        B = random_subset(rng, P.n, proper=False).members
        lp = reduced_lp_oracle(A, u, B)
        rec.add(i, "reduced_function", _sup(reduced_function(P, u, B) - lp) / max(1.0, _sup(lp)),
                t["oracle"])
    return rec.records


def hunt_suite(seed: int = 0, instances: int = 500, sets: int = 3, tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("hunt")
    for i in range(instances):
        rng = rng_for(seed, i, 1)
        P = random_chain(rng)
        for j in range(sets):
            V = random_subset(rng, P.n, proper=False)
            rec.add(f"{i}.{j}", "G_V=K-H_V K", hunt_formula_check(P, V), t["hunt"])
    return rec.records


def domination_suite(seed: int = 0, instances: int = 500, tol=None):
    """Triples ``(f, g, w)`` with ``w = s K q`` supermedian and ``s`` the least
    scale for which ``Kf <= Kg + w`` holds on ``{f > 0}``, so the hypothesis
    is tight; the conclusion is then checked on the whole space."""
    t = tolerance_table(tol)
    rec = _Recorder("domination")
    for i in range(instances):
        rng = rng_for(seed, i, 2)
        P = random_chain(rng)
        n = P.n
        K = potential_kernel(P)
        Kp = WeightedPotentialKernel(K, np.ones(n), P=P.P)
        f = rng.uniform(0, 1, n) * (rng.random(n) < 0.5)
        g = rng.uniform(0, 1, n) * (rng.random(n) < 0.7)
        base = K @ rng.uniform(0.1, 1.0, n)
        pos = f > 0
        scale = max(0.0, float(np.max(((K @ f - K @ g) / base)[pos], initial=0.0)))
        w = scale * base * (1.0 + 1e-12)
        verdict = domination_check(Kp, f, g, w)
        violation = max(0.0, float(np.max(K @ f - K @ g - w, initial=0.0)))
        if not verdict.confirmed:
            violation = max(violation, t["domination"])
        rec.add(i, "Kf<=Kg+w everywhere", violation, t["domination"])
    return rec.records


def solver_suite(seed: int = 0, instances: int = 200, tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("solver")
    for i in range(instances):
        pb = random_problem(rng_for(seed, i, 3))
        a = solve_fixed(pb.Kp, pb.phi, pb.h)
        b = solve_fixed(pb.Kp, pb.phi, pb.h, method="gauss-seidel")
        rec.add(i, "residual(auto)", _residual(pb, a.u, pb.h), t["residual"])
        rec.add(i, "residual(gauss-seidel)", _residual(pb, b.u, pb.h), t["residual"])
        rec.add(i, "paths agree", _sup(a.u - b.u), t["uniqueness"])
        rec.add(i, "0<=u<=h", max(0.0, -float(a.u.min()), float(np.max(a.u - pb.h))),
                t["monotone"])
    return rec.records


def _residual(pb, u, target) -> float:
    # recomputed from the raw arrays, independent of the solver's own bookkeeping
    return _sup(u + pb.Kp.K @ (pb.Kp.nu * pb.phi(u)) - target)


def identity_suite(seed: int = 0, instances: int = 200, tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("identity")
    for i in range(instances):
        rng = rng_for(seed, i, 4)
        pb = random_problem(rng)
        rep = verify_identity_suite(pb)
        for name, (value, _) in rep.checks.items():
            rec.add(i, name, value, t["identity"])
        A = random_subset(rng, pb.n, proper=False).members & pb.U.members
        rec.add(i, "T^{phi_A}h>=h-R_h^A", restricted_lower_bound_violation(pb, A), t["identity"])
        psi = Nonlinearity.power(rng.uniform(0.2, 2.0, pb.n), float(rng.uniform(0.5, 3.0)))
        sub = subadditivity_suite(pb, psi)
        for name, (value, _) in sub.checks.items():
            rec.add(i, name, value, t["identity"])
    return rec.records


def nonlocal_suite(tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("nonlocal")
    pb = jump_chain_problem()
    U = pb.U.members
    h0 = h0_minorant(pb.P, pb.U, pb.h, pb.exhaustion).h0
    Ph = P_phi(pb)
    rec.add("jump", "h0<=P^phi h", max(0.0, float(np.max(h0 - Ph))), t["monotone"])
    rec.add("jump", "P^phi h<=h", max(0.0, float(np.max(Ph - pb.h))), t["monotone"])
    rec.add("jump", "h0>0 on U", 1.0 if np.min(h0[U]) <= 0 else 0.0, 0.5)
    T = T_phi(pb)
    rec.add("jump", "T+K^phi T=P^phi h", _sup(T + k_phi(pb.Kp, pb.phi, T) - Ph), t["h0_residual"])
    res = harmonic_minorant_search(pb)
    rec.add("jump", "minorant-search residual", res.residual if res.found else math.inf,
            t["h0_residual"])
    rec.add("jump", "h0<=g<=h", max(0.0, float(np.max(h0 - res.g)), float(np.max(res.g - pb.h)))
            if res.found else math.inf, t["monotone"])
    return rec.records


def kernel_suite(tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("kernels")
    grid = list(itertools.product((0.5, 1.0, 2.0), (0.5, 1.5, 3.0), (0.0, 1.0, 3.0)))
    for kind, d in (("gaussian", 2), ("cauchy", 1)):
        for s, tt, r in grid:
            x = np.zeros(d)
            y = np.zeros(d)
            y[0] = r
            exact = ck.density_eval(kind, d, s + tt, x, y)
            res = ck.chapman_kolmogorov_residual(kind, d, s, tt, x, y) / exact
            rec.add(f"{kind}-d{d}-s{s}-t{tt}-r{r}", "chapman-kolmogorov", res,
                    t["chapman_kolmogorov"])
    for kind, d in (("gaussian", 3), ("cauchy", 2)):
        spec = ck.matching_spec(kind, d)
        for r in (0.25, 0.5, 1.0, 2.0, 4.0):
            x, y = np.zeros(d), np.zeros(d)
            y[0] = r
            res = _rel(ck.green_from_density(kind, d, x, y), ck.green_eval(spec, x, y))
            rec.add(f"{kind}-d{d}-r{r}", "green-from-density", res, t["green_density"])
    spec = ck.GreenKernelSpec("newtonian", 3)
    for r in (0.25, 0.5, 1.0, 2.0, 4.0):
        x, y = np.zeros(3), np.array([r, 0.0, 0.0])
        res = _rel(ck.spacetime_time_integral(3, x, y), ck.green_eval(spec, x, y))
        rec.add(f"spacetime-d3-r{r}", "time-integral", res, t["time_integral"])
    return rec.records


def finiteness_triples(seed: int = 0, count: int = 50, boundary: int = 5):
    """``(d, alpha, gamma, c)`` triples; the first ``boundary`` sit on ``c = gamma - alpha``."""
    rng = rng_for(seed, 0, 5)
    out = []
    for k in range(count):
        d = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.1, min(2.0, d) - 0.05))
        c = float(rng.uniform(0.0, 2.0))
        if k < boundary:
            gamma = alpha + c
            c = gamma - alpha  # exact boundary in floating point
        else:
            margin = float(rng.uniform(0.05, 1.5)) * (1 if rng.random() < 0.5 else -1)
            gamma = alpha + c + margin
        out.append((d, alpha, gamma, c))
    return out


def finiteness_suite(seed: int = 0, count: int = 50, boundary: int = 5, tol=None):
    rec = _Recorder("finiteness")
    for k, (d, alpha, gamma, c) in enumerate(finiteness_triples(seed, count, boundary)):
        verdict = radial.power_tail_finiteness(d, alpha, gamma, c).finite
        rec.add(f"{k}-d{d}-a{alpha:.4f}-g{gamma:.4f}-c{c:.4f}", "verdict matches c<gamma-alpha",
                0.0 if verdict == (c < gamma - alpha) else 1.0, 0.5)
    return rec.records


def trend_suite(alpha: float = 0.5, h: float = 1.0, radii=(2.0 ** 4, 2.0 ** 6, 2.0 ** 8, 2.0 ** 10),
                tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("trend")
    good = radial.radial_power_trend(1, alpha, alpha + h + 0.5, h, radii)
    bad = radial.radial_power_trend(1, alpha, alpha + h - 0.3, h, radii)
    for pt in good + bad:
        rec.add(f"R{int(pt.R)}", "residual", pt.residual, t["residual"])
    rec.add("solvable", "gap at largest R", good[-1].gap, t["solvable_gap"])
    rec.add("solvable", "u bounded away from 0", 1.0 if min(p.min_u for p in good) <= 0 else 0.0,
            0.5)
    rec.add("nonsolvable", "gap >= delta at largest R", max(0.0, t["nonsolvable_gap"] - bad[-1].gap),
            1e-12)
    drops = [max(0.0, a.gap - b.gap) for a, b in zip(bad, bad[1:])]
    rec.add("nonsolvable", "gap nondecreasing in R", max(drops), t["monotone"])
    return rec.records


def ball_flip_suite(tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("ball")
    for alpha in (0.5, 1.0, 1.5):
        flip = radial.ball_exponent_flip(alpha)
        rec.add(f"alpha{alpha}", "flip at (1+a/2)/(1-a/2)",
                abs(flip - radial.ball_exponent_critical(alpha)), t["ball_flip"])
    return rec.records


def lattice_decay_excess(N: int = 20, a: float = 3.0, rate: float = 0.5,
                         times=(0.1, 0.5, 1.0, 2.0, 5.0), margin: int = 2) -> float:
    """Largest relative excess of ``P_t u`` over ``e^{-rate t} u`` for ``u(m) = a^m``.

    The chain walks left on ``{-N, ..., N}`` and dies at ``-N``; states within
    ``margin`` of either end are excluded.
    """
    P = left_translation_chain(N)
    sg = PoissonSemigroupEval(P)
    m = np.arange(-N, N + 1)
    u = a ** m.astype(float)
    keep = (m >= -N + margin) & (m <= N - margin)
    worst = 0.0
    for tt in times:
        excess = (poisson_apply(sg, tt, u) - math.exp(-rate * tt) * u) / u
        worst = max(worst, float(np.max(excess[keep])))
    return max(0.0, worst)


def lattice_suite(tol=None):
    t = tolerance_table(tol)
    rec = _Recorder("lattice")
    rec.add("N20-a3", "P_t u<=e^{-t/2}u", lattice_decay_excess(), t["lattice_decay"])
    return rec.records


SUITES: Dict[str, Callable] = {
    "oracle": lambda seed, k, tol: discrete_oracle_suite(seed, k, tol),
    "hunt": lambda seed, k, tol: hunt_suite(seed, k, tol=tol),
    "domination": lambda seed, k, tol: domination_suite(seed, k, tol),
    "solver": lambda seed, k, tol: solver_suite(seed, k, tol),
    "identity": lambda seed, k, tol: identity_suite(seed, max(1, (2 * k) // 5), tol),
    "nonlocal": lambda seed, k, tol: nonlocal_suite(tol),
    "kernels": lambda seed, k, tol: kernel_suite(tol),
    "finiteness": lambda seed, k, tol: finiteness_suite(seed, tol=tol),
    "trend": lambda seed, k, tol: trend_suite(tol=tol),
    "ball": lambda seed, k, tol: ball_flip_suite(tol),
    "lattice": lambda seed, k, tol: lattice_suite(tol),
}


def run_all(seed: int = 0, instances: int = 500, tol=None,
            suites: Optional[Iterable[str]] = None) -> List[VerificationRecord]:
    names = list(suites) if suites is not None else list(SUITES)
    out = []
    for name in names:
        out.extend(SUITES[name](seed, instances, tol))
    return out


def records_to_csv(records: Iterable[VerificationRecord], timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["instance_id", "check_name", "residual", "threshold", "pass"]
    w.writerow(head + (["wall_time_ms"] if timings else []))
    for r in records:
        row = [r.instance_id, r.check_name, repr(r.residual), repr(r.threshold),
               "1" if r.passed else "0"]
        w.writerow(row + ([f"{r.wall_time_ms:.3f}"] if timings else []))
    return buf.getvalue()


def summarize(records: List[VerificationRecord]) -> str:
    by_suite: Dict[str, List[VerificationRecord]] = {}
    for r in records:
        by_suite.setdefault(r.instance_id.split("/", 1)[0], []).append(r)
    lines = []
    for suite, recs in by_suite.items():
        bad = [r for r in recs if not r.passed]
        worst = max(recs, key=lambda r: r.residual / r.threshold)
        lines.append(f"{suite:<11} {len(recs) - len(bad):>5}/{len(recs):<5} "
                     f"{'PASS' if not bad else 'FAIL'}  worst {worst.check_name}: "
                     f"{worst.residual:.3e} (threshold {worst.threshold:.1e})")
        for r in bad[:5]:
            lines.append(f"    failed {r.instance_id} {r.check_name}: {r.residual:.3e} "
                         f">= {r.threshold:.1e}")
    return "\n".join(lines)
