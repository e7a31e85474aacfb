"""Solver and structural checks for ``u + K^phi u = h``.

``K^phi f = K(nu * phi(., f|_U))`` with ``K`` the (weighted) potential kernel
of the restriction to ``U``.  The inner solve is constructive: an
alternating-envelope iteration, backed by a nonlinear Gauss-Seidel sweep on
the generator form ``A u + nu phi(u) = A h`` (``A = K^-1`` on the support),
whose coordinate equations are solved by bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (InternalConsistencyError, InvalidInputError, NonConvergenceError,
                     VerificationFailure)
from .markov_core import SubMarkovKernel, as_values
from .nonlinearity import Nonlinearity, truncate_phi
from .potential_ops import (SubsetMask, WeightedPotentialKernel, harmonic_kernel,
                            killed_kernel, killed_potential_kernel, reduced_function)

SOLVE_TOL = 1e-10
SANDWICH_MAX = 20_000
SANDWICH_STALL_WINDOW = 200
GS_MAX_SWEEPS = 100_000
GS_TOL = 1e-13
BISECT_TOL = 1e-15
GS_REFINEMENTS = 4
MONOTONE_TOL = 1e-11
ETA_STEPS = 20
ETA_CONVERGED = 1e-9


@dataclass(frozen=True, eq=False)
class Exhaustion:
    """Increasing sequence ``V_1 <= V_2 <= ... <= V_m``."""

    sets: tuple

    def __post_init__(self):
        sets = tuple(s if isinstance(s, SubsetMask) else SubsetMask(s) for s in self.sets)
        if not sets:
            raise InvalidInputError("exhaustion needs at least one set")
        for a, b in zip(sets, sets[1:]):
            if a.n != b.n or not a <= b:
                raise InvalidInputError("exhaustion sets must increase")
        object.__setattr__(self, "sets", sets)

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    @property
    def union(self) -> SubsetMask:
        return self.sets[-1]

    @classmethod
    def nested(cls, order: Sequence[int], n: int, steps: int) -> "Exhaustion":
        """Grow along ``order`` in ``steps`` roughly equal increments."""
        order = list(order)
        cuts = np.linspace(0, len(order), steps + 1)[1:].round().astype(int)
        return cls(tuple(SubsetMask.from_indices(n, order[:max(c, 1)]) for c in cuts))

    def to_json(self) -> list:
        return [s.indices.tolist() for s in self.sets]


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    Kp: WeightedPotentialKernel
    phi: Nonlinearity
    h: np.ndarray
    U: SubsetMask
    exhaustion: Exhaustion
    P: Optional[SubMarkovKernel] = None
    label: str = ""

    def __post_init__(self):
        n = self.Kp.n
        h = as_values(self.h, n, nonnegative=True, name="h")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if self.phi.n != n:
            raise InvalidInputError("phi and K act on different state counts")
        U = self.U.members
        if U.size != n:
            raise InvalidInputError("U has the wrong length")
        off = ~U
        if np.any(self.Kp.K[off]) or np.any(self.Kp.K[:, off]):
            raise InvalidInputError("K must vanish off U")
        if not np.any(h[U] > 0):
            raise InvalidInputError("h must not vanish identically on U")
        if not np.array_equal(self.exhaustion.union.members, U):
            raise InvalidInputError("exhaustion must have union U")

    @property
    def n(self) -> int:
        return self.Kp.n

    def with_h(self, h) -> "SemilinearProblem":
        return SemilinearProblem(self.Kp, self.phi, h, self.U, self.exhaustion, self.P, self.label)

    def with_phi(self, phi: Nonlinearity) -> "SemilinearProblem":
        return SemilinearProblem(self.Kp, phi, self.h, self.U, self.exhaustion, self.P, self.label)

    def harmonic(self, V) -> Optional[np.ndarray]:
        if self.P is None:
            return None
        return harmonic_kernel(self.P, V).H

    def to_json(self) -> dict:
        doc = {
            "U": self.U.to_json(),
            "exhaustion": self.exhaustion.to_json(),
            "phi": self.phi.to_json(),
            "h": self.h.tolist(),
            "nu": self.Kp.nu.tolist(),
            "label": self.label,
        }
        if self.P is not None:
            doc["kernel"] = self.P.to_json()
        return doc

    @classmethod
    def from_chain(cls, P, U, phi: Nonlinearity, h, exhaustion: Exhaustion, nu=None,
                   label: str = "") -> "SemilinearProblem":
        kern = P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)
        m = U.members if isinstance(U, SubsetMask) else np.asarray(U, dtype=bool)
        nu = np.ones(kern.n) if nu is None else nu
        Kp = killed_potential_kernel(kern, m, nu)
        return cls(Kp, phi, h, SubsetMask(m), exhaustion, kern, label)

    @classmethod
    def from_json(cls, doc) -> "SemilinearProblem":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            kern = SubMarkovKernel.from_json(doc["kernel"])
            n = kern.n
            U = SubsetMask.from_json(n, doc["U"])
            ex = Exhaustion(tuple(SubsetMask.from_json(n, s) for s in doc["exhaustion"]))
            phi = Nonlinearity.from_json(doc["phi"], n)
            h = doc["h"]
        except KeyError as exc:
            raise InvalidInputError(f"problem document is missing {exc}") from None
        return cls.from_chain(kern, U, phi, h, ex, nu=doc.get("nu"), label=doc.get("label", ""))


@dataclass(eq=False)
class SolveReport:
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool
    method: str = ""
    P_phi_h: Optional[np.ndarray] = None
    classification: str = "solved-problem1"
    details: dict = field(default_factory=dict)


def k_phi(Kp: WeightedPotentialKernel, phi: Nonlinearity, f) -> np.ndarray:
    """``K^phi f = K(nu * phi(., f))``."""
    return Kp.apply(phi(f))


def residual(Kp: WeightedPotentialKernel, phi: Nonlinearity, u, target) -> float:
    u = np.asarray(u, dtype=float)
    r = u + k_phi(Kp, phi, u) - np.asarray(target, dtype=float)
    return float(np.max(np.abs(r))) if r.size else 0.0


# ---------------------------------------------------------------- solver

def _sandwich(Kp, phi, h, tol, max_iter):
    upper = h.copy()
    lower = h - k_phi(Kp, phi, upper)
    history = []
    gap = float(np.max(upper - lower)) if h.size else 0.0
    for it in range(1, max_iter + 1):
        if gap <= tol:
            return upper, lower, it - 1, True
        new_upper = np.minimum(upper, h - k_phi(Kp, phi, lower))
        new_lower = np.maximum(lower, h - k_phi(Kp, phi, new_upper))
        upper, lower = new_upper, new_lower
        gap = float(np.max(upper - lower))
        history.append(gap)
        if len(history) > SANDWICH_STALL_WINDOW:
            past = history[-SANDWICH_STALL_WINDOW - 1]
            if gap > 0.99 * past:
                return upper, lower, it, False
    return upper, lower, max_iter, gap <= tol


def _gauss_seidel(Kp, phi, h, start, max_sweeps, tol=SOLVE_TOL):
    """Sweep until the step size drops below ``GS_TOL``; if the recomputed
    residual is still above ``tol`` (slow contraction for steep ``phi``), sweep
    on with a step threshold a thousand times smaller."""
    idx, A = Kp.generator_on_support()
    if idx.size == 0:
        return h.copy(), 0, True
    A = np.ascontiguousarray(A)
    b = A @ h[idx]
    nu = np.ascontiguousarray(Kp.nu[idx])
    packed = phi.packed(idx)
    scale = max(1.0, float(np.max(np.abs(h[idx]))))
    u = h.copy()
    u[idx] = start[idx]
    total = 0
    step = GS_TOL
    for _ in range(GS_REFINEMENTS):
        sol, sweeps, ok = kernels.gauss_seidel(A, b, nu, np.ascontiguousarray(u[idx]), packed,
                                               step * scale, max_sweeps - total, BISECT_TOL)
        u[idx] = sol
        total += sweeps
        if not ok or residual(Kp, phi, u, h) < tol:
            break
        step *= 1e-3
    return u, total, ok


def solve_fixed(Kp: WeightedPotentialKernel, phi: Nonlinearity, h, method: str = "auto",
                tol: float = SOLVE_TOL, max_sweeps: int = GS_MAX_SWEEPS) -> SolveReport:
    """Solve ``u + K^phi u = h`` for ``u``.

    ``method="auto"`` runs the alternating envelopes ``u_{k+1} = h - K^phi u_k``
    (even iterates decrease, odd ones increase, both bracket the solution)
    and hands over to Gauss-Seidel if the gap between them stops shrinking.
    ``method="gauss-seidel"`` runs Gauss-Seidel from ``u = 0``.
    """
    h = as_values(h, Kp.n, nonnegative=True, name="h")
    if phi.is_zero():
        return SolveReport(h.copy(), 0.0, 0, True, "trivial")
    scale = max(1.0, float(np.max(h)) if h.size else 1.0)
    if method == "auto":
        upper, lower, its, ok = _sandwich(Kp, phi, h, 1e-13 * scale, SANDWICH_MAX)
        u = 0.5 * (upper + lower)
        used = "sandwich"
        if ok:
            res = residual(Kp, phi, u, h)
            if res < tol:
                return SolveReport(u, res, its, True, used,
                                   details={"gap": float(np.max(upper - lower))})
        u, sweeps, ok = _gauss_seidel(Kp, phi, h, u, max_sweeps, tol)
        its += sweeps
        used = "sandwich+gauss-seidel"
    elif method == "gauss-seidel":
        u, its, ok = _gauss_seidel(Kp, phi, h, np.zeros_like(h), max_sweeps, tol)
        used = "gauss-seidel"
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    res = residual(Kp, phi, u, h)
    if res >= tol:
        raise NonConvergenceError(
            f"solver stalled: residual {res:.3e} after {its} iterations ({used})",
            {"residual": res, "iterations": its, "method": used})
    return SolveReport(u, res, its, bool(ok), used)


# ------------------------------------------------------------ T and P

def t_phi_stages(problem: SemilinearProblem, h=None, phi: Optional[Nonlinearity] = None):
    """Solutions ``u_n`` of ``u_n + K^{phi_n} u_n = h`` along the exhaustion.

    Stage ``n`` uses ``phi_n = min(phi, n) 1_{V_n}``.  Once the exhaustion
    has stabilised the cap keeps growing; if it still binds after the last
    set, one more stage with the cap removed realises the limit.
    """
    h = problem.h if h is None else as_values(h, problem.n, nonnegative=True, name="h")
    phi = problem.phi if phi is None else phi
    stages = []
    prev = None
    sets = list(problem.exhaustion)
    for n, V in enumerate(sets, start=1):
        rep = solve_fixed(problem.Kp, truncate_phi(phi, V, n), h)
        if prev is not None and np.any(rep.u > prev + MONOTONE_TOL * max(1.0, float(h.max()))):
            raise InternalConsistencyError(f"T-phi sequence increased at stage {n}")
        stages.append(rep.u)
        prev = rep.u
    last = sets[-1]
    top = phi.restricted(last)(h)
    if np.max(top, initial=0.0) > len(sets):
        rep = solve_fixed(problem.Kp, phi.restricted(last), h)
        if np.any(rep.u > prev + MONOTONE_TOL * max(1.0, float(h.max()))):
            raise InternalConsistencyError("T-phi sequence increased at the uncapped stage")
        stages.append(rep.u)
    return stages


def T_phi(problem: SemilinearProblem, h=None, phi: Optional[Nonlinearity] = None) -> np.ndarray:
    """``T^phi h = inf_n u_n``."""
    return np.minimum.reduce(t_phi_stages(problem, h, phi))


def _majorant_sequence(problem: SemilinearProblem, T: np.ndarray, phi: Nonlinearity):
    seq = []
    for V in problem.exhaustion:
        H = problem.harmonic(V)
        if H is not None:
            seq.append(H @ T)
        else:
            # harmonic on V_m: T + K(1_{V_m} phi(T)), increasing to P^phi h
            seq.append(T + k_phi(problem.Kp, phi.restricted(V), T))
    return seq


def P_phi(problem: SemilinearProblem, h=None, phi: Optional[Nonlinearity] = None,
          T: Optional[np.ndarray] = None) -> np.ndarray:
    """``P^phi h = sup_n H_{V_n} T^phi h``, the least harmonic majorant of ``T^phi h``.

    Without harmonic kernels (continuum problems) the increasing functions
    ``T + K(1_{V_n} phi(., T))``, harmonic on ``V_n``, are used instead.
    """
    h = problem.h if h is None else as_values(h, problem.n, nonnegative=True, name="h")
    phi = problem.phi if phi is None else phi
    if T is None:
        T = T_phi(problem, h, phi)
    seq = _majorant_sequence(problem, T, phi)
    scale = max(1.0, float(h.max()))
    for a, b in zip(seq, seq[1:]):
        if np.any(b < a - MONOTONE_TOL * scale):
            raise InternalConsistencyError("harmonic majorant sequence is not increasing")
    out = np.maximum.reduce(seq)
    if np.any(out > h + MONOTONE_TOL * scale):
        raise InternalConsistencyError("P-phi h exceeds h")
    return out


# ----------------------------------------------------------- check suites

@dataclass(eq=False)
class CheckReport:
    """Named residual checks; a check passes when ``residual < threshold``."""

    name: str
    checks: Dict[str, tuple] = field(default_factory=dict)

    def add(self, check: str, value: float, threshold: float):
        self.checks[check] = (float(value), float(threshold))

    def add_bool(self, check: str, ok: bool):
        self.checks[check] = (0.0 if ok else 1.0, 0.5)

    @property
    def passed(self) -> bool:
        return all(v < t for v, t in self.checks.values())

    def failures(self) -> List[str]:
        return [k for k, (v, t) in self.checks.items() if not v < t]

    def merge(self, other: "CheckReport", prefix: str = "") -> "CheckReport":
        for k, v in other.checks.items():
            self.checks[prefix + k] = v
        return self


def _sup(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def verify_identity_suite(problem: SemilinearProblem, raise_on_failure: bool = False) -> CheckReport:
    rep = CheckReport("identity")
    h = problem.h
    T = T_phi(problem)
    Ph = P_phi(problem, T=T)
    rep.add("T+KT=P", _sup(T + k_phi(problem.Kp, problem.phi, T) - Ph), 1e-9)
    PPh = P_phi(problem, h=Ph)
    rep.add("P(Ph)=Ph", _sup(PPh - Ph), 1e-9)
    try:
        sol = solve_fixed(problem.Kp, problem.phi, h)
        solvable = sol.residual < 1e-10
    except NonConvergenceError:
        solvable = False
    rep.add_bool("solvable<=>Ph=h", solvable == (_sup(Ph - h) < 1e-8))
    if raise_on_failure and not rep.passed:
        raise VerificationFailure(f"identity checks failed: {rep.failures()}",
                                  json.dumps(problem.to_json()))
    return rep


@dataclass(eq=False)
class ThinSetResult:
    A: SubsetMask
    report: CheckReport
    reduced: Optional[np.ndarray] = None


def thin_set_condition(problem: SemilinearProblem, u, eta: float, s=None) -> ThinSetResult:
    """Build ``A = {u < eta s}`` and check the two thinness bounds on it.

    ``K^{phi_{U\\A}}(eta s) <= s`` and ``R_s^A`` (reduction for the chain killed
    off ``U``) is a potential: its harmonic part along the exhaustion is 0.
    """
    if not 0 < eta < 1:
        raise InvalidInputError("eta must lie in (0, 1)")
    s = problem.h if s is None else as_values(s, problem.n, nonnegative=True, name="s")
    u = as_values(u, problem.n, name="u")
    if residual(problem.Kp, problem.phi, u, s) >= 1e-9:
        raise InvalidInputError("u does not solve u + K^phi u = s")
    U = problem.U.members
    A = SubsetMask(U & (u < eta * s))
    rep = CheckReport("thin-set")
    outside = SubsetMask(U & ~A.members)
    bound = k_phi(problem.Kp, problem.phi.restricted(outside), eta * s)
    rep.add("K^{phi_U\\A}(eta s)<=s", max(0.0, float(np.max(bound - s, initial=0.0))), 1e-10)
    reduced = None
    if problem.P is not None:
        Q = killed_kernel(problem.P, U)
        reduced = reduced_function(Q, np.where(U, s, 0.0), A)
        harmonic_part = 0.0
        for V in problem.exhaustion:
            harmonic_part = _sup((harmonic_kernel(Q, V).H @ reduced)[U])
        rep.add("R_s^A potential", harmonic_part, 1e-10)
        q = k_phi(problem.Kp, problem.phi, u)
        rep.add("R_s^A<=q/(1-eta)", max(0.0, float(np.max(reduced - q / (1 - eta), initial=0.0))),
                1e-9)
    return ThinSetResult(A, rep, reduced)


def comparison_suite(Kp: WeightedPotentialKernel, phi: Nonlinearity, pairs,
                     psi: Optional[Nonlinearity] = None) -> CheckReport:
    """Sandwich ``0 <= u2 - u1 <= h2 - h1`` per pair; ``u_phi <= u_psi`` when ``psi <= phi``."""
    rep = CheckReport("comparison")
    lo_viol = hi_viol = order_viol = 0.0
    for h1, h2 in pairs:
        u1 = solve_fixed(Kp, phi, h1).u
        u2 = solve_fixed(Kp, phi, h2).u
        d = u2 - u1
        lo_viol = max(lo_viol, float(np.max(-d, initial=0.0)))
        hi_viol = max(hi_viol, float(np.max(d - (np.asarray(h2) - np.asarray(h1)), initial=0.0)))
        if psi is not None:
            for hh in (h1, h2):
                uphi = solve_fixed(Kp, phi, hh).u
                upsi = solve_fixed(Kp, psi, hh).u
                order_viol = max(order_viol, float(np.max(uphi - upsi, initial=0.0)))
    rep.add("u2-u1>=0", lo_viol, 1e-10)
    rep.add("u2-u1<=h2-h1", hi_viol, 1e-10)
    if psi is not None:
        rep.add("u_phi<=u_psi", order_viol, 1e-10)
    return rep


def subadditivity_suite(problem: SemilinearProblem, psi: Nonlinearity,
                        scales=(0.5, 2.0, 10.0)) -> CheckReport:
    rep = CheckReport("subadditivity")
    h = problem.h
    Tphi = T_phi(problem)
    Tpsi = T_phi(problem, phi=psi)
    Tsum = T_phi(problem, phi=problem.phi + psi)
    rep.add("T^phi+T^psi<=I+T^(phi+psi)",
            max(0.0, float(np.max(Tphi + Tpsi - h - Tsum, initial=0.0))), 1e-9)
    Ph = P_phi(problem, T=Tphi)
    worst = 0.0
    for c in scales:
        worst = max(worst, _sup(P_phi(problem, phi=problem.phi.scaled(c)) - Ph))
    rep.add("P^(c phi)=P^phi", worst, 1e-8)
    return rep


def restricted_lower_bound_violation(problem: SemilinearProblem, A) -> float:
    """Violation of ``T^{phi_A} h >= h - R_h^A`` (0 when the bound holds)."""
    if problem.P is None:
        raise InvalidInputError("the reduction needs the underlying chain")
    U = problem.U.members
    A = A.members if isinstance(A, SubsetMask) else np.asarray(A, dtype=bool)
    A = A & U
    Q = killed_kernel(problem.P, U)
    R = reduced_function(Q, np.where(U, problem.h, 0.0), A)
    T = T_phi(problem, phi=problem.phi.restricted(A))
    gap = (problem.h - R) - T
    return max(0.0, float(np.max(gap[U], initial=0.0)))


# ------------------------------------------------ nonlocal case and harmonic minorant search

@dataclass(eq=False)
class H0Result:
    h0: np.ndarray
    sequence: List[np.ndarray]
    equals_h: bool


def is_harmonic_on(P, h, exhaustion: Exhaustion, tol: float = 1e-10) -> bool:
    h = np.asarray(h, dtype=float)
    return all(_sup(harmonic_kernel(P, V).H @ h - h) < tol * max(1.0, _sup(h))
               for V in exhaustion)


def h0_minorant(P, U, h, exhaustion: Exhaustion) -> H0Result:
    """``h_0 = lim_n H_{V_n}(1_{U^c} h)``, an increasing limit."""
    kern = P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)
    m = U.members if isinstance(U, SubsetMask) else np.asarray(U, dtype=bool)
    h = as_values(h, kern.n, nonnegative=True, name="h")
    if not is_harmonic_on(kern, h, exhaustion):
        raise InvalidInputError("h is not harmonic on U")
    u0 = np.where(m, 0.0, h)
    seq = [harmonic_kernel(kern, V).H @ u0 for V in exhaustion]
    for a, b in zip(seq, seq[1:]):
        if np.any(b < a - MONOTONE_TOL * max(1.0, _sup(h))):
            raise InternalConsistencyError("H_{V_n}(1_{U^c} h) is not increasing")
    h0 = seq[-1]
    return H0Result(h0, seq, _sup(h0 - h) < 1e-9)


@dataclass(eq=False)
class MinorantSearchResult:
    g: Optional[np.ndarray]
    u: Optional[np.ndarray]
    residual: float
    classification: str
    etas: List[float] = field(default_factory=list)
    g_sequence: List[np.ndarray] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.g is not None


def harmonic_minorant_search(problem: SemilinearProblem,
                             steps: int = ETA_STEPS) -> MinorantSearchResult:
    """Increasing limit ``g = lim P^phi(eta_k h)`` over ``eta_k = 1 - 2^-k``.

    When the last two terms still differ by more than ``1e-9`` the limit is
    estimated by the dyadic Richardson step ``2 g_K - g_{K-1}`` (exact for
    ``g`` affine in ``eta``) and clipped into ``[g_K, h]``.  The returned ``g``
    is certified by an explicit solve of ``u + K^phi u = g``.
    """
    h = problem.h
    U = problem.U.members
    etas, gs = [], []
    for k in range(1, steps + 1):
        eta = 1.0 - 2.0 ** -k
        g = P_phi(problem, h=eta * h)
        if gs and np.any(g < gs[-1] - MONOTONE_TOL * max(1.0, _sup(h))):
            raise InternalConsistencyError("P^phi(eta h) is not increasing in eta")
        etas.append(eta)
        gs.append(g)
        if len(gs) > 1 and _sup(gs[-1] - gs[-2]) < ETA_CONVERGED:
            break
    g = gs[-1]
    if len(gs) > 1 and _sup(gs[-1] - gs[-2]) >= ETA_CONVERGED:
        g = np.clip(2.0 * gs[-1] - gs[-2], gs[-1], h)
    if not np.any(g[U] > 0):
        return MinorantSearchResult(None, None, math.inf, "no-solution-evidence", etas, gs)
    try:
        sol = solve_fixed(problem.Kp, problem.phi, g)
    except NonConvergenceError:
        return MinorantSearchResult(g, None, math.inf, "no-solution-evidence", etas, gs)
    cls = "solved-problem1" if _sup(g - h) < 1e-8 else "solved-problem2"
    return MinorantSearchResult(g, sol.u, sol.residual, cls, etas, gs)


def solve_problem(problem: SemilinearProblem) -> SolveReport:
    """Solve with ``h`` and classify via ``P^phi h``."""
    rep = solve_fixed(problem.Kp, problem.phi, problem.h)
    Ph = P_phi(problem)
    rep.P_phi_h = Ph
    if _sup(Ph - problem.h) < 1e-8:
        rep.classification = "solved-problem1"
    elif np.any(Ph[problem.U.members] > 0):
        rep.classification = "solved-problem2(g)"
    else:
        rep.classification = "no-solution-evidence"
    return rep
