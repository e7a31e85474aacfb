"""Harmonic kernels, reductions and Green functions of finite chains.

In the discrete topology every subset is (finely) open, so lower
semicontinuous regularisation is the identity and ``R_hat = R`` throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import InvalidInputError, NotTransientError, NumericalFailureError
from .markov_core import (SubMarkovKernel, as_values, is_supermedian, is_transient,
                          potential_kernel)

REDUCTION_TOL = 1e-13
REDUCTION_MAX_SWEEPS = 1_000_000
MC_STEP_CAP = 1_000_000
MC_BLOCK = 1 << 16


@dataclass(frozen=True, eq=False)
class SubsetMask:
    members: np.ndarray

    def __post_init__(self):
        m = np.array(self.members, dtype=bool).reshape(-1)
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    @property
    def n(self) -> int:
        return self.members.size

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    @classmethod
    def from_indices(cls, n: int, idx) -> "SubsetMask":
        m = np.zeros(n, dtype=bool)
        idx = np.asarray(list(idx), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InvalidInputError(f"subset indices out of range for n={n}")
        m[idx] = True
        return cls(m)

    @classmethod
    def full(cls, n: int) -> "SubsetMask":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> "SubsetMask":
        return cls(np.zeros(n, dtype=bool))

    @classmethod
    def from_json(cls, n: int, doc) -> "SubsetMask":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if isinstance(doc, dict):
            doc = doc.get("members")
        if doc is None:
            raise InvalidInputError("subset document needs 'members'")
        return cls.from_indices(n, doc)

    def to_json(self) -> dict:
        return {"members": self.indices.tolist()}

    def complement(self) -> "SubsetMask":
        return SubsetMask(~self.members)

    def __le__(self, other: "SubsetMask") -> bool:
        return bool(np.all(~self.members | other.members))

    def __or__(self, other):
        return SubsetMask(self.members | other.members)

    def __and__(self, other):
        return SubsetMask(self.members & other.members)


def _mask(V, n: int) -> np.ndarray:
    m = V.members if isinstance(V, SubsetMask) else np.asarray(V, dtype=bool)
    if m.size != n:
        raise InvalidInputError(f"subset has length {m.size}, expected {n}")
    return m


def _kernel(P) -> SubMarkovKernel:
    return P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)


@dataclass(frozen=True, eq=False)
class HarmonicKernel:
    H: np.ndarray
    domain: SubsetMask

    def __matmul__(self, f):
        return self.H @ np.asarray(f, dtype=float)


@dataclass(frozen=True, eq=False)
class WeightedPotentialKernel:
    """``f -> K (f * nu)``; ``p = K nu`` is the represented potential.

    ``generator`` optionally holds a matrix ``A`` with ``A K = I`` on the
    support of ``K``; for a killed chain it is ``I - P`` restricted there.
    ``P`` optionally keeps the chain that produced ``K`` so that
    supermedian tests can be run against it.
    """

    K: np.ndarray
    nu: np.ndarray
    P: Optional[np.ndarray] = None
    generator: Optional[np.ndarray] = None

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise InvalidInputError("K must be square")
        nu = as_values(self.nu, K.shape[0], nonnegative=True, name="nu")
        for arr in (K, nu):
            arr.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "nu", nu)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def support(self) -> np.ndarray:
        """States on which ``K`` acts (nonzero row or column)."""
        return (np.abs(self.K).sum(axis=1) > 0) | (np.abs(self.K).sum(axis=0) > 0)

    @property
    def potential(self) -> np.ndarray:
        return self.K @ self.nu

    def apply(self, f) -> np.ndarray:
        return self.K @ (np.asarray(f, dtype=float) * self.nu)

    def generator_on_support(self):
        """Return ``(idx, A)`` with ``A = inv(K[idx, idx])`` on the support."""
        idx = np.flatnonzero(self.support)
        if self.generator is not None:
            return idx, np.asarray(self.generator, dtype=float)[np.ix_(idx, idx)]
        return idx, np.linalg.inv(self.K[np.ix_(idx, idx)])


def killed_kernel(P, V) -> SubMarkovKernel:
    """The chain killed on leaving ``V``: rows and columns off ``V`` zeroed."""
    kern = _kernel(P)
    m = _mask(V, kern.n)
    Q = np.where(np.outer(m, m), kern.P, 0.0)
    return SubMarkovKernel(Q)


def harmonic_kernel(P, V) -> HarmonicKernel:
    """Exit distribution of the chain from ``V``.

    For ``x`` outside ``V`` the row is the unit mass at ``x``.  For ``x`` in
    ``V`` it is the minimal nonnegative solution of
    ``H = P_VV H + P_{V,V^c}``: states of ``V`` from which ``V^c`` is not
    reachable get a zero row, and on the rest the killed system is transient
    and solved directly.
    """
    kern = _kernel(P)
    n = kern.n
    m = _mask(V, n)
    H = np.eye(n)
    if not m.any():
        return HarmonicKernel(H, SubsetMask(m))
    vin = np.flatnonzero(m)
    vout = np.flatnonzero(~m)
    H[vin] = 0.0
    if vout.size == 0:
        return HarmonicKernel(H, SubsetMask(m))
    Pvv = kern.P[np.ix_(vin, vin)]
    Pvo = kern.P[np.ix_(vin, vout)]
    # states in V with a positive-probability path to V^c
    reach = Pvo.sum(axis=1) > 0
    adj = Pvv > 0
    while True:
        grown = reach | (adj & reach[None, :]).any(axis=1)
        if np.array_equal(grown, reach):
            break
        reach = grown
    c = np.flatnonzero(reach)
    if c.size:
        Pcc = Pvv[np.ix_(c, c)]
        X = np.linalg.solve(np.eye(c.size) - Pcc, Pvo[c])
        X[X < 0] = 0.0
        H[np.ix_(vin[c], vout)] = X
    return HarmonicKernel(H, SubsetMask(m))


def killed_green(P, V) -> np.ndarray:
    """Green function of the chain killed on leaving ``V`` (zero off ``V``)."""
    kern = _kernel(P)
    n = kern.n
    m = _mask(V, n)
    G = np.zeros((n, n))
    idx = np.flatnonzero(m)
    if idx.size == 0:
        return G
    Pvv = kern.P[np.ix_(idx, idx)]
    if not is_transient(Pvv):
        raise NotTransientError("killed kernel on V is not transient")
    Gv = np.linalg.solve(np.eye(idx.size) - Pvv, np.eye(idx.size))
    Gv[(Gv < 0) & (Gv > -1e-12)] = 0.0
    G[np.ix_(idx, idx)] = Gv
    return G


def killed_potential_kernel(P, U, nu) -> WeightedPotentialKernel:
    """``K_p`` of the restriction to ``U`` with density ``nu``."""
    kern = _kernel(P)
    m = _mask(U, kern.n)
    G = killed_green(kern, m)
    A = np.where(np.outer(m, m), np.eye(kern.n) - kern.P, 0.0)
    nu = np.where(m, as_values(nu, kern.n, nonnegative=True, name="nu"), 0.0)
    Q = np.where(np.outer(m, m), kern.P, 0.0)
    return WeightedPotentialKernel(G, nu, P=Q, generator=A)


def reduced_function(P, u, A, tol: float = REDUCTION_TOL,
                     max_sweeps: int = REDUCTION_MAX_SWEEPS) -> np.ndarray:
    """Smallest supermedian ``w`` with ``w >= u`` on ``A``.

    Increasing sweep ``w <- max(1_A u, P w)`` started at ``1_A u``.
    """
    kern = _kernel(P)
    v = as_values(u, kern.n, nonnegative=True, name="u")
    m = _mask(A, kern.n)
    target = np.where(m, v, 0.0)
    if not m.any() or not target.any():
        return np.zeros(kern.n)
    w, sweeps, ok = kernels.reduced_sweep(np.ascontiguousarray(kern.P), target, tol, max_sweeps)
    if not ok:
        raise NumericalFailureError(f"reduction sweep did not converge in {sweeps} sweeps")
    return w


def hunt_formula_check(P, V) -> float:
    """``max |G_V - (K - H_V K)|`` over ``V x V``."""
    kern = _kernel(P)
    m = _mask(V, kern.n)
    K = potential_kernel(kern)
    H = harmonic_kernel(kern, m).H
    G = killed_green(kern, m)
    if not m.any():
        return 0.0
    diff = (G - (K - H @ K))[np.ix_(m, m)]
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class DominationResult:
    hypothesis_held: bool
    conclusion_held: bool

    @property
    def confirmed(self) -> bool:
        return (not self.hypothesis_held) or self.conclusion_held


def domination_check(Kp: WeightedPotentialKernel, f, g, w, P=None,
                     hyp_tol: float = 1e-12, tol: float = 1e-10) -> DominationResult:
    """Test the domination principle on one triple.

    If ``K_p f <= K_p g + w`` on ``{f > 0}`` then the same must hold on the
    whole space.  ``w`` has to be supermedian for the chain behind ``Kp``.
    """
    n = Kp.n
    f = as_values(f, n, nonnegative=True, name="f")
    g = as_values(g, n, nonnegative=True, name="g")
    w = as_values(w, n, nonnegative=True, name="w")
    chain = P if P is not None else Kp.P
    if chain is None:
        idx, A = Kp.generator_on_support()
        chain = np.zeros((n, n))
        chain[np.ix_(idx, idx)] = np.eye(idx.size) - A
        chain = np.clip(chain, 0.0, None)
    if not is_supermedian(chain, w, tol=1e-12 * max(1.0, float(w.max(initial=0.0)))):
        raise InvalidInputError("w is not supermedian")
    lhs = Kp.apply(f)
    rhs = Kp.apply(g) + w
    on = f > 0
    hyp = bool(np.all(lhs[on] <= rhs[on] + hyp_tol))
    if not hyp:
        return DominationResult(False, False)
    return DominationResult(True, bool(np.all(lhs <= rhs + tol)))


@dataclass(frozen=True, eq=False)
class MCExitEstimate:
    """Empirical exit law; ``freq[n]`` is the killed (cemetery) fraction."""

    freq: np.ndarray
    paths: int
    cap_hits: int

    def stderr(self) -> np.ndarray:
        q = self.freq
        return np.sqrt(q * (1 - q) / self.paths)


def mc_exit_estimate(P, V, x: int, paths: int, seed: int = 0,
                     step_cap: int = MC_STEP_CAP, block: int = MC_BLOCK) -> MCExitEstimate:
    """Simulate ``paths`` walks from ``x`` until they leave ``V`` or die.

    Randomness comes from Philox (counter-based) streams keyed by
    ``(seed, block index)``, so results do not depend on how blocks are
    scheduled.
    """
    kern = _kernel(P)
    n = kern.n
    m = _mask(V, n)
    if paths < 1:
        raise InvalidInputError("paths must be >= 1")
    if not 0 <= x < n:
        raise InvalidInputError("start state out of range")
    counts = np.zeros(n + 1, dtype=np.int64)
    if not m[x]:
        counts[x] = paths
        return MCExitEstimate(counts / paths, paths, 0)
    cum = np.cumsum(np.hstack([kern.P, kern.killing[:, None]]), axis=1)
    cum[:, -1] = 1.0
    inside = np.append(m, False)
    cap_hits = 0
    for b, start in enumerate(range(0, paths, block)):
        size = min(block, paths - start)
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, b]))
        states = np.full(size, x, dtype=np.int64)
        active = np.arange(size)
        for _ in range(step_cap):
            if active.size == 0:
                break
            u = rng.random(active.size)
            states[active] = kernels.mc_step(states[active], u, cum)
            active = active[inside[states[active]]]
        cap_hits += active.size
        done = np.ones(size, dtype=bool)
        done[active] = False
        counts += np.bincount(states[done], minlength=n + 1)
    return MCExitEstimate(counts / paths, paths, cap_hits)
