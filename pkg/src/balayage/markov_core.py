"""Finite sub-Markov kernels and the objects they generate.

A finite state space with a substochastic transition array ``P`` is a
balayage space exactly when the chain is transient, i.e. when the spectral
radius of ``P`` is below one.  Everything in this module is a pure function
of immutable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InvalidInputError, NotTransientError

ROW_SUM_SLACK = 1e-12
NONNEG_CLAMP = 1e-14
TRANSIENCE_TOL = 1e-10
POWER_ITER_CAP = 10_000


@dataclass(frozen=True)
class StateSpace:
    n: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidInputError("state space needs at least one state")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n:
                raise InvalidInputError("labels must have length n")
            if len(set(labels)) != len(labels):
                raise InvalidInputError("labels must be distinct")
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True, eq=False)
class SubMarkovKernel:
    """Substochastic ``n x n`` transition array; row ``x`` is ``P(x, .)``."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise InvalidInputError(f"P must be a non-empty square array, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise InvalidInputError("P has non-finite entries")
        if np.any(P < 0):
            raise InvalidInputError("P has negative entries")
        sums = P.sum(axis=1)
        if np.any(sums > 1.0 + ROW_SUM_SLACK):
            bad = int(np.argmax(sums))
            raise InvalidInputError(f"row {bad} sums to {sums[bad]!r} > 1")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def killing(self) -> np.ndarray:
        """Mass deficit ``1 - P(x, X)`` per state."""
        return np.clip(1.0 - self.P.sum(axis=1), 0.0, None)

    @classmethod
    def from_json(cls, doc) -> "SubMarkovKernel":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            n = int(doc["n"])
            rows = doc["rows"]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"kernel document needs 'n' and 'rows': {exc}") from None
        P = np.array(rows, dtype=float)
        if P.shape != (n, n):
            raise InvalidInputError(f"'rows' has shape {P.shape}, expected ({n}, {n})")
        return cls(P)

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.P.tolist()}


@dataclass(frozen=True, eq=False)
class StateFunction:
    values: np.ndarray
    sign_constraint: str = "nonnegative"

    def __post_init__(self):
        if self.sign_constraint not in ("nonnegative", "any"):
            raise InvalidInputError("sign_constraint must be 'nonnegative' or 'any'")
        v = as_values(self.values, nonnegative=self.sign_constraint == "nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size


def as_values(f, n: Optional[int] = None, nonnegative: bool = False, name: str = "f") -> np.ndarray:
    """Coerce ``f`` to a finite float vector, clamping ``-1e-14`` noise to 0."""
    v = np.array(f, dtype=float).reshape(-1)
    if n is not None and v.size != n:
        raise InvalidInputError(f"{name} has length {v.size}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if nonnegative:
        if np.any(v < -NONNEG_CLAMP):
            raise InvalidInputError(f"{name} must be nonnegative (min {v.min()!r})")
        v = np.maximum(v, 0.0)
    return v


def _matrix(P) -> np.ndarray:
    return P.P if isinstance(P, SubMarkovKernel) else np.asarray(P, dtype=float)


# ----------------------------------------------------------- transience

def spectral_radius_bounds(P, tol: float = TRANSIENCE_TOL, max_iter: int = POWER_ITER_CAP):
    """Collatz-Wielandt bracket for the spectral radius of a nonnegative matrix.

    Power iteration runs on ``I + P``, which has a positive diagonal and so no
    periodicity; ``x > 0`` throughout.  Returns ``(lower, upper, x)`` with
    ``lower <= rho(P) <= upper``; ``x`` is the last iterate and satisfies
    ``P x <= upper * x``.
    """
    A = _matrix(P)
    n = A.shape[0]
    if n == 0:
        return 0.0, 0.0, np.ones(0)
    x = np.ones(n)
    lower, upper = 0.0, float(A.sum(axis=1).max())
    best_x = x
    for _ in range(max_iter):
        y = x + A @ x
        ratio = y / x
        up = float(ratio.max()) - 1.0
        lo = float(ratio.min()) - 1.0
        if up < upper:
            upper, best_x = up, x
        lower = max(lower, lo)
        if upper - lower < tol or upper < 1.0 - tol or lower >= 1.0 - tol:
            break
        x = y / y.max()
        # keep entries strictly positive so the ratios stay defined
        x = np.maximum(x, 1e-300)
    return max(lower, 0.0), max(upper, 0.0), best_x


def is_transient(P, tol: float = TRANSIENCE_TOL) -> bool:
    """True iff a positive ``x`` with ``P x <= (1 - tol) x`` is found."""
    A = _matrix(P)
    if A.shape[0] == 0:
        return True
    _, upper, _ = spectral_radius_bounds(A, tol=tol)
    return upper < 1.0 - tol


def spectral_radius(P) -> float:
    lower, upper, _ = spectral_radius_bounds(P)
    return 0.5 * (lower + upper) if upper - lower < 1e-8 else upper


# -------------------------------------------------------- Poisson semigroup

@dataclass(frozen=True, eq=False)
class PoissonSemigroupEval:
    """Evaluator for ``P_t = exp(-t) sum_k t^k/k! P^k``."""

    P: SubMarkovKernel
    series_tolerance: float = 1e-14
    max_terms: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.P, SubMarkovKernel):
            object.__setattr__(self, "P", SubMarkovKernel(self.P))
        if not self.series_tolerance > 0:
            raise InvalidInputError("series_tolerance must be positive")

    def term_cap(self, t: float) -> int:
        if self.max_terms is not None:
            return int(self.max_terms)
        return int(10 * (t + 1) * self.P.n + 200)


def poisson_apply(sg: PoissonSemigroupEval, t: float, f) -> np.ndarray:
    """Apply the Poisson semigroup at time ``t`` to ``f``.

    Since ``|P^k f| <= max|f|`` the remainder after ``K`` terms is at most
    ``max|f| * Poisson(t).sf(K)``; summation stops once that drops below
    ``sg.series_tolerance``.
    """
    if not np.isfinite(t) or t < 0:
        raise InvalidInputError("t must be a finite nonnegative real")
    v = as_values(f, sg.P.n)
    if t == 0:
        return v.copy()
    fmax = float(np.max(np.abs(v))) if v.size else 0.0
    if fmax == 0.0:
        return np.zeros_like(v)
    cap = sg.term_cap(t)
    ks = np.arange(cap + 1)
    tail = stats.poisson.sf(ks, t) * fmax
    hit = np.nonzero(tail < sg.series_tolerance)[0]
    last = int(hit[0]) if hit.size else cap
    weights = stats.poisson.pmf(ks[: last + 1], t)
    P = sg.P.P
    term = v.copy()
    out = weights[0] * term
    for k in range(1, last + 1):
        term = P @ term
        out += weights[k] * term
    return out


def poisson_matrix(sg: PoissonSemigroupEval, t: float) -> np.ndarray:
    """The induced kernel ``P_t`` as an array (column-by-column application)."""
    n = sg.P.n
    return np.column_stack([poisson_apply(sg, t, e) for e in np.eye(n)])


# ------------------------------------------------------- potential kernel

def potential_kernel(P) -> np.ndarray:
    """``K = sum_k P^k``, obtained from ``(I - P) K = I``."""
    kern = P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)
    A = kern.P
    if not is_transient(A):
        raise NotTransientError("spectral radius of P is >= 1 - 1e-10; potential kernel is infinite")
    n = kern.n
    K = np.linalg.solve(np.eye(n) - A, np.eye(n))
    K[(K < 0) & (K > -1e-12)] = 0.0
    return K


def is_supermedian(P, u, tol: float = 1e-12) -> bool:
    kern = P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)
    v = as_values(u, kern.n, nonnegative=True, name="u")
    return bool(np.all(kern.P @ v <= v + tol))


@dataclass(frozen=True, eq=False)
class BalayageVerdict:
    is_balayage: bool
    witness: Optional[np.ndarray] = field(default=None)

    def __bool__(self):
        return self.is_balayage


def is_balayage_space(P) -> BalayageVerdict:
    """Decide whether ``(X, S_P)`` is a balayage space.

    When it is, the witness ``s0 = K 1`` satisfies ``P s0 = s0 - 1 < s0``.
    """
    kern = P if isinstance(P, SubMarkovKernel) else SubMarkovKernel(P)
    if not is_transient(kern.P):
        return BalayageVerdict(False)
    K = potential_kernel(kern)
    return BalayageVerdict(True, K @ np.ones(kern.n))


def left_translation_chain(N: int) -> SubMarkovKernel:
    """Walk to the left on ``{-N, ..., N}``; the leftmost state is killed.

    Index ``i`` stands for the integer ``i - N``.
    """
    n = 2 * N + 1
    P = np.zeros((n, n))
    for i in range(1, n):
        P[i, i - 1] = 1.0
    return SubMarkovKernel(P)


def random_substochastic(rng: np.random.Generator, n: int, max_radius: float = 0.95,
                         density: float = 0.7) -> SubMarkovKernel:
    """Random sparse-ish substochastic kernel with spectral radius below ``max_radius``."""
    P = rng.random((n, n)) * (rng.random((n, n)) < density)
    sums = P.sum(axis=1)
    sums[sums == 0] = 1.0
    P = P / sums[:, None] * rng.uniform(0.3, 1.0, size=(n, 1))
    rho = float(np.max(np.abs(np.linalg.eigvals(P)))) if n else 0.0
    if rho >= max_radius:
        P *= max_radius * rng.uniform(0.5, 0.999) / rho
    return SubMarkovKernel(P)


def from_rows(rows: Sequence[Sequence[float]]) -> SubMarkovKernel:
    return SubMarkovKernel(np.array(rows, dtype=float))
