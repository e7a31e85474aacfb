"""Seeded instance generators and problem-file I/O.

Every generator takes a ``numpy.random.Generator``; ``rng_for(seed, i)``
derives the stream for instance ``i`` so that instances are independent of
how many were generated before them.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .markov_core import SubMarkovKernel, random_substochastic
from .nonlinearity import Nonlinearity
from .potential_ops import SubsetMask, harmonic_kernel
from .semilinear import Exhaustion, SemilinearProblem

FAMILIES = ("power", "linear", "tabulated", "radial_power")


def rng_for(seed: int, index: int = 0, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), stream, index]))


def random_chain(rng: np.random.Generator, n_min: int = 2, n_max: int = 8,
                 max_radius: float = 0.95) -> SubMarkovKernel:
    n = int(rng.integers(n_min, n_max + 1))
    return random_substochastic(rng, n, max_radius=max_radius)


def random_subset(rng: np.random.Generator, n: int, proper: bool = True) -> SubsetMask:
    hi = n - 1 if proper else n
    k = int(rng.integers(1, max(hi, 1) + 1))
    return SubsetMask.from_indices(n, rng.choice(n, size=k, replace=False))


def random_phi(rng: np.random.Generator, n: int, family: Optional[str] = None) -> Nonlinearity:
    family = family or FAMILIES[int(rng.integers(len(FAMILIES)))]
    if family == "power":
        return Nonlinearity.power(rng.uniform(0.2, 3.0, n), float(rng.uniform(0.5, 3.0)))
    if family == "linear":
        return Nonlinearity.linear(rng.uniform(0.0, 2.0, n))
    if family == "tabulated":
        grid = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
        steps = rng.uniform(0.0, 1.0, (n, grid.size - 1))
        return Nonlinearity.tabulated(grid, np.concatenate([np.zeros((n, 1)),
                                                            np.cumsum(steps, axis=1)], axis=1))
    if family == "radial_power":
        return Nonlinearity.radial_power(float(rng.uniform(0.5, 2.5)), rng.uniform(0.5, 4.0, n))
    raise InvalidInputError(f"unknown family {family!r}")


def harmonic_rhs(rng: np.random.Generator, P, U: SubsetMask) -> Optional[np.ndarray]:
    """``h = H_U f`` with random ``f >= 0`` on ``U^c``; None if it vanishes on ``U``."""
    f = np.where(U.members, 0.0, rng.uniform(0.2, 2.0, U.n))
    h = harmonic_kernel(P, U).H @ f
    return h if np.any(h[U.members] > 1e-8) else None


def random_problem(rng: np.random.Generator, n_max: int = 8, family: Optional[str] = None,
                   label: str = "", n: Optional[int] = None) -> SemilinearProblem:
    """Random killed chain, proper ``U``, harmonic ``h`` and random ``phi``.

    ``n`` fixes the number of states; otherwise it is drawn from ``3..n_max``.
    """
    if n is not None and n < 2:
        raise InvalidInputError("a problem needs at least two states")
    for _ in range(1000):
        P = random_chain(rng, n or 3, n or n_max)
        size = P.n
        U = random_subset(rng, size)
        h = harmonic_rhs(rng, P, U)
        if h is None:
            continue
        order = rng.permutation(U.indices)
        ex = Exhaustion.nested(order, size, min(U.indices.size, 3))
        phi = random_phi(rng, size, family)
        nu = rng.uniform(0.5, 1.5, size)
        return SemilinearProblem.from_chain(P, U, phi, h, ex, nu=nu, label=label)
    raise InvalidInputError("could not draw a problem with h nonzero on U")


def jump_chain_problem(phi: Optional[Nonlinearity] = None) -> SemilinearProblem:
    """Six states, ``U = {0, 1, 2}``; every state of ``U`` jumps straight out with
    probability 1/2 and ``h = 1`` is harmonic on ``U``.  Outside states may
    jump back into ``U``.
    """
    P = np.zeros((6, 6))
    P[0, 1], P[0, 3] = 0.5, 0.5
    P[1, 0], P[1, 2], P[1, 4] = 0.25, 0.25, 0.5
    P[2, 1], P[2, 5] = 0.5, 0.5
    P[3, 0] = 0.5
    P[4, 5] = 0.5
    U = SubsetMask.from_indices(6, [0, 1, 2])
    ex = Exhaustion((SubsetMask.from_indices(6, [0]), SubsetMask.from_indices(6, [0, 1]), U))
    phi = phi or Nonlinearity.power(np.full(6, 2.0), 2.0)
    return SemilinearProblem.from_chain(P, U, phi, np.ones(6), ex, label="jump-chain")


def load_problem(path) -> SemilinearProblem:
    return SemilinearProblem.from_json(read_json(path))


def read_json(path):
    """Parse a JSON file; syntax errors become ``InvalidInputError`` with line/column."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {p}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def dump_problem(problem: SemilinearProblem) -> str:
    return json.dumps(problem.to_json(), indent=1, sort_keys=True) + "\n"
