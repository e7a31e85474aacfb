"""Nonlinearities ``phi(x, t)``: nonnegative, zero at ``t = 0``, nondecreasing in ``t``.

A ``Nonlinearity`` is a sum of per-state terms with an optional global cap,
which is enough to express every operation the solver needs:

* restriction ``phi_A = 1_A phi`` folds the indicator into the coefficients,
* truncation ``phi_n = min(phi, n) 1_{V_n}`` adds a cap,
* ``c * phi`` and ``phi + psi`` combine coefficients and term lists.

Values for ``t <= 0`` are 0 (the solver extends ``phi`` that way).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import InvalidInputError

MONOTONE_SLACK = -1e-12
CHECK_POINTS = 64


@dataclass(frozen=True, eq=False)
class Term:
    kind: int
    coef: np.ndarray
    expo: float = 1.0
    aux: Optional[np.ndarray] = None
    grid: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None

    def scaled(self, s) -> "Term":
        return Term(self.kind, self.coef * s, self.expo, self.aux, self.grid, self.table)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    n: int
    terms: Tuple[Term, ...] = ()
    cap: float = math.inf
    family: str = "zero"
    params: dict = field(default_factory=dict)

    # -------------------------------------------------------------- factories
    @classmethod
    def zero(cls, n: int) -> "Nonlinearity":
        return cls(n)

    @classmethod
    def linear(cls, rho) -> "Nonlinearity":
        rho = _coef(rho)
        return cls(rho.size, (Term(kernels.LINEAR, rho),), family="linear",
                   params={"rho": rho.tolist()})._checked()

    @classmethod
    def power(cls, rho, gamma: float) -> "Nonlinearity":
        rho = _coef(rho)
        if not gamma > 0:
            raise InvalidInputError("power nonlinearity needs gamma > 0")
        return cls(rho.size, (Term(kernels.POWER, rho, float(gamma)),), family="power",
                   params={"rho": rho.tolist(), "gamma": float(gamma)})._checked()

    @classmethod
    def radial_power(cls, gamma: float, radii) -> "Nonlinearity":
        """``phi(x, t) = 1_{|x| > 1} |x|^-gamma (|x|^t - 1)`` on states at ``radii``."""
        r = np.asarray(radii, dtype=float).reshape(-1)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise InvalidInputError("radii must be finite and nonnegative")
        outside = r > 1.0
        coef = np.where(outside, np.power(np.where(outside, r, 1.0), -float(gamma)), 0.0)
        logr = np.where(outside, np.log(np.where(outside, r, 1.0)), 0.0)
        return cls(r.size, (Term(kernels.EXPM1, coef, 1.0, logr),), family="radial_power",
                   params={"gamma": float(gamma), "radii": r.tolist()})._checked()

    @classmethod
    def tabulated(cls, breakpoints, values) -> "Nonlinearity":
        """Piecewise-linear in ``t`` through ``(breakpoints[k], values[x][k])``.

        Beyond the last breakpoint the value is held constant.
        """
        grid = np.asarray(breakpoints, dtype=float).reshape(-1)
        table = np.atleast_2d(np.asarray(values, dtype=float))
        if grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise InvalidInputError("breakpoints must start at 0 and increase strictly")
        if table.shape[1] != grid.size:
            raise InvalidInputError("values must have one column per breakpoint")
        if np.any(table[:, 0] != 0.0):
            raise InvalidInputError("tabulated phi must vanish at t = 0")
        if np.any(np.diff(table, axis=1) < MONOTONE_SLACK):
            raise InvalidInputError("tabulated phi must be nondecreasing in t")
        n = table.shape[0]
        term = Term(kernels.TABULATED, np.ones(n), 1.0, None, grid, table)
        return cls(n, (term,), family="tabulated",
                   params={"breakpoints": grid.tolist(), "values": table.tolist()})._checked()

    @classmethod
    def from_json(cls, doc: dict, n: int, radii=None) -> "Nonlinearity":
        fam = doc.get("family")
        if fam == "zero":
            return cls.zero(n)
        if fam == "linear":
            return cls.linear(_broadcast(doc.get("rho", 1.0), n))
        if fam == "power":
            return cls.power(_broadcast(doc.get("rho", 1.0), n), doc["gamma"])
        if fam == "radial_power":
            r = doc.get("radii", radii)
            if r is None:
                raise InvalidInputError("radial_power needs 'radii'")
            return cls.radial_power(doc["gamma"], r)
        if fam == "tabulated":
            return cls.tabulated(doc["breakpoints"], doc["values"])
        raise InvalidInputError(f"unknown nonlinearity family {fam!r}")

    def to_json(self) -> dict:
        return {"family": self.family, **self.params}

    # ------------------------------------------------------------ algebra
    def restricted(self, A) -> "Nonlinearity":
        """``1_A phi``."""
        m = np.asarray(getattr(A, "members", A), dtype=float).reshape(-1)
        return self._derive(tuple(t.scaled(m) for t in self.terms), self.cap, "restricted")

    def capped(self, c: float) -> "Nonlinearity":
        return self._derive(self.terms, min(self.cap, float(c)), "capped")

    def scaled(self, c: float) -> "Nonlinearity":
        if not c >= 0:
            raise InvalidInputError("scale must be nonnegative")
        return self._derive(tuple(t.scaled(c) for t in self.terms), self.cap * c
                            if math.isfinite(self.cap) else self.cap, "scaled")

    def __add__(self, other: "Nonlinearity") -> "Nonlinearity":
        if other.n != self.n:
            raise InvalidInputError("cannot add nonlinearities on different state counts")
        if math.isfinite(self.cap) or math.isfinite(other.cap):
            raise InvalidInputError("sum of capped nonlinearities is not representable")
        return Nonlinearity(self.n, self.terms + other.terms, math.inf, "sum",
                            {"parts": [self.to_json(), other.to_json()]})

    def __rmul__(self, c):
        return self.scaled(c)

    def _derive(self, terms, cap, how):
        return Nonlinearity(self.n, terms, cap, self.family, dict(self.params, derived=how))

    # ---------------------------------------------------------- evaluation
    def packed(self, idx=None):
        """Arrays for the compiled kernels, optionally restricted to states ``idx``."""
        sel = slice(None) if idx is None else np.asarray(idx)
        n = self.n if idx is None else len(idx)
        m = len(self.terms)
        kinds = np.array([t.kind for t in self.terms], dtype=np.int64)
        coef = np.zeros((m, n))
        expo = np.ones(m)
        aux = np.zeros((m, n))
        k = max([t.grid.size for t in self.terms if t.grid is not None] or [2])
        tgrid = np.tile(np.linspace(0.0, 1.0, k), (m, 1))
        tvals = np.zeros((m, n, k))
        for j, t in enumerate(self.terms):
            coef[j] = np.asarray(t.coef, dtype=float)[sel]
            expo[j] = t.expo
            if t.aux is not None:
                aux[j] = np.asarray(t.aux)[sel]
            if t.grid is not None:
                g, tab = _pad(t.grid, np.asarray(t.table)[sel], k)
                tgrid[j] = g
                tvals[j] = tab
        return (kinds, np.ascontiguousarray(coef), expo, np.ascontiguousarray(aux),
                np.ascontiguousarray(tgrid), np.ascontiguousarray(tvals), float(self.cap))

    def __call__(self, t) -> np.ndarray:
        """Evaluate at state-wise levels ``t`` (shape (n,) or scalar)."""
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.n,))
        if not self.terms:
            return np.zeros(self.n)
        return kernels.phi_vec_py(t, *self._packed_all)

    @cached_property
    def _packed_all(self):
        return self.packed()

    def at(self, x: int, t: float) -> float:
        return float(self(np.full(self.n, t))[x])

    def is_zero(self) -> bool:
        return all(not np.any(t.coef) for t in self.terms) or self.cap == 0.0

    def _checked(self, t_max: float = 10.0) -> "Nonlinearity":
        grid = np.linspace(0.0, t_max, CHECK_POINTS)
        vals = np.array([self(np.full(self.n, s)) for s in grid])
        if np.any(vals[0] != 0.0):
            raise InvalidInputError("phi(x, 0) must vanish")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("phi must be finite for finite t")
        if np.any(np.diff(vals, axis=0) < MONOTONE_SLACK):
            raise InvalidInputError("phi must be nondecreasing in t")
        if np.any(vals < 0):
            raise InvalidInputError("phi must be nonnegative")
        return self


def truncate_phi(phi: Nonlinearity, Vn, n: float) -> Nonlinearity:
    """``phi_n(x, t) = min(phi(x, t), n) 1_{V_n}(x)``."""
    return phi.restricted(Vn).capped(n)


def _coef(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise InvalidInputError("coefficients must be finite and nonnegative")
    return rho


def _broadcast(v, n):
    a = np.asarray(v, dtype=float)
    return np.full(n, float(a)) if a.ndim == 0 else a


def _pad(grid, table, k):
    if grid.size == k:
        return grid, table
    extra = k - grid.size
    step = max(grid[-1], 1.0)
    g = np.concatenate([grid, grid[-1] + step * np.arange(1, extra + 1)])
    tab = np.concatenate([table, np.repeat(table[:, -1:], extra, axis=1)], axis=1)
    return g, tab
