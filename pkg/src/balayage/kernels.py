"""Hot inner loops, each with a numba path and a numpy fallback.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``; the ``*_py``
and ``*_nb`` variants stay importable so the benchmark can time both.

Nonlinearities reach the compiled code as a packed tuple of arrays
``(kinds, coef, expo, aux, tgrid, tvals, cap)``:

    kind 0  linear      coef * t
    kind 1  power       coef * t**expo
    kind 2  exp-minus   coef * expm1(t * aux)     (aux = log|x|)
    kind 3  tabulated   coef * interp(t, tgrid, tvals)

The value at state ``i`` is ``min(cap, sum over terms)`` for ``t > 0`` and 0
for ``t <= 0``.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit, select

LINEAR, POWER, EXPM1, TABULATED = 0, 1, 2, 3
BISECT_CAP = 1100


# ---------------------------------------------------------------- phi eval

def _phi_at_py(i, t, kinds, coef, expo, aux, tgrid, tvals, cap):
    if t <= 0.0:
        return 0.0
    total = 0.0
    for j in range(kinds.shape[0]):
        c = coef[j, i]
        if c == 0.0:
            continue
        k = kinds[j]
        if k == 0:
            total += c * t
        elif k == 1:
            total += c * t ** expo[j]
        elif k == 2:
            total += c * math.expm1(t * aux[j, i])
        else:
            total += c * np.interp(t, tgrid[j], tvals[j, i])
    if total > cap:
        return cap
    return total


_phi_at_nb = njit(_phi_at_py)


def phi_vec_py(t, kinds, coef, expo, aux, tgrid, tvals, cap):
    """Evaluate a packed nonlinearity at every state, ``t`` of shape (n,)."""
    t = np.asarray(t, dtype=float)
    pos = t > 0.0
    tp = np.where(pos, t, 0.0)
    total = np.zeros_like(tp)
    for j in range(kinds.shape[0]):
        c = coef[j]
        k = kinds[j]
        if k == LINEAR:
            total += c * tp
        elif k == POWER:
            total += c * tp ** expo[j]
        elif k == EXPM1:
            total += c * np.expm1(tp * aux[j])
        else:
            grid = tgrid[j]
            vals = tvals[j]
            total += c * np.array([np.interp(tp[i], grid, vals[i])
                                   for i in range(tp.size)])
    total = np.minimum(total, cap)
    return np.where(pos, total, 0.0)


# ---------------------------------------------------------- reduction sweep

def reduced_sweep_py(P, target, tol, max_sweeps):
    w = target.copy()
    for sweep in range(1, max_sweeps + 1):
        new = np.maximum(target, P @ w)
        change = np.max(np.abs(new - w)) if w.size else 0.0
        w = new
        if change < tol:
            return w, sweep, True
    return w, max_sweeps, False


@njit
def reduced_sweep_nb(P, target, tol, max_sweeps):
    n = target.shape[0]
    w = target.copy()
    new = np.empty(n)
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += P[i, j] * w[j]
            v = target[i] if target[i] > acc else acc
            d = abs(v - w[i])
            if d > change:
                change = d
            new[i] = v
        w[:] = new
        if change < tol:
            return w, sweep, True
    return w, max_sweeps, False


# ------------------------------------------- Gauss-Seidel with bisection
#
# Solves  A u + nu * phi(u) = b  coordinate by coordinate, where A has a
# positive diagonal and phi is nondecreasing with phi(t) = 0 for t <= 0.
# Each scalar equation  a u + nu phi(u) = r  has its root in [0, r/a] when
# r > 0 and equals r/a otherwise.

def _scalar_root(phi_at, i, a, nu_i, r, bisect_tol, packed):
    if r <= 0.0 or nu_i == 0.0:
        return r / a
    lo = 0.0
    hi = r / a
    # hi satisfies a*hi + nu*phi(hi) >= r, lo gives a*lo + nu*phi(lo) = 0 < r;
    # the width is relative to hi since roots close to 0 meet steep phi
    for _ in range(BISECT_CAP):
        mid = 0.5 * (lo + hi)
        if hi - lo <= bisect_tol * hi or mid <= lo or mid >= hi:
            break
        val = a * mid + nu_i * phi_at(i, mid, *packed) - r
        if val > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def gauss_seidel_py(A, b, nu, u0, packed, tol, max_sweeps, bisect_tol):
    n = b.shape[0]
    u = u0.astype(float).copy()
    diag = np.diag(A).copy()
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(n):
            r = b[i] - (A[i] @ u - diag[i] * u[i])
            new = _scalar_root(_phi_at_py, i, diag[i], nu[i], r, bisect_tol, packed)
            change = max(change, abs(new - u[i]))
            u[i] = new
        if change < tol:
            return u, sweep, True
    return u, max_sweeps, False


@njit
def gauss_seidel_nb(A, b, nu, u0, packed, tol, max_sweeps, bisect_tol):
    kinds, coef, expo, aux, tgrid, tvals, cap = packed
    n = b.shape[0]
    u = u0.copy()
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(n):
            a = A[i, i]
            r = b[i]
            for j in range(n):
                if j != i:
                    r -= A[i, j] * u[j]
            if r <= 0.0 or nu[i] == 0.0:
                new = r / a
            else:
                lo = 0.0
                hi = r / a
                for _ in range(BISECT_CAP):
                    mid = 0.5 * (lo + hi)
                    if hi - lo <= bisect_tol * hi or mid <= lo or mid >= hi:
                        break
                    val = a * mid + nu[i] * _phi_at_nb(
                        i, mid, kinds, coef, expo, aux, tgrid, tvals, cap) - r
                    if val > 0.0:
                        hi = mid
                    else:
                        lo = mid
                new = 0.5 * (lo + hi)
            d = abs(new - u[i])
            if d > change:
                change = d
            u[i] = new
        if change < tol:
            return u, sweep, True
    return u, max_sweeps, False


# ------------------------------------------------------- Monte Carlo step
#
# ``cum`` is the row-wise cumulative transition table with a trailing death
# column, shape (n, n + 1), last column equal to 1.  State ``n`` is the
# cemetery.

def mc_step_py(states, uniforms, cum):
    rows = cum[states]
    return (uniforms[:, None] >= rows).sum(axis=1)


@njit
def mc_step_nb(states, uniforms, cum):
    out = np.empty_like(states)
    m = cum.shape[1]
    for p in range(states.shape[0]):
        row = cum[states[p]]
        u = uniforms[p]
        k = 0
        while k < m - 1 and u >= row[k]:
            k += 1
        out[p] = k
    return out


reduced_sweep = select(reduced_sweep_nb, reduced_sweep_py)
gauss_seidel = select(gauss_seidel_nb, gauss_seidel_py)
mc_step = select(mc_step_nb, mc_step_py)
phi_at = select(_phi_at_nb, _phi_at_py)

__all__ = [
    "USE_NUMBA", "LINEAR", "POWER", "EXPM1", "TABULATED",
    "phi_vec_py", "phi_at",
    "reduced_sweep", "reduced_sweep_py", "reduced_sweep_nb",
    "gauss_seidel", "gauss_seidel_py", "gauss_seidel_nb",
    "mc_step", "mc_step_py", "mc_step_nb",
]
