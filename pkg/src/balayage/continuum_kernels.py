"""Closed-form Green functions and transition densities on ``R^d``.

Normalisations follow ``G(x, y) = int_0^inf p_t(x, y) dt``:

* gaussian ``p_t = (4 pi t)^{-d/2} exp(-|x-y|^2 / 4t)`` gives the Newtonian
  kernel ``Gamma(d/2 - 1) / (4 pi^{d/2}) |x-y|^{2-d}``;
* cauchy ``p_t = c_d t / (t^2 + |x-y|^2)^{(d+1)/2}`` gives the Riesz kernel
  with ``alpha = 1``;
* general Riesz order ``alpha`` uses
  ``Gamma((d-alpha)/2) / (2^alpha pi^{d/2} Gamma(alpha/2)) |x-y|^{alpha-d}``.

The quadrature checks here are the evidence for these constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import InvalidInputError, NumericalFailureError

QUAD_EPSREL = 1e-10
QUAD_LIMIT = 500
LOG_TIME_SPAN = 100.0
KINDS = ("newtonian", "riesz", "heat", "spacetime")


def riesz_constant(d: int, alpha: float) -> float:
    return gamma_fn((d - alpha) / 2) / (2 ** alpha * math.pi ** (d / 2) * gamma_fn(alpha / 2))


def cauchy_constant(d: int) -> float:
    return gamma_fn((d + 1) / 2) / math.pi ** ((d + 1) / 2)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in ``R^d`` (2 for ``d = 1``)."""
    return 2 * math.pi ** (d / 2) / gamma_fn(d / 2)


@dataclass(frozen=True)
class GreenKernelSpec:
    kind: str
    d: int
    alpha: float = 2.0
    c: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown kernel kind {self.kind!r}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidInputError("dimension must be a positive integer")
        object.__setattr__(self, "d", int(self.d))
        if self.kind == "newtonian":
            if self.d < 3:
                raise InvalidInputError("the Newtonian kernel needs d >= 3")
            object.__setattr__(self, "alpha", 2.0)
        elif self.kind == "riesz":
            a = float(self.alpha)
            if not (0 < a <= 2 and a < self.d):
                raise InvalidInputError("riesz order needs 0 < alpha <= 2 and alpha < d")
            object.__setattr__(self, "alpha", a)
        if self.c is None:
            if self.kind in ("newtonian", "riesz"):
                c = riesz_constant(self.d, self.alpha)
            else:
                c = (4 * math.pi) ** (-self.d / 2)
            object.__setattr__(self, "c", float(c))
        elif not self.c > 0:
            raise InvalidInputError("normalisation constant must be positive")

    @property
    def elliptic(self) -> bool:
        return self.kind in ("newtonian", "riesz")

    @classmethod
    def from_json(cls, doc: dict) -> "GreenKernelSpec":
        try:
            return cls(doc["kind"], doc["d"], doc.get("alpha", 2.0), doc.get("c"))
        except KeyError as exc:
            raise InvalidInputError(f"kernel spec is missing {exc}") from None

    def to_json(self) -> dict:
        return {"kind": self.kind, "d": self.d, "alpha": self.alpha, "c": self.c}


@dataclass(frozen=True, eq=False)
class SpaceTimePoint:
    x: np.ndarray
    r: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not (np.all(np.isfinite(x)) and math.isfinite(self.r)):
            raise InvalidInputError("space-time coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "r", float(self.r))


def _dist(x, y) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(x, float)) -
                                np.atleast_1d(np.asarray(y, float))))


def green_eval(spec: GreenKernelSpec, x, y) -> float:
    """``c |x-y|^{alpha-d}``; heat and space-time kinds take ``SpaceTimePoint`` arguments."""
    if spec.elliptic:
        dist = _dist(x, y)
        if dist == 0.0:
            raise InvalidInputError("Green function is singular on the diagonal")
        return spec.c * dist ** (spec.alpha - spec.d)
    if not (isinstance(x, SpaceTimePoint) and isinstance(y, SpaceTimePoint)):
        raise InvalidInputError("heat kernels take space-time points")
    lag = x.r - y.r
    if lag <= 0:
        return 0.0
    return spec.c * lag ** (-spec.d / 2) * math.exp(-_dist(x.x, y.x) ** 2 / (4 * lag))


# ------------------------------------------------------------ densities

def _density_r(kind: str, d: int, t: float, dist: float) -> float:
    if kind == "gaussian":
        return (4 * math.pi * t) ** (-d / 2) * math.exp(-dist * dist / (4 * t))
    return cauchy_constant(d) * t / (t * t + dist * dist) ** ((d + 1) / 2)


def density_eval(kind: str, d: int, t: float, x, y) -> float:
    if kind not in ("gaussian", "cauchy"):
        raise InvalidInputError(f"unknown density kind {kind!r}")
    if not t > 0:
        raise InvalidInputError("time must be positive")
    return _density_r(kind, int(d), float(t), _dist(x, y))


def _quad(f, a, b, points=None, epsrel=QUAD_EPSREL):
    kw = {"epsabs": 0.0, "epsrel": epsrel, "limit": QUAD_LIMIT, "full_output": 1}
    if points is not None and math.isfinite(a) and math.isfinite(b):
        kw["points"] = points
    out = integrate.quad(f, a, b, **kw)
    val, err = out[0], out[1]
    if len(out) > 3 and abs(err) > 1e3 * epsrel * max(abs(val), 1e-300):
        raise NumericalFailureError(f"quadrature did not converge on [{a}, {b}]: {out[3]}")
    return val


def _line_integral(f, centres, spread, span=math.inf):
    """``int f`` over ``centres +- span``, split around where ``f`` concentrates."""
    lo, hi = min(centres) - spread, max(centres) + spread
    pts = sorted(set(centres))
    return (_quad(f, lo - span, lo) + _quad(f, lo, hi, points=pts) +
            _quad(f, hi, hi + span))


def density_mass(kind: str, d: int, t: float) -> float:
    """``int p_t(0, y) dy`` in polar coordinates."""
    area = sphere_area(d)
    f = lambda rho: area * rho ** (d - 1) * _density_r(kind, d, t, rho)
    scale = math.sqrt(t) if kind == "gaussian" else t
    return _quad(f, 0.0, 10 * scale) + _quad(f, 10 * scale, math.inf)


def chapman_kolmogorov_residual(kind: str, d: int, s: float, t: float, x, y) -> float:
    """``|p_{s+t}(x,y) - int p_s(x,z) p_t(z,y) dz|`` by adaptive quadrature.

    The gaussian density is a product over coordinates, so its integral
    reduces to one-dimensional ones.  The cauchy integral for ``d >= 2`` is
    taken in cylindrical coordinates around the segment from ``x`` to ``y``.
    """
    if not (s > 0 and t > 0):
        raise InvalidInputError("times must be positive")
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    if x.size != d or y.size != d:
        raise InvalidInputError("points must have d coordinates")
    exact = density_eval(kind, d, s + t, x, y)
    spread = 12 * math.sqrt(max(s, t)) if kind == "gaussian" else 20 * max(s, t)
    if kind == "gaussian":
        conv = 1.0
        for xi, yi in zip(x, y):
            f = lambda z, xi=xi, yi=yi: (_density_r("gaussian", 1, s, abs(xi - z)) *
                                         _density_r("gaussian", 1, t, abs(z - yi)))
            conv *= _line_integral(f, [xi, yi], spread)
    elif d == 1:
        f = lambda z: (_density_r("cauchy", 1, s, abs(x[0] - z)) *
                       _density_r("cauchy", 1, t, abs(z - y[0])))
        conv = _line_integral(f, [x[0], y[0]], spread)
    else:
        dist = _dist(x, y)
        shell = sphere_area(d - 1)

        def radial(z):
            g = lambda rho: (shell * rho ** (d - 2) *
                             _density_r("cauchy", d, s, math.hypot(z, rho)) *
                             _density_r("cauchy", d, t, math.hypot(z - dist, rho)))
            return _quad(g, 0.0, spread) + _quad(g, spread, math.inf)

        conv = _line_integral(radial, [0.0, dist], spread)
    return abs(exact - conv)


def green_from_density(kind: str, d: int, x, y) -> float:
    """``int_0^inf p_t(x, y) dt`` with ``t = e^u``."""
    d = int(d)
    if (kind == "gaussian" and d < 3) or (kind == "cauchy" and d < 2):
        raise InvalidInputError(f"{kind} motion is recurrent in d = {d}")
    dist = _dist(x, y)
    if dist == 0.0:
        raise InvalidInputError("Green function is singular on the diagonal")
    f = lambda u: _density_r(kind, d, math.exp(u), dist) * math.exp(u)
    centre = math.log(dist * dist) if kind == "gaussian" else math.log(dist)
    # in log-time the integrand decays at least like exp(-|u|/2) on both sides
    return _line_integral(f, [centre], 10.0, LOG_TIME_SPAN)


def matching_spec(kind: str, d: int) -> GreenKernelSpec:
    """Elliptic kernel that ``green_from_density(kind, d)`` should reproduce."""
    if kind == "gaussian":
        return GreenKernelSpec("newtonian", d)
    return GreenKernelSpec("riesz", d, 1.0)


def spacetime_green_eval(d: int, p: SpaceTimePoint, q: SpaceTimePoint) -> float:
    """``p_{r-s}(x, y)`` for the gaussian density, 0 when ``r <= s``."""
    lag = p.r - q.r
    if lag <= 0:
        return 0.0
    return density_eval("gaussian", d, lag, p.x, q.x)


def spacetime_time_integral(d: int, x, y, r: float = 0.0) -> float:
    """``int_R G~((x, r), (y, s)) ds``; equals the Newtonian kernel for ``d >= 3``."""
    if d < 3:
        raise InvalidInputError("the time integral diverges for d < 3")
    p = SpaceTimePoint(x, r)
    dist = _dist(x, y)
    if dist == 0.0:
        raise InvalidInputError("time integral is singular on the diagonal")
    f = lambda u: spacetime_green_eval(d, p, SpaceTimePoint(y, r - math.exp(u))) * math.exp(u)
    return _line_integral(f, [math.log(dist * dist)], 10.0, LOG_TIME_SPAN)
