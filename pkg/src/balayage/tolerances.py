"""Single table of check thresholds; ``TOLERANCE_VERSION`` changes whenever a value does."""

from __future__ import annotations

from types import MappingProxyType
from typing import Mapping, Optional

from .errors import InvalidInputError

TOLERANCE_VERSION = "1"

_DEFAULTS = {
    "oracle": 1e-8,            # potential/harmonic/reduced vs linear-solve and LP oracles
    "hunt": 1e-10,             # G_V - (K - H_V K)
    "domination": 1e-10,       # slack in the domination conclusion
    "residual": 1e-9,          # u + K^phi u - h, recomputed
    "uniqueness": 1e-9,        # sandwich vs Gauss-Seidel-from-zero
    "identity": 1e-8,          # T/P identity suite
    "monotone": 1e-11,         # monotone sequences and operator laws
    "h0_residual": 1e-9,       # minorant-search certificate on the jump chain
    "chapman_kolmogorov": 1e-6,  # relative
    "green_density": 1e-6,     # relative
    "time_integral": 1e-6,     # relative
    "solvable_gap": 1e-3,      # (h - P^phi h)(0) at the largest radius
    "nonsolvable_gap": 0.05,   # lower bound on the same gap, negated as a residual
    "ball_flip": 0.005,        # distance of the located flip from the critical exponent
    "lattice_decay": 1e-10,    # relative excess of P_t u over e^{-t/2} u
}

DEFAULTS: Mapping[str, float] = MappingProxyType(_DEFAULTS)


def tolerance_table(overrides: Optional[Mapping[str, float]] = None) -> dict:
    """Defaults with ``overrides`` applied; unknown names are rejected."""
    table = dict(_DEFAULTS)
    for name, value in (overrides or {}).items():
        if name not in table:
            raise InvalidInputError(f"unknown tolerance {name!r}; known: {', '.join(sorted(table))}")
        value = float(value)
        if not value > 0:
            raise InvalidInputError(f"tolerance {name!r} must be positive")
        table[name] = value
    return table


def parse_override(text: str) -> tuple:
    """``'name=value'`` -> ``(name, float(value))``."""
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise InvalidInputError(f"tolerance override {text!r} is not of the form name=value")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise InvalidInputError(f"tolerance override {text!r} has a non-numeric value") from None
