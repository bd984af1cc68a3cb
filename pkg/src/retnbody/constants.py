"""Unit systems.

The default unit system is dimensionless: c = 1 and the Coulomb constant
1/(4*pi*eps0) = 1, which keeps desk-scale test problems around unit magnitude.
SI is supported for production-style runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Constants:
    """Physical constants of a unit system."""

    c: float          # speed of light
    coulomb: float    # 1 / (4 pi eps0)
    name: str = "custom"


DIMENSIONLESS = Constants(c=1.0, coulomb=1.0, name="dimensionless")

_EPS0_SI = 8.8541878128e-12
SI = Constants(c=299792458.0, coulomb=1.0 / (4.0 * math.pi * _EPS0_SI), name="SI")

_SYSTEMS = {"dimensionless": DIMENSIONLESS, "SI": SI, "si": SI}


def get_constants(units: str) -> Constants:
    try:
        return _SYSTEMS[units]
    except KeyError:
        raise ValueError(f"unknown unit system {units!r} (expected 'dimensionless' or 'SI')") from None
