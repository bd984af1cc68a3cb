"""Relativistic N-body simulation of point charges with retarded interactions."""

from .constants import Constants, DIMENSIONLESS, SI, get_constants
from .trajectory import (
    ChargeSpec,
    CircularPast,
    RestPast,
    State,
    TablePast,
    TrajectoryHistory,
    UniformPast,
    Window,
    load_past_table,
    make_initial,
    sup_distance,
)

__version__ = "0.1.0"

__all__ = [
    "ChargeSpec",
    "CircularPast",
    "Constants",
    "DIMENSIONLESS",
    "RestPast",
    "SI",
    "State",
    "TablePast",
    "TrajectoryHistory",
    "UniformPast",
    "Window",
    "get_constants",
    "load_past_table",
    "make_initial",
    "sup_distance",
]
