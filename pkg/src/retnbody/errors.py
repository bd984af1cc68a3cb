"""Exception taxonomy for the simulator.

Guard exceptions (Collision, SingularPhi, SpeedCap, NoConvergence) carry the
time and indices at which the guard fired; the integrator converts them into
run terminators. Everything else signals bad input or a broken contract.
"""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SimulationError):
    """Scenario configuration failed to parse or validate."""


class EmptySystem(SimulationError):
    """A system needs at least one charge."""


class SpeedViolation(SimulationError):
    """A prescribed or appended state moves at or above the speed cap."""


class DiscontinuousPast(SimulationError):
    """A tabulated past has velocity jumps beyond tolerance."""


class OutOfRange(SimulationError):
    """Trajectory evaluation requested beyond the committed frontier."""


class JunctionMismatch(SimulationError):
    """An appended window does not continue the frontier state."""


class GridMismatch(SimulationError):
    """Two window iterates do not share a grid / charge list."""


class InvalidInitial(SimulationError):
    """The prescribed past is singular at t = 0 (collision or det below floor)."""


class OracleFailure(SimulationError):
    """An independent verification oracle did not meet its tolerance."""


class GuardTriggered(SimulationError):
    """Base for guards that bound the maximal solution interval."""

    #: terminator kind written to run results / events
    kind = "guard"

    def __init__(self, msg: str, t: float):
        super().__init__(msg)
        self.t = t


class Collision(GuardTriggered):
    """Two charges came closer than the collision radius."""

    kind = "collision"

    def __init__(self, t: float, j: int, k: int, distance: float):
        super().__init__(
            f"charges {j} and {k} collided at t={t:.6g} (distance {distance:.3e})", t
        )
        self.pair = (j, k)
        self.distance = distance


class SingularPhi(GuardTriggered):
    """The acceleration operator of some charge has (near-)zero determinant."""

    kind = "singular_phi"

    def __init__(self, t: float, j: int, det: float):
        super().__init__(f"singular acceleration operator for charge {j} at t={t:.6g} (det {det:.3e})", t)
        self.charge = j
        self.det = det


class SpeedCap(GuardTriggered):
    """A charge reached the configured fraction of the speed of light."""

    kind = "speed_cap"

    def __init__(self, t: float, j: int, speed_fraction: float):
        super().__init__(
            f"charge {j} reached {speed_fraction:.6f} c at t={t:.6g}", t
        )
        self.charge = j
        self.speed_fraction = speed_fraction


class NoConvergence(GuardTriggered):
    """An iteration budget was exhausted (fixed-point window or root solve)."""

    kind = "no_convergence"

    def __init__(self, t: float, what: str):
        super().__init__(f"no convergence at t={t:.6g}: {what}", t)
        self.what = what
