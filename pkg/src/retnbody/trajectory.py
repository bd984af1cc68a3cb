"""Charge specifications and dense-in-time trajectory storage.

A trajectory history holds a prescribed past (t <= 0, analytic or tabulated)
plus an append-only committed region (t in [0, T_front]) sampled on the
integration grid. Dense evaluation anywhere at or before the frontier uses
cubic Hermite interpolation: positions with stored velocities as slopes,
velocities with stored accelerations as slopes, accelerations as the exact
derivative of the velocity interpolant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import Constants, DIMENSIONLESS
from .errors import (
    DiscontinuousPast,
    EmptySystem,
    GridMismatch,
    JunctionMismatch,
    OutOfRange,
    SpeedViolation,
)

Vec3 = np.ndarray

#: slack for "is t at/before the frontier" comparisons, relative to |T_front|
_FRONTIER_SLACK = 1e-12
#: junction agreement required when appending a window
_JUNCTION_TOL = 1e-12


@dataclass(frozen=True)
class ChargeSpec:
    """Physical constants of one particle."""

    q: float
    m0: float
    label: str = ""

    def __post_init__(self):
        if not np.isfinite(self.q):
            raise ValueError(f"charge q must be finite, got {self.q}")
        if not (np.isfinite(self.m0) and self.m0 > 0):
            raise ValueError(f"rest mass m0 must be positive, got {self.m0}")


@dataclass(frozen=True)
class State:
    """Position and velocity of one charge at one time."""

    r: Vec3
    v: Vec3


# ---------------------------------------------------------------------------
# Prescribed pasts (t <= 0)
# ---------------------------------------------------------------------------


class RestPast:
    """Charge at rest at a fixed point for all t <= 0."""

    def __init__(self, r0):
        self.r0 = np.asarray(r0, dtype=float)

    def state(self, t: float) -> tuple[Vec3, Vec3]:
        return self.r0.copy(), np.zeros(3)

    def acc(self, t: float) -> Vec3:
        return np.zeros(3)

    def max_speed(self) -> float:
        return 0.0


class UniformPast:
    """Straight-line motion r0 + v*t for all t <= 0."""

    def __init__(self, r0, v):
        self.r0 = np.asarray(r0, dtype=float)
        self.v = np.asarray(v, dtype=float)

    def state(self, t: float) -> tuple[Vec3, Vec3]:
        return self.r0 + self.v * t, self.v.copy()

    def acc(self, t: float) -> Vec3:
        return np.zeros(3)

    def max_speed(self) -> float:
        return float(np.linalg.norm(self.v))


class CircularPast:
    """Uniform circular motion about a fixed center for all t <= 0.

    The orbit plane is normal to ``axis``; ``phase`` sets the angular
    position at t = 0.
    """

    def __init__(self, center, radius: float, omega: float, phase: float = 0.0, axis=(0.0, 0.0, 1.0)):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.omega = float(omega)
        self.phase = float(phase)
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise ValueError("circular past axis must be nonzero")
        self.axis = axis / n
        # deterministic in-plane frame: seed with the coordinate axis least
        # aligned with the rotation axis
        seed = np.zeros(3)
        seed[int(np.argmin(np.abs(self.axis)))] = 1.0
        u1 = seed - np.dot(seed, self.axis) * self.axis
        self.u1 = u1 / np.linalg.norm(u1)
        self.u2 = np.cross(self.axis, self.u1)

    def _angle(self, t: float) -> float:
        return self.omega * t + self.phase

    def state(self, t: float) -> tuple[Vec3, Vec3]:
        a = self._angle(t)
        radial = np.cos(a) * self.u1 + np.sin(a) * self.u2
        tangent = -np.sin(a) * self.u1 + np.cos(a) * self.u2
        return self.center + self.radius * radial, self.radius * self.omega * tangent

    def acc(self, t: float) -> Vec3:
        a = self._angle(t)
        radial = np.cos(a) * self.u1 + np.sin(a) * self.u2
        return -self.radius * self.omega**2 * radial

    def max_speed(self) -> float:
        return abs(self.radius * self.omega)


class TablePast:
    """Sampled past on a strictly increasing grid of times <= 0.

    The table must end exactly at t = 0 so the junction with the solved
    region is well defined. Between samples, position and velocity are cubic
    Hermite interpolants; node accelerations are estimated from the velocity
    samples with a 3-point Lagrange derivative stencil (one-sided at the
    ends, plain difference for 2-sample tables). Before the earliest sample
    the motion continues backward with constant velocity.
    """

    def __init__(self, times, r, v):
        self.times = np.asarray(times, dtype=float)
        self.r = np.asarray(r, dtype=float)
        self.v = np.asarray(v, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 1:
            raise ValueError("table past needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("table past times must be strictly increasing")
        if np.any(self.times > 0.0):
            raise ValueError("table past times must be <= 0")
        if abs(self.times[-1]) > 1e-12:
            raise ValueError("table past must include a sample at t = 0")
        if self.r.shape != (len(self.times), 3) or self.v.shape != self.r.shape:
            raise ValueError("table past arrays must have shape (n_samples, 3)")
        self.a = _estimate_derivatives(self.times, self.v)

    def state(self, t: float) -> tuple[Vec3, Vec3]:
        if t <= self.times[0]:
            dt = t - self.times[0]
            return self.r[0] + self.v[0] * dt, self.v[0].copy()
        r = _hermite_eval(self.times, self.r, self.v, t)
        v = _hermite_eval(self.times, self.v, self.a, t)
        return r, v

    def acc(self, t: float) -> Vec3:
        if t <= self.times[0]:
            return np.zeros(3)
        return _hermite_eval_derivative(self.times, self.v, self.a, t)

    def max_speed(self) -> float:
        # probe inside intervals too: the Hermite interpolant can overshoot
        # the node speeds
        speeds = [float(np.max(np.linalg.norm(self.v, axis=1)))]
        for i in range(len(self.times) - 1):
            for theta in (0.25, 0.5, 0.75):
                t = self.times[i] + theta * (self.times[i + 1] - self.times[i])
                speeds.append(float(np.linalg.norm(self.state(t)[1])))
        return max(speeds)

    def max_velocity_jump(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(self.v, axis=0), axis=1)))


def load_past_table(path) -> dict[str, TablePast]:
    """Read a sampled past from CSV with header t,charge,rx,ry,rz,vx,vy,vz.

    Returns one TablePast per charge label. Times must be <= 0 and strictly
    increasing per charge.
    """
    rows: dict[str, list[tuple[float, list[float], list[float]]]] = {}
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["t", "charge", "rx", "ry", "rz", "vx", "vy", "vz"]
        if reader.fieldnames is None or list(reader.fieldnames) != expected:
            raise ValueError(f"past table {path}: expected header {','.join(expected)}")
        for row in reader:
            t = float(row["t"])
            r = [float(row["rx"]), float(row["ry"]), float(row["rz"])]
            v = [float(row["vx"]), float(row["vy"]), float(row["vz"])]
            rows.setdefault(row["charge"], []).append((t, r, v))
    out = {}
    for label, samples in rows.items():
        times = np.array([s[0] for s in samples])
        r = np.array([s[1] for s in samples])
        v = np.array([s[2] for s in samples])
        out[label] = TablePast(times, r, v)
    return out


# ---------------------------------------------------------------------------
# Cubic Hermite dense output
# ---------------------------------------------------------------------------


def _hermite_eval(times: np.ndarray, values: np.ndarray, slopes: np.ndarray, t: float) -> Vec3:
    """Evaluate the piecewise cubic Hermite interpolant at t.

    Node times are returned bit-exactly from storage.
    """
    i = int(np.searchsorted(times, t))
    if i < len(times) and times[i] == t:
        return values[i].copy()
    i -= 1
    h = times[i + 1] - times[i]
    s = (t - times[i]) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * values[i] + h10 * h * slopes[i] + h01 * values[i + 1] + h11 * h * slopes[i + 1]


def _hermite_eval_derivative(times: np.ndarray, values: np.ndarray, slopes: np.ndarray, t: float) -> Vec3:
    """Derivative of the piecewise cubic Hermite interpolant at t."""
    i = int(np.searchsorted(times, t))
    if i < len(times) and times[i] == t:
        return slopes[i].copy()
    i -= 1
    h = times[i + 1] - times[i]
    s = (t - times[i]) / h
    s2 = s * s
    d00 = (6.0 * s2 - 6.0 * s) / h
    d10 = 3.0 * s2 - 4.0 * s + 1.0
    d01 = (-6.0 * s2 + 6.0 * s) / h
    d11 = 3.0 * s2 - 2.0 * s
    return d00 * values[i] + d10 * slopes[i] + d01 * values[i + 1] + d11 * slopes[i + 1]


def _estimate_derivatives(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """3-point Lagrange derivative estimates at the nodes of a nonuniform grid."""
    n = len(times)
    out = np.zeros_like(values)
    if n == 1:
        return out
    if n == 2:
        out[0] = out[1] = (values[1] - values[0]) / (times[1] - times[0])
        return out
    for i in range(n):
        i0 = min(max(i - 1, 0), n - 3)
        t0, t1, t2 = times[i0], times[i0 + 1], times[i0 + 2]
        f0, f1, f2 = values[i0], values[i0 + 1], values[i0 + 2]
        t = times[i]
        w0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2))
        w1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2))
        w2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1))
        out[i] = w0 * f0 + w1 * f1 + w2 * f2
    return out


# ---------------------------------------------------------------------------
# Window iterates
# ---------------------------------------------------------------------------


@dataclass
class Window:
    """Samples of all charges on one time grid (a window iterate).

    Arrays are indexed [node, charge, component].
    """

    times: np.ndarray
    r: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @property
    def n_charges(self) -> int:
        return self.r.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def eval_state(self, j: int, t: float) -> State:
        return State(
            _hermite_eval(self.times, self.r[:, j], self.v[:, j], t),
            _hermite_eval(self.times, self.v[:, j], self.a[:, j], t),
        )

    def eval_acc(self, j: int, t: float) -> Vec3:
        return _hermite_eval_derivative(self.times, self.v[:, j], self.a[:, j], t)


def sup_distance(a: Window, b: Window, l_ref: float, c: float) -> float:
    """Scale-free sup distance between two window iterates.

    Max over grid nodes and charges of |r_a - r_b|/l_ref + |v_a - v_b|/c.
    Symmetric, zero iff the iterates agree on the grid.
    """
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatch("window iterates are on different time grids")
    if a.r.shape != b.r.shape:
        raise GridMismatch("window iterates have different charge counts")
    dr = np.linalg.norm(a.r - b.r, axis=2) / l_ref
    dv = np.linalg.norm(a.v - b.v, axis=2) / c
    return float(np.max(dr + dv))


# ---------------------------------------------------------------------------
# Trajectory history
# ---------------------------------------------------------------------------


class TrajectoryHistory:
    """Prescribed past plus committed solved samples, densely evaluable.

    Immutable between appends; appends are single-writer and never alter
    earlier data, so concurrent read-only evaluation is safe.
    """

    def __init__(self, charges: list[ChargeSpec], pasts: list, v_cap: float,
                 constants: Constants, l_ref: float):
        self.charges = list(charges)
        self.pasts = list(pasts)
        self.v_cap = float(v_cap)
        self.constants = constants
        self.l_ref = float(l_ref)
        n = len(charges)
        self._times = np.zeros(0)
        self._r = np.zeros((0, n, 3))
        self._v = np.zeros((0, n, 3))
        self._a = np.zeros((0, n, 3))

    # -- basic queries ------------------------------------------------------

    @property
    def n_charges(self) -> int:
        return len(self.charges)

    @property
    def t_front(self) -> float:
        return float(self._times[-1]) if len(self._times) else 0.0

    @property
    def committed_times(self) -> np.ndarray:
        return self._times

    @property
    def committed_r(self) -> np.ndarray:
        return self._r

    @property
    def committed_v(self) -> np.ndarray:
        return self._v

    @property
    def committed_a(self) -> np.ndarray:
        return self._a

    def _check_range(self, t: float):
        front = self.t_front
        if t > front + _FRONTIER_SLACK * max(1.0, abs(front)):
            raise OutOfRange(f"evaluation at t={t!r} beyond frontier T_front={front!r}")

    # -- dense evaluation ---------------------------------------------------

    def eval_state(self, j: int, t: float) -> State:
        """Position and velocity of charge j at any time t <= T_front."""
        self._check_range(t)
        if t < 0.0 or len(self._times) == 0:
            r, v = self.pasts[j].state(min(t, 0.0))
            return State(r, v)
        t = min(t, self.t_front)
        return State(
            _hermite_eval(self._times, self._r[:, j], self._v[:, j], t),
            _hermite_eval(self._times, self._v[:, j], self._a[:, j], t),
        )

    def eval_acc(self, j: int, t: float) -> Vec3:
        """Acceleration of charge j at any time t <= T_front.

        At t < 0 this is the past's second derivative (exact for analytic
        forms, stencil-estimated for tables); in the committed region it is
        the derivative of the velocity interpolant, which reproduces the
        stored accelerations at the grid nodes. The acceleration may jump at
        t = 0, where the solved dynamics takes over from the prescription;
        the committed (right-limit) value wins there.
        """
        self._check_range(t)
        if t < 0.0 or len(self._times) == 0:
            return self.pasts[j].acc(min(t, 0.0))
        t = min(t, self.t_front)
        return _hermite_eval_derivative(self._times, self._v[:, j], self._a[:, j], t)

    def state_all(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities of all charges at t, as (n,3) arrays."""
        rs = np.empty((self.n_charges, 3))
        vs = np.empty((self.n_charges, 3))
        for j in range(self.n_charges):
            s = self.eval_state(j, t)
            rs[j] = s.r
            vs[j] = s.v
        return rs, vs

    # -- mutation -----------------------------------------------------------

    def append_window(self, window: Window):
        """Commit a converged window whose first node sits at the frontier."""
        if window.n_charges != self.n_charges:
            raise GridMismatch("window charge count does not match the history")
        front = self.t_front
        scale = max(1.0, abs(front))
        if abs(float(window.times[0]) - front) > _JUNCTION_TOL * scale:
            raise JunctionMismatch(
                f"window starts at t={window.times[0]!r}, frontier is {front!r}"
            )
        if np.any(np.diff(window.times) <= 0):
            raise JunctionMismatch("window times must be strictly increasing")
        for j in range(self.n_charges):
            s = self.eval_state(j, front)
            dr = np.linalg.norm(window.r[0, j] - s.r)
            dv = np.linalg.norm(window.v[0, j] - s.v)
            if dr > _JUNCTION_TOL * max(1.0, self.l_ref) or dv > _JUNCTION_TOL * self.constants.c:
                raise JunctionMismatch(
                    f"charge {j} state at the junction differs by |dr|={dr:.3e}, |dv|={dv:.3e}"
                )
        speeds = np.linalg.norm(window.v, axis=2)
        cap = self.v_cap * self.constants.c
        if np.any(speeds >= cap):
            node, j = np.unravel_index(int(np.argmax(speeds)), speeds.shape)
            raise SpeedViolation(
                f"window sample for charge {j} at t={window.times[node]!r} moves at "
                f"{speeds[node, j] / self.constants.c:.6f} c (cap {self.v_cap} c)"
            )
        if len(self._times) == 0:
            sel = slice(0, None)       # first commit includes the t = 0 node
        else:
            sel = slice(1, None)       # junction node is already stored
        self._times = np.concatenate([self._times, window.times[sel]])
        self._r = np.concatenate([self._r, window.r[sel]])
        self._v = np.concatenate([self._v, window.v[sel]])
        self._a = np.concatenate([self._a, window.a[sel]])


def make_initial(charges: list[ChargeSpec], past_spec: list, v_cap: float = 0.999,
                 constants: Constants = DIMENSIONLESS, l_ref: float | None = None,
                 past_jump_tol: float = 0.25) -> TrajectoryHistory:
    """Build and validate a trajectory history from a prescribed past.

    ``past_spec`` holds one past object (RestPast / UniformPast /
    CircularPast / TablePast) per charge. Validation confirms every past
    speed stays at or below v_cap * c and that tables have no velocity jump
    larger than past_jump_tol * c between consecutive samples.
    """
    if not charges:
        raise EmptySystem("at least one charge is required")
    if len(past_spec) != len(charges):
        raise ValueError("need exactly one past per charge")
    labels = [ch.label for ch in charges if ch.label]
    if len(labels) != len(set(labels)):
        raise ValueError("charge labels must be unique")
    if not (0.0 < v_cap < 1.0):
        raise ValueError(f"v_cap must be in (0, 1), got {v_cap}")
    cap = v_cap * constants.c
    for ch, past in zip(charges, past_spec):
        speed = past.max_speed()
        if speed >= cap:
            raise SpeedViolation(
                f"past of charge {ch.label or '?'} reaches {speed / constants.c:.6f} c "
                f"(cap {v_cap} c)"
            )
        if isinstance(past, TablePast):
            jump = past.max_velocity_jump()
            if jump > past_jump_tol * constants.c:
                raise DiscontinuousPast(
                    f"past table of charge {ch.label or '?'} jumps by "
                    f"{jump / constants.c:.4f} c between samples (tol {past_jump_tol} c)"
                )
    if l_ref is None:
        l_ref = _default_l_ref(past_spec)
    return TrajectoryHistory(charges, past_spec, v_cap, constants, l_ref)


def _default_l_ref(pasts: list) -> float:
    """Minimum pairwise distance at t = 0, or 1 for a single charge."""
    r0 = [p.state(0.0)[0] for p in pasts]
    best = None
    for i in range(len(r0)):
        for j in range(i + 1, len(r0)):
            d = float(np.linalg.norm(r0[i] - r0[j]))
            best = d if best is None else min(best, d)
    if best is None or best == 0.0:
        return 1.0
    return best
