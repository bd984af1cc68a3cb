"""Method-of-steps trajectory extension with per-window fixed-point iteration.

Each window [T, T + dt] is solved by Picard iteration: delayed lookups are
served by the committed history plus the frozen previous iterate, and every
iterate is one classical Runge-Kutta (RK4) sweep of the first-order system
rdot = v, vdot = a over the window's inner grid, starting from the frontier
state. The sweep's acceleration pipeline is retardation -> fields ->
dynamics; it raises guard exceptions (collision, singular operator, speed
cap) the moment an evaluation becomes inadmissible. A failed window (guard
or no convergence) is retried at half size down to 4 inner steps, which
localizes the stopping time; at minimum size the failure terminates the run
and the last committed grid time is reported as the maximal interval.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import Constants, get_constants
from .dynamics import KinematicState, assemble, momentum_residual, solve_accel
from .errors import (
    Collision,
    GuardTriggered,
    InvalidInitial,
    NoConvergence,
    SingularPhi,
    SpeedCap,
)
from .fields import COUPLING_FORMS, pair_field_split
from .retardation import DEFAULT_R_MIN_FACTOR, lightcone_tolerance, pair_geometry
from .trajectory import State, TrajectoryHistory, Window, sup_distance

#: windows shrink no further than this many inner steps
MIN_WINDOW_STEPS = 4


@dataclass
class RunConfig:
    """Numerical parameters of one simulation run."""

    t_end: float
    window: float = 0.2
    inner_step: float = 0.02
    picard_tol: float = 1e-10
    picard_max_iter: int = 12
    det_floor: float = 1e-8
    r_min: float | None = None          # default: 1e-9 * reference length
    v_cap: float = 0.999
    tol_lc: float = 1e-12               # light-cone residual factor
    tol_res: float = 1e-8               # momentum-residual bound (recorded)
    coupling_form: str = "derived"
    units: str = "dimensionless"
    workers: int = 1

    def validate(self):
        if not (self.inner_step > 0.0 and self.window >= self.inner_step):
            raise ValueError("need window >= inner_step > 0")
        n = self.window / self.inner_step
        if abs(n - round(n)) > 1e-9:
            raise ValueError("window must be an integer multiple of inner_step")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.picard_tol <= 0.0 or self.picard_max_iter < 1:
            raise ValueError("need picard_tol > 0 and picard_max_iter >= 1")
        if self.det_floor <= 0.0 or self.tol_lc <= 0.0 or self.tol_res <= 0.0:
            raise ValueError("guard tolerances must be positive")
        if not (0.0 < self.v_cap < 1.0):
            raise ValueError("v_cap must be in (0, 1)")
        if self.coupling_form not in COUPLING_FORMS:
            raise ValueError(f"coupling_form must be one of {COUPLING_FORMS}")
        get_constants(self.units)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Event:
    t: float
    kind: str
    charge: int | None = None
    pair: tuple[int, int] | None = None
    value: float | None = None


@dataclass
class Terminator:
    kind: str
    t: float | None = None
    charge: int | None = None
    pair: tuple[int, int] | None = None
    value: float | None = None


@dataclass
class WindowLog:
    t_start: float
    t_end: float
    n_sub: int
    iterations: int
    distances: list[float]

    @property
    def contraction_ratios(self) -> list[float]:
        return [
            self.distances[i + 1] / self.distances[i]
            for i in range(len(self.distances) - 1)
            if self.distances[i] > 0.0
        ]


@dataclass
class Diagnostics:
    """Per committed grid node: operator determinants, proximity, speeds."""

    times: np.ndarray
    det_phi: np.ndarray        # (nodes, charges)
    min_rho: np.ndarray        # (nodes,) retarded separation, inf for n = 1
    min_dist: np.ndarray       # (nodes,) instantaneous separation
    speeds: np.ndarray         # (nodes, charges)
    residuals: np.ndarray      # (nodes, charges) momentum-force residual
    picard_iters: np.ndarray   # (nodes,) iterations of the window owning the node
    contraction: np.ndarray    # (nodes,) last contraction ratio of that window


@dataclass
class RunResult:
    history: TrajectoryHistory
    t_max: float
    terminator: Terminator
    events: list[Event]
    diagnostics: Diagnostics
    window_logs: list[WindowLog]
    max_lc_residual_norm: float
    config: RunConfig

    @property
    def completed(self) -> bool:
        return self.terminator.kind == "completed"


@dataclass
class _NodeDiag:
    t: float
    det: np.ndarray
    min_rho: float
    min_dist: float
    speeds: np.ndarray
    residuals: np.ndarray


class CompositeLookup:
    """Committed history extended by a frozen window iterate.

    Serves delayed source lookups during Picard iteration: times at or
    before the frontier come from the history, later times from the iterate.
    """

    def __init__(self, history: TrajectoryHistory, window: Window | None):
        self._history = history
        self._window = window
        self._front = history.t_front

    def eval_state(self, j: int, t: float) -> State:
        if self._window is None or t <= self._front:
            return self._history.eval_state(j, t)
        return self._window.eval_state(j, min(t, self._window.t_end))

    def eval_acc(self, j: int, t: float):
        if self._window is None or t <= self._front:
            return self._history.eval_acc(j, t)
        return self._window.eval_acc(j, min(t, self._window.t_end))


class _PipelineContext:
    """Shared state of the acceleration pipeline during one run."""

    def __init__(self, history: TrajectoryHistory, cfg: RunConfig,
                 constants: Constants, executor: ThreadPoolExecutor | None):
        self.charges = history.charges
        self.constants = constants
        self.cfg = cfg
        self.r_min = cfg.r_min if cfg.r_min is not None else DEFAULT_R_MIN_FACTOR * history.l_ref
        self.l_ref = history.l_ref
        self.executor = executor
        self.warm_starts: dict[tuple[int, int], float] = {}
        self.clamp_events: list[Event] = []
        self.max_lc_norm = 0.0

    def on_clamp(self, k: int, s: float, speed_fraction: float):
        self.clamp_events.append(Event(t=s, kind="warning_clamp", charge=k,
                                       value=speed_fraction))


def _system_accel(t: float, r_all: np.ndarray, v_all: np.ndarray,
                  lookup, ctx: _PipelineContext,
                  with_diag: bool = False):
    """Accelerations of all charges at one time level.

    Delayed source states come from ``lookup``; observer states are the
    supplied stage values. Guards raise here. The reduction over partners is
    in ascending k, and per-charge evaluations are independent, so results
    do not depend on the worker count.
    """
    n = len(ctx.charges)
    c = ctx.constants.c
    cap = ctx.cfg.v_cap * c
    tol = lightcone_tolerance(t, c, ctx.cfg.tol_lc)

    def eval_charge(j: int):
        v_obs = v_all[j]
        speed = float(np.linalg.norm(v_obs))
        if speed >= cap:
            raise SpeedCap(t, j, speed / c)
        kin = KinematicState.from_velocity(v_obs, ctx.charges[j].m0, c)
        geoms = []
        splits = []
        min_rho = math.inf
        min_dist = math.inf
        for k in range(n):
            if k == j:
                continue
            dist = float(np.linalg.norm(r_all[j] - r_all[k]))
            if dist < ctx.r_min:
                raise Collision(t, j, k, dist)
            min_dist = min(min_dist, dist)
            g = pair_geometry(
                t, j, k, r_all[j], v_obs, lookup, ctx.constants,
                tol_lc=tol, r_min=ctx.r_min, v_cap=ctx.cfg.v_cap,
                hint=ctx.warm_starts.get((j, k)), on_clamp=ctx.on_clamp,
            )
            ctx.warm_starts[(j, k)] = g.s
            norm = g.lc_residual / max(1.0, c * abs(t))
            if norm > ctx.max_lc_norm:
                ctx.max_lc_norm = norm
            min_rho = min(min_rho, g.rho)
            geoms.append(g)
            splits.append(pair_field_split(g, v_obs, ctx.charges[k].q,
                                           ctx.constants, ctx.cfg.coupling_form))
        asm = assemble(j, geoms, kin, splits, ctx.charges[j], ctx.constants)
        a = solve_accel(asm, ctx.cfg.det_floor, t=t, j=j)
        resid = math.nan
        if with_diag:
            pair_fields = [(g.e, s.e_hist + s.couple @ a) for g, s in zip(geoms, splits)]
            resid = momentum_residual(ctx.charges[j], kin, a, pair_fields, ctx.constants)
        return a, asm.det, min_rho, min_dist, speed, resid

    if ctx.executor is None or n < 2:
        results = [eval_charge(j) for j in range(n)]
    else:
        results = list(ctx.executor.map(eval_charge, range(n)))

    a_all = np.array([res[0] for res in results])
    if not with_diag:
        return a_all, None
    diag = _NodeDiag(
        t=t,
        det=np.array([res[1] for res in results]),
        min_rho=min(res[2] for res in results),
        min_dist=min(res[3] for res in results),
        speeds=np.array([res[4] for res in results]),
        residuals=np.array([res[5] for res in results]),
    )
    return a_all, diag


def _rk4_sweep(times: np.ndarray, r0: np.ndarray, v0: np.ndarray,
               lookup, ctx: _PipelineContext) -> Window:
    """One Picard iterate: RK4 over the window grid with frozen delayed lookups."""
    n_nodes = len(times)
    r = np.empty((n_nodes,) + r0.shape)
    v = np.empty_like(r)
    a = np.empty_like(r)
    r[0], v[0] = r0, v0
    for i in range(n_nodes - 1):
        t0 = float(times[i])
        h = float(times[i + 1]) - t0
        a1, _ = _system_accel(t0, r[i], v[i], lookup, ctx)
        a[i] = a1
        k1r, k1v = v[i], a1
        r2 = r[i] + 0.5 * h * k1r
        k2r = v[i] + 0.5 * h * k1v
        k2v, _ = _system_accel(t0 + 0.5 * h, r2, k2r, lookup, ctx)
        r3 = r[i] + 0.5 * h * k2r
        k3r = v[i] + 0.5 * h * k2v
        k3v, _ = _system_accel(t0 + 0.5 * h, r3, k3r, lookup, ctx)
        r4 = r[i] + h * k3r
        k4r = v[i] + h * k3v
        k4v, _ = _system_accel(t0 + h, r4, k4r, lookup, ctx)
        r[i + 1] = r[i] + (h / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        v[i + 1] = v[i] + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    a[-1], _ = _system_accel(float(times[-1]), r[-1], v[-1], lookup, ctx)
    return Window(times, r, v, a)


def detect_events(diag: _NodeDiag, cfg: RunConfig, r_min: float) -> Terminator | None:
    """Map guard violations in one node's diagnostics to a terminator."""
    if diag.min_dist < r_min:
        return Terminator(kind="collision", t=diag.t, value=diag.min_dist)
    for j, det in enumerate(diag.det):
        if abs(det) < cfg.det_floor:
            return Terminator(kind="singular_phi", t=diag.t, charge=j, value=float(det))
    for j, speed in enumerate(diag.speeds):
        if speed >= cfg.v_cap * cfg_speed_of_light(cfg):
            return Terminator(kind="speed_cap", t=diag.t, charge=j,
                              value=float(speed) / cfg_speed_of_light(cfg))
    return None


def cfg_speed_of_light(cfg: RunConfig) -> float:
    return get_constants(cfg.units).c


def picard_window(history: TrajectoryHistory, cfg: RunConfig,
                  t_start: float | None = None, t_target: float | None = None,
                  ctx: _PipelineContext | None = None):
    """Solve one window by fixed-point iteration.

    Returns (window, log, node diagnostics). The seed is constant-velocity
    extrapolation of the frontier state; each iterate integrates with
    delayed lookups into (history union previous iterate); convergence is
    sup_distance <= picard_tol. After convergence a final pass recomputes
    the node accelerations self-consistently against the converged window
    and gathers diagnostics; any guard violation there raises as well.
    """
    cfg.validate()
    constants = get_constants(cfg.units)
    if ctx is None:
        ctx = _PipelineContext(history, cfg, constants, None)
    if t_start is None:
        t_start = history.t_front
    if t_target is None:
        t_target = t_start + cfg.window
    n_sub = max(1, round((t_target - t_start) / cfg.inner_step))
    times = np.linspace(t_start, t_target, n_sub + 1)

    r0, v0 = history.state_all(t_start)
    offsets = (times - t_start)[:, None, None]
    seed = Window(times, r0[None, :, :] + v0[None, :, :] * offsets,
                  np.broadcast_to(v0, (n_sub + 1,) + v0.shape).copy(),
                  np.zeros((n_sub + 1,) + v0.shape))

    prev = seed
    distances: list[float] = []
    converged = False
    for _ in range(cfg.picard_max_iter):
        lookup = CompositeLookup(history, prev)
        new = _rk4_sweep(times, r0, v0, lookup, ctx)
        d = sup_distance(new, prev, history.l_ref, constants.c)
        distances.append(d)
        prev = new
        if d <= cfg.picard_tol:
            converged = True
            break
    if not converged:
        raise NoConvergence(
            t_start,
            f"window [{t_start:.6g}, {t_target:.6g}] still moving by {distances[-1]:.3e} "
            f"after {cfg.picard_max_iter} iterations (tol {cfg.picard_tol:.1e})",
        )

    # final pass: self-consistent node accelerations and diagnostics
    lookup = CompositeLookup(history, prev)
    node_diags: list[_NodeDiag] = []
    a_final = np.empty_like(prev.a)
    for i, t in enumerate(times):
        a_final[i], diag = _system_accel(float(t), prev.r[i], prev.v[i], lookup, ctx,
                                         with_diag=True)
        node_diags.append(diag)
        term = detect_events(diag, cfg, ctx.r_min)
        if term is not None:
            raise _terminator_exception(term)
    window = Window(times, prev.r, prev.v, a_final)
    log = WindowLog(t_start=float(times[0]), t_end=float(times[-1]), n_sub=n_sub,
                    iterations=len(distances), distances=distances)
    return window, log, node_diags


def _terminator_exception(term: Terminator) -> GuardTriggered:
    if term.kind == "collision":
        return Collision(term.t, *(term.pair or (-1, -1)), term.value or 0.0)
    if term.kind == "singular_phi":
        return SingularPhi(term.t, term.charge if term.charge is not None else -1,
                           term.value or 0.0)
    if term.kind == "speed_cap":
        return SpeedCap(term.t, term.charge if term.charge is not None else -1,
                        term.value or 0.0)
    return NoConvergence(term.t or 0.0, "window diagnostics flagged a guard")


def _terminator_from_exc(exc: GuardTriggered) -> Terminator:
    value = None
    for attr in ("det", "speed_fraction", "distance"):
        if hasattr(exc, attr):
            value = float(getattr(exc, attr))
            break
    return Terminator(kind=exc.kind, t=exc.t, charge=getattr(exc, "charge", None),
                      pair=getattr(exc, "pair", None), value=value)


def run(initial: TrajectoryHistory, cfg: RunConfig) -> RunResult:
    """Extend the initial trajectory to t_end or to the first singular point.

    Identical configuration and initial data produce bit-identical results,
    for any worker count.
    """
    cfg.validate()
    constants = get_constants(cfg.units)
    if constants.name != initial.constants.name:
        raise ValueError(
            f"config units {constants.name!r} do not match the history's "
            f"{initial.constants.name!r}"
        )
    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    ctx = _PipelineContext(initial, cfg, constants, executor)
    events: list[Event] = []
    window_logs: list[WindowLog] = []
    diag_nodes: list[_NodeDiag] = []

    try:
        # nonsingularity of t = 0 before any stepping
        r0, v0 = initial.state_all(0.0)
        try:
            _system_accel(0.0, r0, v0, CompositeLookup(initial, None), ctx)
        except (Collision, SingularPhi) as exc:
            raise InvalidInitial(f"prescribed past is singular at t = 0: {exc}") from exc

        terminator = None
        dt_min = MIN_WINDOW_STEPS * cfg.inner_step
        while True:
            front = initial.t_front
            if front >= cfg.t_end - 1e-12 * max(1.0, abs(cfg.t_end)):
                terminator = Terminator(kind="completed", t=front)
                break
            dt_try = min(cfg.window, cfg.t_end - front)
            while True:
                target = cfg.t_end if front + dt_try >= cfg.t_end - 1e-12 else front + dt_try
                try:
                    window, log, nodes = picard_window(initial, cfg, t_start=front,
                                                       t_target=target, ctx=ctx)
                    break
                except GuardTriggered as exc:
                    if dt_try <= dt_min * (1.0 + 1e-9):
                        terminator = _terminator_from_exc(exc)
                        events.append(Event(t=exc.t, kind=terminator.kind,
                                            charge=terminator.charge,
                                            pair=terminator.pair,
                                            value=terminator.value))
                        break
                    dt_try = max(0.5 * dt_try, dt_min)
                    events.append(Event(t=front, kind="window_halved", value=dt_try))
            if terminator is not None:
                break
            initial.append_window(window)
            window_logs.append(log)
            diag_nodes.extend(nodes if not diag_nodes else nodes[1:])
    finally:
        if executor is not None:
            executor.shutdown()

    events.extend(ctx.clamp_events)
    diagnostics = _collect_diagnostics(diag_nodes, window_logs, initial.n_charges)
    return RunResult(
        history=initial,
        t_max=initial.t_front,
        terminator=terminator,
        events=events,
        diagnostics=diagnostics,
        window_logs=window_logs,
        max_lc_residual_norm=ctx.max_lc_norm,
        config=cfg,
    )


def _collect_diagnostics(nodes: list[_NodeDiag], logs: list[WindowLog],
                         n_charges: int) -> Diagnostics:
    n = len(nodes)
    times = np.array([d.t for d in nodes])
    det = np.array([d.det for d in nodes]).reshape(n, n_charges)
    min_rho = np.array([d.min_rho for d in nodes])
    min_dist = np.array([d.min_dist for d in nodes])
    speeds = np.array([d.speeds for d in nodes]).reshape(n, n_charges)
    residuals = np.array([d.residuals for d in nodes]).reshape(n, n_charges)
    iters = np.zeros(n)
    contraction = np.full(n, math.nan)
    pos = 0
    for w, log in enumerate(logs):
        count = log.n_sub + 1 if w == 0 else log.n_sub
        ratios = log.contraction_ratios
        iters[pos:pos + count] = log.iterations
        if ratios:
            contraction[pos:pos + count] = ratios[-1]
        pos += count
    return Diagnostics(times=times, det_phi=det, min_rho=min_rho, min_dist=min_dist,
                       speeds=speeds, residuals=residuals, picard_iters=iters,
                       contraction=contraction)


def momentum_residual_profile(history: TrajectoryHistory, cfg: RunConfig) -> np.ndarray:
    """Momentum-force residual of every committed grid node, per charge.

    Re-walks the committed data independently of the run that produced it:
    stored states and accelerations only, fields re-evaluated through the
    affine split, force applied with explicit cross products.
    """
    constants = get_constants(cfg.units)
    times = history.committed_times
    n = history.n_charges
    out = np.zeros((len(times), n))
    r_min = cfg.r_min if cfg.r_min is not None else DEFAULT_R_MIN_FACTOR * history.l_ref
    for i, t in enumerate(times):
        t = float(t)
        for j in range(n):
            st = history.eval_state(j, t)
            a = history.eval_acc(j, t)
            kin = KinematicState.from_velocity(st.v, history.charges[j].m0, constants.c)
            pair_fields = []
            for k in range(n):
                if k == j:
                    continue
                g = pair_geometry(t, j, k, st.r, st.v, history, constants,
                                  tol_lc=lightcone_tolerance(t, constants.c, cfg.tol_lc),
                                  r_min=r_min, v_cap=cfg.v_cap)
                split = pair_field_split(g, st.v, history.charges[k].q, constants,
                                         cfg.coupling_form)
                pair_fields.append((g.e, split.e_hist + split.couple @ a))
            out[i, j] = momentum_residual(history.charges[j], kin, a, pair_fields,
                                          constants)
    return out
