"""Retarded-time solution and per-pair retarded geometry.

For an observer at x_j(t) and a source trajectory r_k(s), the retarded time
is the unique s < t with |x_j(t) - r_k(s)| = c (t - s). The residual
f(s) = c(t - s) - |x_j(t) - r_k(s)| is strictly decreasing in s with slope
in [-c(1+v/c), -c(1-v/c)] for source speeds bounded by v < c, so the root is
bracketed by exponential back-off from s = t and refined by Newton steps
safeguarded inside the shrinking bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import Constants
from .errors import Collision, NoConvergence, SpeedCap
from .trajectory import TrajectoryHistory, Vec3

#: default light-cone residual tolerance factor; the absolute tolerance is
#: factor * max(1, c |t|)
DEFAULT_TOL_LC = 1e-12
#: default collision radius as a fraction of the reference length
DEFAULT_R_MIN_FACTOR = 1e-9

_MAX_ITER = 80


def lightcone_tolerance(t: float, c: float, factor: float = DEFAULT_TOL_LC) -> float:
    """Absolute residual tolerance for a retardation solve at time t."""
    return factor * max(1.0, c * abs(t))


@dataclass
class RetardedGeometry:
    """All per-pair quantities at one evaluation time.

    Fields follow the light-cone construction: s is the retarded time, R the
    vector from the source's retarded point to the observer, e its unit
    vector, w and b the source velocity and acceleration at s, kappa the
    retardation denominator c - (e, w), and tprime = ds/dt. The first-order
    derived quantities rdot, rhodot, edot are the total time derivatives of
    R, |R|, and e along both trajectories.
    """

    j: int
    k: int
    t: float
    s: float
    R: Vec3
    rho: float
    e: Vec3
    w: Vec3
    b: Vec3
    kappa: float
    tprime: float
    rdot: Vec3
    rhodot: float
    edot: Vec3
    lc_residual: float


def _solve_core(t, x_obs, source_state_fn, c, tol, d_now, hint=None):
    """Find the root of f(s) = c(t-s) - |x_obs - r_k(s)|.

    d_now is |x_obs - r_k(t)|, already computed by the caller; it gives both
    f(t) and the first back-off scale (exact for a static source).
    """

    def f_df(s):
        r, v = source_state_fn(s)
        d = x_obs - r
        rho = float(np.linalg.norm(d))
        fs = c * (t - s) - rho
        if rho > 0.0:
            dfs = -c + float(np.dot(d, v)) / rho
        else:
            dfs = -c
        return fs, dfs

    # bracket [lo, hi] with f(lo) >= 0 >= f(hi)
    hi, f_hi = t, -d_now
    if f_hi == 0.0:
        return t, 0.0
    delta = t - hint if (hint is not None and hint < t) else d_now / c
    if delta <= 0.0:
        delta = max(d_now / c, 1e-300)
    lo = t - delta
    f_lo, _ = f_df(lo)
    n_backoff = 0
    while f_lo < 0.0:
        delta *= 2.0
        lo = t - delta
        f_lo, _ = f_df(lo)
        n_backoff += 1
        if n_backoff > 200:
            raise NoConvergence(t, "light-cone bracket back-off did not terminate")
    if f_lo == 0.0:
        return lo, 0.0

    s = hint if (hint is not None and lo < hint < hi) else 0.5 * (lo + hi)
    best_s, best_f = s, np.inf
    for _ in range(_MAX_ITER):
        fs, dfs = f_df(s)
        if abs(fs) < abs(best_f):
            best_s, best_f = s, fs
        if abs(fs) <= tol:
            return s, fs
        if fs > 0.0:
            lo = s
        else:
            hi = s
        s_new = s - fs / dfs
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi)):
            # bracket collapsed to floating-point resolution: the root is
            # machine-accurate even if |f| noise sits above an ultra-tight tol
            return best_s, best_f
        s = s_new
    raise NoConvergence(t, "light-cone iteration budget exhausted")


def retarded_time(t: float, j: int, k: int, x_obs: Vec3, source, constants: Constants,
                  *, tol_lc: float | None = None, r_min: float = 0.0,
                  hint: float | None = None) -> float:
    """Retarded time for observer position x_obs against source charge k.

    ``source`` is any object with eval_state(k, s) / eval_acc(k, s), e.g. a
    TrajectoryHistory or the integrator's composite lookup.
    """
    if j == k:
        raise ValueError("retarded time is defined for distinct charges only")
    c = constants.c
    if tol_lc is None:
        tol_lc = lightcone_tolerance(t, c)
    r_now = source.eval_state(k, t).r
    d_now = float(np.linalg.norm(x_obs - r_now))
    if d_now < r_min:
        raise Collision(t, j, k, d_now)

    def state_fn(s):
        st = source.eval_state(k, s)
        return st.r, st.v

    s, _ = _solve_core(t, x_obs, state_fn, c, tol_lc, d_now, hint=hint)
    return s


def pair_geometry(t: float, j: int, k: int, x_obs: Vec3, v_obs: Vec3, source,
                  constants: Constants, *, tol_lc: float | None = None,
                  r_min: float = 0.0, v_cap: float = 0.999,
                  hint: float | None = None, on_clamp=None) -> RetardedGeometry:
    """Assemble the full retarded geometry of pair (j, k) at time t.

    Source velocities interpolated at or above v_cap * c (a transient the
    interpolant can produce between admissible samples) are clamped to the
    cap; ``on_clamp(k, s, speed_fraction)`` is invoked when that happens.
    """
    c = constants.c
    if float(np.linalg.norm(v_obs)) >= c:
        raise SpeedCap(t, j, float(np.linalg.norm(v_obs)) / c)
    s = retarded_time(t, j, k, x_obs, source, constants,
                      tol_lc=tol_lc, r_min=r_min, hint=hint)
    st = source.eval_state(k, s)
    w = st.v
    speed = float(np.linalg.norm(w))
    cap = v_cap * c
    if speed >= cap:
        w = w * (cap / speed)
        if on_clamp is not None:
            on_clamp(k, s, speed / c)
    b = source.eval_acc(k, s)
    R = x_obs - st.r
    rho = float(np.linalg.norm(R))
    if rho <= 0.0:
        raise Collision(t, j, k, rho)
    e = R / rho
    kappa = c - float(np.dot(e, w))
    tprime = (c - float(np.dot(e, v_obs))) / kappa
    rdot = v_obs - w * tprime
    rhodot = float(np.dot(e, rdot))
    edot = (rdot - rhodot * e) / rho
    return RetardedGeometry(
        j=j, k=k, t=t, s=s, R=R, rho=rho, e=e, w=w, b=b, kappa=kappa,
        tprime=tprime, rdot=rdot, rhodot=rhodot, edot=edot,
        lc_residual=abs(rho - c * (t - s)),
    )


# -- history-based wrappers (observer state read from the trajectory) --------


def solve_retarded_time(history: TrajectoryHistory, j: int, k: int, t: float,
                        tol_lc: float | None = None) -> float:
    """Retarded time t_jk for a committed history, observer state included."""
    x_obs = history.eval_state(j, t).r
    r_min = DEFAULT_R_MIN_FACTOR * history.l_ref
    return retarded_time(t, j, k, x_obs, history, history.constants,
                         tol_lc=tol_lc, r_min=r_min)


def geometry(history: TrajectoryHistory, j: int, k: int, t: float,
             tol_lc: float | None = None, r_min: float | None = None) -> RetardedGeometry:
    """Retarded geometry of pair (j, k) evaluated on a committed history."""
    obs = history.eval_state(j, t)
    if r_min is None:
        r_min = DEFAULT_R_MIN_FACTOR * history.l_ref
    return pair_geometry(t, j, k, obs.r, obs.v, history, history.constants,
                         tol_lc=tol_lc, r_min=r_min, v_cap=history.v_cap)
