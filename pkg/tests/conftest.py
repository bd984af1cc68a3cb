import numpy as np
import pytest

from retnbody.constants import DIMENSIONLESS
from retnbody.retardation import geometry
from retnbody.trajectory import ChargeSpec, CircularPast, RestPast, UniformPast, make_initial

C = DIMENSIONLESS.c


def make_two_charge_history(past_obs, past_src, q_obs=1.0, q_src=1.0, m0=1.0):
    return make_initial(
        [ChargeSpec(q_obs, m0, "obs"), ChargeSpec(q_src, m0, "src")],
        [past_obs, past_src],
    )


def static_pair_history(d, q1=1.0, q2=1.0, m0=1.0):
    """Observer at (d,0,0), source at the origin, both at rest forever."""
    return make_two_charge_history(RestPast([d, 0.0, 0.0]), RestPast([0.0, 0.0, 0.0]),
                                   q_obs=q1, q_src=q2, m0=m0)


def random_admissible_pair(rng, max_beta=0.9):
    """Random observer/source pasts with all speeds below max_beta * c."""
    def random_past():
        kind = rng.integers(0, 3)
        if kind == 0:
            return RestPast(rng.normal(size=3))
        if kind == 1:
            u = rng.normal(size=3)
            u *= rng.uniform(0.0, max_beta) * C / max(np.linalg.norm(u), 1e-12)
            return UniformPast(rng.normal(size=3), u)
        radius = rng.uniform(0.2, 2.0)
        omega = rng.uniform(-1.0, 1.0) * max_beta * C / radius
        return CircularPast(rng.normal(size=3), radius, omega, phase=rng.uniform(0, 6.28))

    while True:
        obs, src = random_past(), random_past()
        hist = make_two_charge_history(obs, src)
        t = rng.uniform(-3.0, 0.0)
        sep = np.linalg.norm(hist.eval_state(0, t).r - hist.eval_state(1, t).r)
        if sep > 0.3:
            return hist, t


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def random_geometry(rng, max_beta=0.9):
    hist, t = random_admissible_pair(rng, max_beta=max_beta)
    return geometry(hist, 0, 1, t), hist, t
