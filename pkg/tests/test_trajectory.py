import numpy as np
import pytest

from retnbody.constants import DIMENSIONLESS
from retnbody.errors import (
    DiscontinuousPast,
    EmptySystem,
    GridMismatch,
    JunctionMismatch,
    OutOfRange,
    SpeedViolation,
)
from retnbody.trajectory import (
    ChargeSpec,
    CircularPast,
    RestPast,
    TablePast,
    UniformPast,
    Window,
    load_past_table,
    make_initial,
    sup_distance,
)

C = DIMENSIONLESS.c


def single_charge(past):
    return make_initial([ChargeSpec(q=1.0, m0=1.0, label="a")], [past])


def synth_window(times, fn):
    """Window for one charge from analytic r(t), v(t), a(t) callables."""
    r = np.array([[fn[0](t)] for t in times])
    v = np.array([[fn[1](t)] for t in times])
    a = np.array([[fn[2](t)] for t in times])
    return Window(np.asarray(times, dtype=float), r, v, a)


# half-amplitude sine keeps all speeds at 0.5 c, under the default cap
SINE = (
    lambda t: np.array([0.5 * np.sin(t), 0.0, 0.0]),
    lambda t: np.array([0.5 * np.cos(t), 0.0, 0.0]),
    lambda t: np.array([-0.5 * np.sin(t), 0.0, 0.0]),
)


class TestPasts:
    def test_rest_state_anywhere(self):
        hist = single_charge(RestPast([0.0, 0.0, 0.0]))
        s = hist.eval_state(0, -5.0)
        assert np.array_equal(s.r, [0.0, 0.0, 0.0])
        assert np.array_equal(s.v, [0.0, 0.0, 0.0])

    def test_uniform_linear_motion(self):
        hist = single_charge(UniformPast([1.0, 0.0, 0.0], [0.5 * C, 0.0, 0.0]))
        s = hist.eval_state(0, -2.0)
        assert np.allclose(s.r, [1.0 - C, 0.0, 0.0], rtol=0, atol=1e-15)
        assert np.array_equal(s.v, [0.5 * C, 0.0, 0.0])

    def test_circular_kinematics(self):
        rho0, omega = 2.0, 0.1
        past = CircularPast(center=[0, 0, 0], radius=rho0, omega=omega)
        hist = single_charge(past)
        for t in (-8.3, -1.0, 0.0):
            r, v = past.state(t)
            assert np.linalg.norm(r) == pytest.approx(rho0, abs=1e-14)
            assert np.linalg.norm(v) == pytest.approx(rho0 * omega, abs=1e-14)
            assert abs(np.dot(r, v)) < 1e-14
            assert np.linalg.norm(hist.eval_acc(0, t)) == pytest.approx(rho0 * omega**2, abs=1e-14)

    def test_uniform_past_zero_acc(self):
        hist = single_charge(UniformPast([0, 0, 0], [0.1, 0.2, 0.0]))
        assert np.array_equal(hist.eval_acc(0, -3.0), np.zeros(3))

    def test_table_speed_violation(self):
        times = np.array([-1.0, 0.0])
        r = np.zeros((2, 3))
        v = np.array([[0.999 * C, 0, 0], [0.999 * C, 0, 0]])
        with pytest.raises(SpeedViolation):
            make_initial([ChargeSpec(1.0, 1.0, "a")], [TablePast(times, r, v)], v_cap=0.99)

    def test_empty_system(self):
        with pytest.raises(EmptySystem):
            make_initial([], [])

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            make_initial(
                [ChargeSpec(1, 1, "x"), ChargeSpec(1, 1, "x")],
                [RestPast([0, 0, 0]), RestPast([1, 0, 0])],
            )

    def test_table_velocity_jump(self):
        times = np.array([-2.0, -1.0, 0.0])
        v = np.array([[0.0, 0, 0], [0.4 * C, 0, 0], [0.0, 0, 0]])
        r = np.zeros((3, 3))
        with pytest.raises(DiscontinuousPast):
            make_initial([ChargeSpec(1, 1, "a")], [TablePast(times, r, v)], past_jump_tol=0.25)

    def test_table_requires_t0(self):
        with pytest.raises(ValueError):
            TablePast(np.array([-2.0, -1.0]), np.zeros((2, 3)), np.zeros((2, 3)))

    def test_table_constant_velocity_before_first_sample(self):
        times = np.array([-1.0, 0.0])
        v = np.array([[0.1, 0, 0], [0.1, 0, 0]])
        r = np.array([[-0.1, 0, 0], [0.0, 0, 0]])
        past = TablePast(times, r, v)
        r5, v5 = past.state(-5.0)
        assert np.allclose(r5, [-0.5, 0, 0], atol=1e-15)
        assert np.array_equal(v5, [0.1, 0, 0])
        assert np.array_equal(past.acc(-5.0), np.zeros(3))

    def test_table_reproduces_smooth_motion(self):
        # tabulated circular motion: interpolation error well under h^3 scale
        omega = 0.5
        times = np.linspace(-4.0, 0.0, 81)
        ref = CircularPast([0, 0, 0], 1.0, omega, phase=1.0)
        r = np.array([ref.state(t)[0] for t in times])
        v = np.array([ref.state(t)[1] for t in times])
        past = TablePast(times, r, v)
        probes = np.linspace(-3.9, -0.1, 57)
        err = max(np.linalg.norm(past.state(t)[0] - ref.state(t)[0]) for t in probes)
        assert err < 1e-7

    def test_load_past_table(self, tmp_path):
        path = tmp_path / "past.csv"
        path.write_text(
            "t,charge,rx,ry,rz,vx,vy,vz\n"
            "-1.0,a,-0.1,0,0,0.1,0,0\n"
            "0.0,a,0,0,0,0.1,0,0\n"
            "-1.0,b,1,0,0,0,0,0\n"
            "0.0,b,1,0,0,0,0,0\n"
        )
        pasts = load_past_table(path)
        assert set(pasts) == {"a", "b"}
        r, v = pasts["a"].state(0.0)
        assert np.array_equal(r, [0, 0, 0])
        assert np.array_equal(v, [0.1, 0, 0])

    def test_load_past_table_bad_header(self, tmp_path):
        path = tmp_path / "past.csv"
        path.write_text("time,charge\n0,a\n")
        with pytest.raises(ValueError):
            load_past_table(path)


class TestDenseEval:
    def test_out_of_range(self):
        hist = single_charge(RestPast([0, 0, 0]))
        with pytest.raises(OutOfRange):
            hist.eval_state(0, 0.5)

    def test_committed_uniform_exact(self):
        # Hermite is exact on cubics, so a sampled straight line reproduces
        # the line to machine precision between nodes
        v0 = np.array([0.3, -0.2, 0.1])
        hist = single_charge(UniformPast([0, 0, 0], v0))
        times = np.linspace(0.0, 2.0, 11)
        win = Window(
            times,
            np.array([[v0 * t] for t in times]),
            np.array([[v0] for t in times]),
            np.array([[np.zeros(3)] for t in times]),
        )
        hist.append_window(win)
        for t in (0.123, 0.777, 1.995):
            s = hist.eval_state(0, t)
            assert np.allclose(s.r, v0 * t, rtol=0, atol=5e-16)
            assert np.allclose(s.v, v0, rtol=0, atol=5e-16)

    def test_grid_nodes_bit_exact(self):
        hist = single_charge(UniformPast([0, 0, 0], [0.5, 0, 0]))
        times = np.linspace(0.0, 1.0, 6)
        win = synth_window(times, SINE)
        # junction needs matching state: sin(0)=0, cos(0)=1 matches the past
        hist.append_window(win)
        for i, t in enumerate(times):
            s = hist.eval_state(0, t)
            assert np.array_equal(s.r, win.r[i, 0])
            assert np.array_equal(s.v, win.v[i, 0])
            assert np.array_equal(hist.eval_acc(0, t), win.a[i, 0])

    def test_hermite_order_on_sine(self):
        # position and velocity interpolation error drop ~h^4 when h halves
        errs_r, errs_v = [], []
        for n in (10, 20, 40):
            hist = single_charge(UniformPast([0, 0, 0], [0.5, 0, 0]))
            times = np.linspace(0.0, 2.0, n + 1)
            hist.append_window(synth_window(times, SINE))
            probes = np.linspace(0.0, 2.0, 403)
            er = ev = 0.0
            for t in probes:
                s = hist.eval_state(0, t)
                er = max(er, abs(s.r[0] - 0.5 * np.sin(t)))
                ev = max(ev, abs(s.v[0] - 0.5 * np.cos(t)))
            errs_r.append(er)
            errs_v.append(ev)
        orders_r = np.log2(np.array(errs_r[:-1]) / np.array(errs_r[1:]))
        orders_v = np.log2(np.array(errs_v[:-1]) / np.array(errs_v[1:]))
        assert np.all(orders_r >= 3.5), orders_r
        assert np.all(orders_v >= 3.5), orders_v

    def test_acc_from_velocity_interpolant(self):
        hist = single_charge(UniformPast([0, 0, 0], [0.5, 0, 0]))
        times = np.linspace(0.0, 2.0, 41)
        hist.append_window(synth_window(times, SINE))
        for t in (0.31, 1.27):
            assert hist.eval_acc(0, t)[0] == pytest.approx(-0.5 * np.sin(t), abs=1e-6)


class TestAppendWindow:
    def make_hist(self):
        hist = single_charge(UniformPast([0, 0, 0], [0.5, 0, 0]))
        hist.append_window(synth_window(np.linspace(0.0, 1.0, 11), SINE))
        return hist

    def test_frontier_advances(self):
        hist = self.make_hist()
        assert hist.t_front == 1.0
        hist.append_window(synth_window(np.linspace(1.0, 1.5, 6), SINE))
        assert hist.t_front == 1.5

    def test_junction_mismatch(self):
        hist = self.make_hist()
        win = synth_window(np.linspace(1.0, 1.5, 6), SINE)
        win.r[0, 0, 0] += 1e-9
        with pytest.raises(JunctionMismatch):
            hist.append_window(win)

    def test_append_only(self):
        hist = self.make_hist()
        probes = np.linspace(0.0, 1.0, 37)
        before = [hist.eval_state(0, t) for t in probes]
        hist.append_window(synth_window(np.linspace(1.0, 2.0, 11), SINE))
        for t, s in zip(probes, before):
            after = hist.eval_state(0, t)
            assert np.array_equal(after.r, s.r)
            assert np.array_equal(after.v, s.v)

    def test_superluminal_window_rejected(self):
        hist = self.make_hist()
        times = np.linspace(1.0, 1.5, 6)
        win = synth_window(times, SINE)
        win.v[3, 0] = np.array([1.5, 0.0, 0.0])  # 1.5 c
        with pytest.raises(SpeedViolation):
            hist.append_window(win)


class TestSupDistance:
    def make_pair(self):
        times = np.linspace(0.0, 1.0, 5)
        rng = np.random.default_rng(7)
        r = rng.normal(size=(5, 2, 3))
        v = rng.normal(scale=0.1, size=(5, 2, 3))
        a = rng.normal(scale=0.1, size=(5, 2, 3))
        return Window(times, r, v, a)

    def test_zero_on_identical(self):
        w = self.make_pair()
        w2 = Window(w.times.copy(), w.r.copy(), w.v.copy(), w.a.copy())
        assert sup_distance(w, w2, l_ref=1.0, c=C) == 0.0

    def test_velocity_perturbation(self):
        w = self.make_pair()
        w2 = Window(w.times.copy(), w.r.copy(), w.v.copy(), w.a.copy())
        w2.v[2, 1] = w.v[2, 1] + np.array([0.01 * C, 0.0, 0.0])
        assert sup_distance(w, w2, l_ref=1.0, c=C) == pytest.approx(0.01, rel=1e-12)

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(42)
        times = np.linspace(0.0, 1.0, 4)
        for _ in range(50):
            wins = [
                Window(
                    times,
                    rng.normal(size=(4, 2, 3)),
                    rng.normal(scale=0.2, size=(4, 2, 3)),
                    rng.normal(scale=0.2, size=(4, 2, 3)),
                )
                for _ in range(3)
            ]
            a, b, c3 = wins
            dab = sup_distance(a, b, 2.0, C)
            dba = sup_distance(b, a, 2.0, C)
            dac = sup_distance(a, c3, 2.0, C)
            dcb = sup_distance(c3, b, 2.0, C)
            assert dab == dba
            assert dab <= dac + dcb + 1e-15

    def test_grid_mismatch(self):
        w = self.make_pair()
        other = Window(w.times + 0.5, w.r, w.v, w.a)
        with pytest.raises(GridMismatch):
            sup_distance(w, other, 1.0, C)


class TestChargeSpec:
    def test_bad_mass(self):
        with pytest.raises(ValueError):
            ChargeSpec(q=1.0, m0=0.0, label="x")

    def test_bad_charge(self):
        with pytest.raises(ValueError):
            ChargeSpec(q=float("nan"), m0=1.0, label="x")
