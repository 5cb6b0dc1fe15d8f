import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tankdiag.bondgraph import ThreeTankParams, three_tank
from tankdiag.plant import (FaultScenario, FaultSpec, NumericError, SimulationError, rk4_propagator,
                            simulate, steady_state)


@pytest.fixture(scope="module")
def ss():
    return three_tank()[1]


def hand_steady(p: ThreeTankParams, u1: float, u2: float):
    # outlet carries both inflows; each valve carries its own tank's inflow
    p2 = (u1 + u2) * p.R0
    return np.array([p2 + u1 * p.R1, p2, p2 + u2 * p.R2])


def one(target, magnitude, onset=50.0):
    return FaultScenario((FaultSpec(target, onset, magnitude),))


class TestFaultTypes:
    def test_kind_follows_target(self):
        assert FaultSpec("Msf2", 1.0, 0.1).kind == "actuator-bias"
        assert FaultSpec("Df1", 1.0, 0.1).kind == "sensor-bias"

    @pytest.mark.parametrize("args", [("X9", 1.0, 0.1), ("De1", -1.0, 0.1), ("De1", 1.0, 0.0)])
    def test_invalid_fault(self, args):
        with pytest.raises(ValueError):
            FaultSpec(*args)

    def test_one_fault_per_target(self):
        with pytest.raises(ValueError):
            FaultScenario((FaultSpec("De1", 1, 0.1), FaultSpec("De1", 2, 0.2)))


class TestSteadyState:
    def test_defaults(self, ss):
        np.testing.assert_allclose(steady_state(ss, (1, 1)), [3, 2, 3], atol=1e-12)

    def test_zero_input(self, ss):
        np.testing.assert_allclose(steady_state(ss, (0, 0)), 0, atol=0)

    def test_raised_inflow(self, ss):
        # p2 = 2.2, p1 = p2 + 1.2 R1, p3 = p2 + 1.0 R2
        np.testing.assert_allclose(steady_state(ss, (1.2, 1)), [3.4, 2.2, 3.2], atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.tuples(*[st.floats(0.1, 10)] * 6), st.floats(0, 5), st.floats(0, 5))
    def test_matches_hand_solution(self, raw, u1, u2):
        p = ThreeTankParams(*raw)
        model = three_tank(p)[1]
        x = steady_state(model, (u1, u2))
        np.testing.assert_allclose(x, hand_steady(p, u1, u2), rtol=1e-9, atol=1e-9)
        # mass balance at equilibrium
        assert x[1] / p.R0 == pytest.approx(u1 + u2, rel=1e-6, abs=1e-6)

    def test_singular(self, ss):
        import dataclasses
        bad = dataclasses.replace(ss, A=np.zeros((3, 3)))
        with pytest.raises(ArithmeticError):
            steady_state(bad, (1, 1))


class TestSimulate:
    def test_nominal_from_rest_converges(self, ss):
        tr = simulate(ss)
        assert np.max(np.abs(tr.true_state[-1] - [3, 2, 3])) < 1e-3
        np.testing.assert_array_equal(tr.measurements, tr.true_state @ ss.C.T)

    def test_grid(self, ss):
        tr = simulate(ss, horizon=1.0, dt=0.25)
        np.testing.assert_allclose(tr.times, [0, 0.25, 0.5, 0.75, 1.0])
        assert tr.true_state.shape == (5, 3) and tr.measurements.shape == (5, 5)

    @pytest.mark.parametrize("dt,horizon", [(0.0, 1.0), (-0.1, 1.0), (0.5, 0.1)])
    def test_bad_step(self, ss, dt, horizon):
        with pytest.raises(SimulationError):
            simulate(ss, dt=dt, horizon=horizon)

    def test_sensor_bias(self, ss):
        x0 = steady_state(ss, (1, 1))
        nom = simulate(ss, x0=x0)
        tr = simulate(ss, one("De1", 0.5), x0=x0)
        np.testing.assert_array_equal(tr.true_state, nom.true_state)
        after = tr.times >= 50
        np.testing.assert_array_equal(tr.measured("De1")[after], tr.true_state[after, 0] + 0.5)
        np.testing.assert_array_equal(tr.measured("De1")[~after], nom.measured("De1")[~after])
        for v in ("De2", "De3", "Df1", "Df2"):
            np.testing.assert_array_equal(tr.measured(v), nom.measured(v))

    @pytest.mark.parametrize("target", ["De1", "De2", "De3", "Df1", "Df2"])
    def test_sensor_faults_leave_state_untouched(self, ss, target):
        nom = simulate(ss, horizon=20)
        tr = simulate(ss, one(target, -0.3, onset=5.0), horizon=20)
        assert np.array_equal(tr.true_state, nom.true_state)

    def test_actuator_bias(self, ss):
        x0 = steady_state(ss, (1, 1))
        tr = simulate(ss, one("Msf1", 0.2), x0=x0)
        after = tr.times > 50
        assert np.all(np.diff(tr.true_state[after], axis=0) >= -1e-12)
        assert tr.true_state[-1, 1] == pytest.approx(2.2, abs=1e-3)
        np.testing.assert_array_equal(tr.commanded("Msf1"), 1.0)

    def test_deterministic(self, ss):
        sc = FaultScenario((FaultSpec("Msf2", 10, 0.3), FaultSpec("Df2", 20, 0.1)))
        a, b = simulate(ss, sc, horizon=30), simulate(ss, sc, horizon=30)
        assert np.array_equal(a.measurements, b.measurements)

    def test_noise_is_seeded(self, ss):
        a = simulate(ss, horizon=5, noise_std=0.01, seed=3)
        b = simulate(ss, horizon=5, noise_std=0.01, seed=3)
        c = simulate(ss, horizon=5)
        assert np.array_equal(a.measurements, b.measurements)
        assert not np.array_equal(a.measurements, c.measurements)

    def test_superposition(self, ss):
        x0 = steady_state(ss, (1, 1))
        nom = simulate(ss, x0=x0).measurements
        f1, f2 = FaultSpec("Msf1", 30.0, 0.2), FaultSpec("Df2", 60.0, -0.1)
        d1 = simulate(ss, FaultScenario((f1,)), x0=x0).measurements - nom
        d2 = simulate(ss, FaultScenario((f2,)), x0=x0).measurements - nom
        d12 = simulate(ss, FaultScenario((f1, f2)), x0=x0).measurements - nom
        assert np.max(np.abs(d12 - (d1 + d2))) < 1e-9

    def test_halving_dt(self, ss):
        a = simulate(ss, dt=0.01).true_state[-1]
        b = simulate(ss, dt=0.005).true_state[-1]
        assert np.max(np.abs(a - b)) < 1e-6

    def test_rk4_propagator_matches_stepping(self, ss):
        Phi, Gamma = rk4_propagator(ss.A, ss.B, 0.1)
        x, u = np.array([0.3, -1.0, 2.0]), np.array([0.5, 1.5])
        f = lambda z: ss.A @ z + ss.B @ u
        k1 = f(x); k2 = f(x + 0.05 * k1); k3 = f(x + 0.05 * k2); k4 = f(x + 0.1 * k3)
        np.testing.assert_allclose(Phi @ x + Gamma @ u, x + 0.1 / 6 * (k1 + 2 * k2 + 2 * k3 + k4), atol=1e-14)

    def test_blow_up_names_step(self, ss):
        with pytest.raises(NumericError) as exc:
            simulate(ss, dt=5.0, horizon=5000.0, x0=(1, 0, 0))
        assert exc.value.step > 0
