import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from basinforge.errors import DomainError, NonFiniteState
from basinforge.integrate import (
    IntegratorSpec,
    integrate_samples,
    integrate_to,
    poincare_series,
    taylor_run,
    taylor_step,
)
from basinforge.model import (
    TWO_PI,
    CubicParams,
    DampingSchedule,
    PendulumParams,
    State,
    cubic_field,
    pendulum_energy,
    pendulum_field,
    pendulum_rhs,
)

DOWN = PendulumParams(0.5, 0.1)
INV = PendulumParams(0.1, 0.545, "inverted")
METHODS = ["rk_adaptive", "taylor"]


def conservative():
    return pendulum_field(PendulumParams(0.5, 0.0), DampingSchedule.constant(0.0))


class TestSpec:
    @pytest.mark.parametrize("kw", [
        dict(method="euler"), dict(rel_tol=1e-16), dict(abs_tol=1e-2), dict(max_step=0.0),
        dict(taylor_order=4), dict(taylor_order=20.5),
    ])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            IntegratorSpec(**kw)

    def test_round_trip_dict(self):
        s = IntegratorSpec.reference("taylor")
        assert IntegratorSpec(**s.to_dict()) == s


class TestConservative:
    @pytest.mark.parametrize("method", METHODS)
    @pytest.mark.parametrize("y0", [[1.0, 0.0], [0.0, 1.9], [2.5, 0.3]])
    def test_energy_drift(self, method, y0):
        fld = conservative()
        times = np.linspace(0, 1000, 201)
        out = integrate_samples(y0, 0.0, times, fld, IntegratorSpec.tight(method))
        H = pendulum_energy(out[:, 0], out[:, 1], 0.5)
        assert np.max(np.abs(H - H[0])) < 1e-8

    def test_small_oscillation_frequency(self):
        fld = pendulum_field(PendulumParams(0.5, 0.0), DampingSchedule.constant(0.0))
        T = TWO_PI / math.sqrt(0.5)
        out = integrate_samples([1e-6, 0.0], 0.0, [T], fld, IntegratorSpec.tight())
        assert out[0, 0] == pytest.approx(1e-6, rel=1e-6)


class TestCrossMethod:
    @pytest.mark.parametrize("params,gamma,y0", [
        (DOWN, 0.03, [1.0, 0.5]), (DOWN, 0.1, [-2.0, 3.0]), (INV, 0.2, [0.5, -1.0]),
        (INV, 0.2725, [2.9, 3.5]),
    ])
    def test_endpoint_agreement(self, params, gamma, y0):
        fld = pendulum_field(params, DampingSchedule.constant(gamma))
        a = integrate_samples(y0, 0.0, [100.0], fld, IntegratorSpec.reference("rk_adaptive"))
        b = integrate_samples(y0, 0.0, [100.0], fld, IntegratorSpec.reference("taylor"))
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_ramp_agreement(self):
        fld = pendulum_field(DOWN, DampingSchedule(0.02, 0.03, 50.0))
        a = integrate_samples([1.0, 1.0], 0.0, [49.0, 50.0, 80.0], fld, IntegratorSpec.reference("rk_adaptive"))
        b = integrate_samples([1.0, 1.0], 0.0, [49.0, 50.0, 80.0], fld, IntegratorSpec.reference("taylor"))
        np.testing.assert_allclose(a, b, atol=1e-6)

    @pytest.mark.parametrize("method", METHODS)
    def test_against_solve_ivp(self, method):
        sch = DampingSchedule(0.02, 0.03, 30.0)

        def rhs(t, u):
            return pendulum_rhs(State(u[0], u[1], t), DOWN, sch)

        times = np.linspace(0, 60, 13)
        ref = solve_ivp(rhs, (0, 60), [0.7, 1.2], method="DOP853", t_eval=times, rtol=1e-13,
                        atol=1e-13, max_step=0.05).y.T
        out = integrate_samples([0.7, 1.2], 0.0, times, pendulum_field(DOWN, sch), IntegratorSpec.tight(method))
        np.testing.assert_allclose(out, ref, atol=1e-8)

    def test_cubic_against_solve_ivp(self):
        p, s = CubicParams(0.3), DampingSchedule.constant(0.01)
        ref = solve_ivp(lambda t, u: [u[1], -(1 + 0.3 * math.cos(t)) * u[0] ** 3 - 0.01 * u[1]],
                        (0, 50), [1.0, 0.0], rtol=1e-13, atol=1e-13, method="DOP853").y[:, -1]
        out = integrate_samples([1.0, 0.0], 0.0, [50.0], cubic_field(p, s), IntegratorSpec.tight())
        np.testing.assert_allclose(out[0], ref, atol=1e-8)


class TestTaylor:
    def test_augmented_consistency(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        x, y = 2.0, 1.0
        st4 = np.array([x, y, math.sin(x), math.cos(x)])
        out, t = taylor_run(st4, 0.0, 2000, fld, renormalize=False)
        assert t > 100
        assert out[2] ** 2 + out[3] ** 2 == pytest.approx(1.0, abs=1e-10)
        assert out[2] == pytest.approx(math.sin(out[0]), abs=1e-10)
        assert out[3] == pytest.approx(math.cos(out[0]), abs=1e-10)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 100))
    @settings(max_examples=40, deadline=None)
    def test_single_step(self, x, y, tau):
        fld = pendulum_field(INV, DampingSchedule.constant(0.2))
        out, h = taylor_step([x, y, math.sin(x), math.cos(x)], tau, fld)
        assert h > 0
        assert out[2] ** 2 + out[3] ** 2 == pytest.approx(1.0, abs=1e-12)
        ref = integrate_samples([x, y], tau, [tau + h], fld, IntegratorSpec.reference())[0]
        np.testing.assert_allclose(out[:2], ref, atol=1e-10)

    def test_inconsistent_state_rejected(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        with pytest.raises(DomainError):
            taylor_step([1.0, 0.0, 0.0, 1.0], 0.0, fld)

    def test_cubic_not_supported(self):
        fld = cubic_field(CubicParams(0.1), DampingSchedule.constant(0.01))
        with pytest.raises(DomainError):
            integrate_samples([1.0, 0.0], 0.0, [1.0], fld, IntegratorSpec(method="taylor"))


class TestFrontEnd:
    def test_integrate_to(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        s = integrate_to(State(1.0, 0.0, 5.0), 10.0, fld)
        assert s.tau == 10.0
        with pytest.raises(DomainError):
            integrate_to(State(1.0, 0.0, 5.0), 4.0, fld)

    def test_bad_inputs(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        with pytest.raises(DomainError):
            integrate_samples([1.0, 0.0, 0.0], 0.0, [1.0], fld)
        with pytest.raises(DomainError):
            integrate_samples([1.0, 0.0], 0.0, [2.0, 1.0], fld)
        with pytest.raises(NonFiniteState):
            integrate_samples([math.nan, 0.0], 0.0, [1.0], fld)

    def test_sample_at_start(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        out = integrate_samples([1.0, 0.5], 0.0, [0.0, 0.0, 1.0], fld)
        np.testing.assert_allclose(out[0], [1.0, 0.5])
        np.testing.assert_allclose(out[1], [1.0, 0.5])

    def test_poincare_series(self):
        fld = pendulum_field(DOWN, DampingSchedule.constant(0.03))
        ps = poincare_series(State(0.1, 4.0), 20, fld)
        assert len(ps) == 21
        np.testing.assert_allclose(np.diff(ps.taus), TWO_PI)
        assert np.all(np.abs(ps.states[:, 0]) <= math.pi)
        np.testing.assert_allclose(ps.winding, np.diff(ps.unwrapped) / TWO_PI)
        with pytest.raises(DomainError):
            poincare_series(State(0.1, 4.0), 0, fld)
