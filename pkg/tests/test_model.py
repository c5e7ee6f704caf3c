import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basinforge.errors import DomainError
from basinforge.model import (
    CubicParams,
    DampingSchedule,
    PendulumParams,
    State,
    cubic_field,
    cubic_rhs,
    gamma_at,
    pendulum_energy,
    pendulum_field,
    pendulum_rhs,
    wrap_angle,
)


def kernel_rhs(field, tau, u):
    du = np.zeros(field.dim)
    field.kernel(tau, np.asarray(u, dtype=float), field.args, du)
    return du


class TestParams:
    def test_offsets(self):
        assert PendulumParams(0.5, 0.1).offset == 0.5
        assert PendulumParams(0.1, 0.545, "inverted").offset == -0.1

    def test_inverted_f(self):
        p = PendulumParams(0.1, 0.545, "inverted")
        tau = np.linspace(0, 7, 9)
        np.testing.assert_allclose(p.f(tau), -(0.1 + 0.545 * np.cos(tau)))

    @pytest.mark.parametrize("kw", [
        dict(alpha=0.0, beta=0.1), dict(alpha=-1.0, beta=0.1), dict(alpha=0.5, beta=-0.1),
        dict(alpha=float("nan"), beta=0.1), dict(alpha=0.5, beta=0.1, orientation="sideways"),
    ])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            PendulumParams(**kw)

    def test_cubic_invalid(self):
        with pytest.raises(DomainError):
            CubicParams(-1.0)


class TestSchedule:
    def test_constant(self):
        s = DampingSchedule.constant(0.03)
        assert s.is_constant and s.final == 0.03
        assert gamma_at(s, 1e6) == 0.03

    def test_ramp(self):
        s = DampingSchedule(0.02, 0.03, 100.0)
        assert gamma_at(s, 0.0) == 0.02
        assert gamma_at(s, 50.0) == pytest.approx(0.025)
        assert gamma_at(s, 100.0) == 0.03
        assert gamma_at(s, 1000.0) == 0.03
        np.testing.assert_allclose(s.gamma_at(np.array([0.0, 25.0, 200.0])), [0.02, 0.0225, 0.03])

    def test_zero_ramp_is_step(self):
        s = DampingSchedule(0.02, 0.03, 0.0)
        assert gamma_at(s, 0.0) == 0.03

    def test_invalid(self):
        with pytest.raises(DomainError):
            DampingSchedule(-0.1)
        with pytest.raises(DomainError):
            DampingSchedule(0.1, 0.2, -1.0)

    @given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(1.0, 1e4), st.floats(0, 2e4))
    def test_ramp_bounded(self, g0, g1, T0, tau):
        g = gamma_at(DampingSchedule(g0, g1, T0), tau)
        assert min(g0, g1) - 1e-15 <= g <= max(g0, g1) + 1e-15


class TestKernels:
    @given(st.floats(-20, 20), st.floats(-4, 4), st.floats(0, 2000))
    def test_pendulum_kernel_matches_rhs(self, x, y, tau):
        for params in (PendulumParams(0.5, 0.1, tau0=0.3), PendulumParams(0.1, 0.545, "inverted")):
            sch = DampingSchedule(0.02, 0.03, 1000.0)
            ref = pendulum_rhs(State(x, y, tau), params, sch)
            np.testing.assert_allclose(kernel_rhs(pendulum_field(params, sch), tau, [x, y]), ref,
                                       rtol=1e-14, atol=1e-15)

    def test_cubic_kernel_matches_rhs(self):
        p, s = CubicParams(0.2), DampingSchedule.constant(5e-4)
        ref = cubic_rhs(State(1.3, -0.4, 2.0), p, s)
        np.testing.assert_allclose(kernel_rhs(cubic_field(p, s), 2.0, [1.3, -0.4]), ref, rtol=1e-14)

    def test_ramp_breakpoint(self):
        f = pendulum_field(PendulumParams(0.5, 0.1), DampingSchedule(0.02, 0.03, 100.0))
        assert f.breakpoints == (100.0,) and f.T0 == 100.0
        assert pendulum_field(PendulumParams(0.5, 0.1), DampingSchedule.constant(0.03)).breakpoints == ()

    def test_equilibria_are_fixed(self):
        for params in (PendulumParams(0.5, 0.1), PendulumParams(0.1, 0.545, "inverted")):
            f = pendulum_field(params, DampingSchedule.constant(0.1))
            for xs in f.equilibria:
                np.testing.assert_allclose(kernel_rhs(f, 1.234, [xs, 0.0]), 0.0, atol=1e-15)


class TestHelpers:
    @given(st.floats(-1e3, 1e3))
    def test_wrap(self, x):
        w = wrap_angle(x)
        assert -math.pi < w <= math.pi
        assert math.cos(w) == pytest.approx(math.cos(x), abs=1e-9)
        assert math.sin(w) == pytest.approx(math.sin(x), abs=1e-9)

    def test_wrap_pi(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)

    def test_energy(self):
        assert pendulum_energy(0.0, 0.0, 0.5) == -0.5
        assert pendulum_energy(math.pi, 0.0, 0.5) == pytest.approx(0.5)

    def test_state(self):
        s = State(3 * math.pi, 1.0)
        assert s.wrapped == pytest.approx(math.pi)
        with pytest.raises(DomainError):
            State(float("inf"), 0.0)
