"""Vector fields of the parametrically forced pendulum and the cubic oscillator.

The pendulum is ``x' = y, y' = -f(tau - tau0) sin x - gamma(tau) y`` with
``f = alpha - beta cos`` for the hanging pendulum and ``f = -(alpha + beta cos)``
for the inverted one, written in the coordinate ``xi = x - pi`` measured from
the upright position.

Every field has a compiled kernel ``kernel(t, u, p, du)`` writing the
derivative into ``du``.  Parameter vectors share one layout::

    p = [a, beta, tau0, gamma0, gamma1, T0]

with ``a = alpha`` (downward), ``a = -alpha`` (inverted) or ``a = epsilon``
(cubic oscillator).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numba as nb
import numpy as np

from .errors import DomainError

Orientation = Literal["downward", "inverted"]

TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Reduce an angle to ``(-pi, pi]``."""
    w = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)
    return float(w) if np.ndim(w) == 0 else w


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PendulumParams:
    """Model constants of the forced pendulum.

    Parameters
    ----------
    alpha : float
        Ratio ``g / (l omega^2)``, positive.
    beta : float
        Forcing amplitude ``b / l``, non-negative.
    orientation : {"downward", "inverted"}
        Which equilibrium the coordinates are centred on.
    tau0 : float
        Forcing phase.
    """

    alpha: float
    beta: float
    orientation: Orientation = "downward"
    tau0: float = 0.0

    def __post_init__(self):
        a = _check_finite("alpha", self.alpha)
        b = _check_finite("beta", self.beta)
        _check_finite("tau0", self.tau0)
        if a <= 0:
            raise DomainError(f"alpha must be positive, got {a}")
        if b < 0:
            raise DomainError(f"beta must be non-negative, got {b}")
        if self.orientation not in ("downward", "inverted"):
            raise DomainError(f"orientation must be 'downward' or 'inverted', got {self.orientation!r}")

    @property
    def offset(self) -> float:
        """Constant part ``a`` of ``f(tau) = a - beta cos(tau - tau0)``."""
        return self.alpha if self.orientation == "downward" else -self.alpha

    def f(self, tau):
        """Coefficient ``f(tau - tau0)`` multiplying ``sin x``."""
        return self.offset - self.beta * np.cos(np.asarray(tau, dtype=float) - self.tau0)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DampingSchedule:
    """Damping ``gamma(tau)``: linear from ``gamma0`` to ``gamma1`` over ``[0, T0]``.

    ``T0 = 0`` (or ``gamma1`` omitted) gives constant damping ``gamma0``.
    """

    gamma0: float
    gamma1: float | None = None
    T0: float = 0.0

    def __post_init__(self):
        g0 = _check_finite("gamma0", self.gamma0)
        g1 = g0 if self.gamma1 is None else _check_finite("gamma1", self.gamma1)
        t0 = _check_finite("T0", self.T0)
        if g0 < 0 or g1 < 0:
            raise DomainError("damping coefficients must be non-negative")
        if t0 < 0:
            raise DomainError(f"T0 must be non-negative, got {t0}")
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "T0", t0)

    @classmethod
    def constant(cls, gamma: float) -> "DampingSchedule":
        return cls(gamma, gamma, 0.0)

    @property
    def is_constant(self) -> bool:
        return self.T0 == 0.0 or self.gamma0 == self.gamma1

    @property
    def final(self) -> float:
        """Damping after the ramp."""
        return self.gamma1

    def gamma_at(self, tau):
        return gamma_at(self, tau)

    def to_dict(self) -> dict:
        return asdict(self)


def gamma_at(schedule: DampingSchedule, tau):
    """Damping coefficient at time ``tau``."""
    tau = np.asarray(tau, dtype=float)
    if schedule.T0 == 0.0:
        g = np.full_like(tau, schedule.gamma1)
    else:
        ramp = schedule.gamma0 + (schedule.gamma1 - schedule.gamma0) * tau / schedule.T0
        g = np.where(tau < schedule.T0, ramp, schedule.gamma1)
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class State:
    """Phase point at time ``tau``; ``x`` is stored unwrapped."""

    x: float
    y: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "tau"):
            _check_finite(name, getattr(self, name))

    @property
    def wrapped(self) -> float:
        return wrap_angle(self.x)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class CubicParams:
    """Forcing amplitude of ``x'' + (1 + epsilon cos tau) x^3 + gamma x' = 0``."""

    epsilon: float

    def __post_init__(self):
        e = _check_finite("epsilon", self.epsilon)
        if e < 0:
            raise DomainError(f"epsilon must be non-negative, got {e}")


def pendulum_rhs(state: State, params: PendulumParams, schedule: DampingSchedule) -> tuple[float, float]:
    """Right-hand side of the pendulum at ``state``."""
    f = params.offset - params.beta * math.cos(state.tau - params.tau0)
    g = gamma_at(schedule, state.tau)
    return state.y, -f * math.sin(state.x) - g * state.y


def cubic_rhs(state: State, params: CubicParams, schedule: DampingSchedule) -> tuple[float, float]:
    """Right-hand side of the forced cubic oscillator at ``state``."""
    g = gamma_at(schedule, state.tau)
    return state.y, -(1.0 + params.epsilon * math.cos(state.tau)) * state.x**3 - g * state.y


def pendulum_energy(x, y, alpha: float):
    """Energy ``y^2/2 - alpha cos x`` of the unforced pendulum."""
    return 0.5 * np.asarray(y) ** 2 - alpha * np.cos(x)


@nb.njit(cache=True)
def gamma_kernel(t, p):
    if p[5] > 0.0 and t < p[5]:
        return p[3] + (p[4] - p[3]) * t / p[5]
    return p[4]


@nb.njit(cache=True)
def pendulum_kernel(t, u, p, du):
    f = p[0] - p[1] * np.cos(t - p[2])
    du[0] = u[1]
    du[1] = -f * np.sin(u[0]) - gamma_kernel(t, p) * u[1]


@nb.njit(cache=True)
def cubic_kernel(t, u, p, du):
    x = u[0]
    du[0] = u[1]
    du[1] = -(1.0 + p[0] * np.cos(t - p[2])) * x * x * x - gamma_kernel(t, p) * u[1]


def schedule_args(schedule: DampingSchedule) -> tuple[float, float, float]:
    return schedule.gamma0, schedule.gamma1, schedule.T0


@dataclass(frozen=True)
class VectorField:
    """A compiled right-hand side with its parameter vector.

    Attributes
    ----------
    kernel :
        Compiled ``kernel(t, u, p, du)``.
    args :
        Parameter vector in the shared layout.
    dim :
        State dimension.
    breakpoints :
        Times where the field is not smooth; integrators stop on them.
    periodic_x :
        Whether the first coordinate is an angle.
    equilibria :
        Native equilibria ``(x*, 0)`` in wrapped coordinates.
    """

    kernel: Callable
    args: np.ndarray
    dim: int = 2
    breakpoints: tuple[float, ...] = ()
    periodic_x: bool = True
    equilibria: tuple[float, ...] = (0.0,)
    name: str = "field"
    params: object = field(default=None, compare=False)
    schedule: DampingSchedule | None = field(default=None, compare=False)

    @property
    def T0(self) -> float:
        return float(self.args[5])


def pendulum_field(params: PendulumParams, schedule: DampingSchedule) -> VectorField:
    """Compiled pendulum vector field for ``params`` and ``schedule``."""
    g0, g1, t0 = schedule_args(schedule)
    args = np.array([params.offset, params.beta, params.tau0, g0, g1, t0], dtype=float)
    bps = (t0,) if t0 > 0 else ()
    return VectorField(
        pendulum_kernel, args, 2, bps, True, (0.0, math.pi), f"pendulum-{params.orientation}",
        params, schedule,
    )


def cubic_field(params: CubicParams, schedule: DampingSchedule) -> VectorField:
    """Compiled cubic-oscillator vector field."""
    g0, g1, t0 = schedule_args(schedule)
    args = np.array([params.epsilon, 0.0, 0.0, g0, g1, t0], dtype=float)
    bps = (t0,) if t0 > 0 else ()
    return VectorField(cubic_kernel, args, 2, bps, False, (0.0,), "cubic", params, schedule)
