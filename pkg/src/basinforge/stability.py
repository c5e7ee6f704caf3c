"""Linear stability of the equilibria and the global-attraction bound.

Linearising the pendulum about an equilibrium ``x*`` gives the damped
Mathieu equation ``xi'' + gamma xi' + f(tau) cos(x*) xi = 0``.  Its one-period
monodromy matrix decides linear stability.

For ``beta < alpha`` the Liouville time ``s = int sqrt(f) dtau`` turns the
hanging pendulum into one with unit frequency, and the energy
``H = 1 - cos x + y^2 / (2 f)`` satisfies
``dH/dtau = -(y^2 / f) (gamma + f' / (2 f))``.  It is non-increasing as soon
as ``gamma > max(-f'/(2f)) = beta / (2 sqrt(alpha^2 - beta^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numba as nb
import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import DomainError
from .integrate import IntegratorSpec, integrate_samples
from .model import (
    TWO_PI,
    DampingSchedule,
    PendulumParams,
    State,
    VectorField,
    gamma_kernel,
    pendulum_field,
)

Point = Literal["down", "up"]

#: Multipliers within this distance of the unit circle count as marginal when ``gamma = 0``.
MARGINAL_TOL = 1e-8


@nb.njit(cache=True)
def variational_kernel(t, u, p, du):
    c = p[0] - p[1] * np.cos(t - p[2])
    g = gamma_kernel(t, p)
    du[0] = u[1]
    du[1] = -c * u[0] - g * u[1]
    du[2] = u[3]
    du[3] = -c * u[2] - g * u[3]


@dataclass(frozen=True)
class FloquetResult:
    """Monodromy matrix over one forcing period and its multipliers."""

    monodromy: np.ndarray = field(repr=False)
    multipliers: tuple[complex, complex]
    stable: bool
    verdict: str
    point: Point
    gamma: float

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.monodromy))

    @property
    def spectral_radius(self) -> float:
        return max(abs(m) for m in self.multipliers)


def _equilibrium(params: PendulumParams, point: Point) -> float:
    if point not in ("down", "up"):
        raise DomainError(f"point must be 'down' or 'up', got {point!r}")
    native_down = params.orientation == "downward"
    return 0.0 if (point == "down") == native_down else math.pi


def floquet(params: PendulumParams, gamma: float, point: Point = "down", rel_tol: float = 1e-11) -> FloquetResult:
    """Floquet multipliers of the equilibrium ``point`` at constant damping ``gamma``.

    With ``gamma > 0`` the point is stable iff both multipliers lie strictly
    inside the unit circle.  With ``gamma = 0`` multipliers on the unit circle
    are reported as ``marginal`` and not as stable.
    """
    gamma = float(gamma)
    if not (gamma >= 0 and math.isfinite(gamma)):
        raise DomainError(f"gamma must be non-negative, got {gamma}")
    cx = math.cos(_equilibrium(params, point))
    args = np.array([params.offset * cx, params.beta * cx, params.tau0, gamma, gamma, 0.0])
    fld = VectorField(variational_kernel, args, 4, (), False, (), "variational")
    spec = IntegratorSpec("rk_adaptive", rel_tol=rel_tol, abs_tol=rel_tol * 1e-2, max_step=0.1)
    out = integrate_samples(np.array([1.0, 0.0, 0.0, 1.0]), 0.0, [TWO_PI], fld, spec)[0]
    M = np.array([[out[0], out[2]], [out[1], out[3]]])
    mu = np.linalg.eigvals(M)
    mu = tuple(sorted((complex(m) for m in mu), key=lambda z: (abs(z), z.imag)))
    rho = max(abs(m) for m in mu)
    if rho < 1.0 - (MARGINAL_TOL if gamma == 0 else 0.0):
        verdict = "stable"
    elif gamma == 0 and rho <= 1.0 + MARGINAL_TOL:
        verdict = "marginal"
    else:
        verdict = "unstable"
    return FloquetResult(M, mu, verdict == "stable", verdict, point, gamma)


def _check_pair(alpha: float, beta: float) -> tuple[float, float]:
    alpha, beta = float(alpha), float(beta)
    if not (math.isfinite(alpha) and math.isfinite(beta)) or alpha <= 0 or beta < 0:
        raise DomainError(f"need alpha > 0 and beta >= 0, got alpha={alpha}, beta={beta}")
    if beta >= alpha:
        raise DomainError(f"the bound requires f > 0, i.e. beta < alpha (got alpha={alpha}, beta={beta})")
    return alpha, beta


def global_attraction_bound(alpha: float, beta: float) -> float:
    """Damping ``beta / (2 sqrt(alpha^2 - beta^2))`` above which the energy decreases.

    Raises
    ------
    DomainError
        If ``beta >= alpha``.
    """
    alpha, beta = _check_pair(alpha, beta)
    return beta / (2.0 * math.sqrt((alpha - beta) * (alpha + beta)))


def liouville_energy(x, y, tau, params: PendulumParams):
    """Energy ``1 - cos x + y^2 / (2 f(tau))`` in Liouville variables."""
    f = params.f(tau)
    return 1.0 - np.cos(x) + np.asarray(y) ** 2 / (2.0 * f)


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of an energy-decrease check over a set of trajectories."""

    gamma: float
    bound: float
    trajectories: int
    samples: int
    violations: int
    max_increase: float
    tau_end: float
    liouville_time: float
    tolerance: float

    @property
    def certified(self) -> bool:
        return self.violations == 0


def energy_decrease_certificate(
    params: PendulumParams,
    gamma: float,
    trajectory: Iterable[State] | State,
    tau_end: float = 100.0,
    dt: float = 0.05,
    tol: float = 1e-9,
    spec: IntegratorSpec | None = None,
) -> CertificateReport:
    """Check that ``H`` never increases by more than ``tol`` along trajectories.

    The Liouville time ``s(tau_end)`` is accumulated by Simpson quadrature on
    the sampling grid.

    Raises
    ------
    DomainError
        If ``params`` is not the hanging pendulum, ``beta >= alpha`` or
        ``gamma`` does not exceed :func:`global_attraction_bound`.
    """
    if params.orientation != "downward":
        raise DomainError("the certificate applies to the hanging pendulum")
    bound = global_attraction_bound(params.alpha, params.beta)
    gamma = float(gamma)
    if not gamma > bound:
        raise DomainError(f"gamma = {gamma} does not exceed the global-attraction bound {bound:.6g}")
    starts = [trajectory] if isinstance(trajectory, State) else list(trajectory)
    spec = spec or IntegratorSpec("rk_adaptive", rel_tol=1e-12, abs_tol=1e-13)
    fld = pendulum_field(params, DampingSchedule.constant(gamma))
    violations = 0
    max_inc = -math.inf
    samples = 0
    s_end = 0.0
    for st in starts:
        n = max(2, int(math.ceil((tau_end - st.tau) / dt)))
        times = np.linspace(st.tau, st.tau + (tau_end - st.tau), n + 1)
        out = integrate_samples([st.x, st.y], st.tau, times, fld, spec)
        H = liouville_energy(out[:, 0], out[:, 1], times, params)
        inc = np.diff(H)
        violations += int(np.count_nonzero(inc > tol))
        max_inc = max(max_inc, float(inc.max()))
        samples += len(times)
        s_end = float(cumulative_simpson(np.sqrt(params.f(times)), x=times)[-1])
    return CertificateReport(gamma, bound, len(starts), samples, violations, max_inc, tau_end, s_end, tol)
