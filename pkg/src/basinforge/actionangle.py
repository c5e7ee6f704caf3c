"""Action-angle variables of the simple pendulum ``H = p^2/2 - alpha cos q``.

Librations (``E0 = H/alpha < 1``) use the modulus ``k^2 = (E0 + 1)/2``::

    q = 2 arcsin(k sn u),  p = 2 k sqrt(alpha) cn u,  u = 2 K phi / pi
    I = (8/pi) sqrt(alpha) [E(k) - k'^2 K(k)]

Rotations (``E0 > 1``) use ``k^2 = 2/(E0 + 1)``::

    q = 2 am(u),  p = (2/k) sqrt(alpha) dn u,  u = K phi / pi
    I = (4/(k pi)) sqrt(alpha) E(k)

Negative rotations are obtained through the symmetry ``(q, p) -> (-q, -p)``
and carry ``sign = -1``.  Secular ``phi`` terms of the incomplete integral
``E(u)`` are eliminated through the Jacobi zeta function
``Z(u) = E(u) - u E/K`` wherever they cancel analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .elliptic import (
    MIN_COMPLEMENT_SQ,
    Modulus,
    ModulusLike,
    as_modulus,
    complete_K,
    delta_libration,
    e_over_k,
    elliptic_F,
    incomplete_E,
    jacobi_amplitude,
    jacobi_elliptic,
    jacobi_zeta,
    solve_modulus,
)
from .errors import DomainError, SeparatrixError
from .model import PendulumParams, wrap_angle

Regime = Literal["libration", "rotation"]

TWO_PI = 2.0 * math.pi

#: Guard band ``|E0 - 1|`` around the separatrix.
SEPARATRIX_GUARD = 1e-10

#: Guard band on the action, relative to the separatrix action.
ACTION_GUARD = 1e-12


def _check_regime(regime: str) -> None:
    if regime not in ("libration", "rotation"):
        raise DomainError(f"regime must be 'libration' or 'rotation', got {regime!r}")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be positive, got {alpha}")
    return alpha


@dataclass(frozen=True)
class EnergyLevel:
    """Energy ``E`` of the unforced pendulum and its reduced value ``E0 = E/alpha``."""

    E: float
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not math.isfinite(self.E):
            raise DomainError("energy must be finite")
        if self.E0 < -1.0:
            raise DomainError(f"E0 = {self.E0} is below the minimum -1")

    @property
    def E0(self) -> float:
        return self.E / self.alpha

    @property
    def regime(self) -> Regime:
        if abs(self.E0 - 1.0) <= SEPARATRIX_GUARD:
            raise SeparatrixError(f"E0 = {self.E0!r} lies on the separatrix")
        return "libration" if self.E0 < 1.0 else "rotation"

    def modulus(self) -> Modulus:
        if self.regime == "libration":
            return Modulus(math.sqrt(0.5 * (self.E0 + 1.0)))
        return Modulus(math.sqrt(2.0 / (self.E0 + 1.0)))


@dataclass(frozen=True)
class ActionAngle:
    """Action ``I``, angle ``phi`` in ``[0, 2 pi)``, regime and rotation sign.

    ``modulus``, when supplied, is authoritative: near the separatrix the
    action determines ``k'`` only to a relative precision of order
    ``eps / (I_sep - I)``, so callers that know the modulus should pass it.
    """

    I: float
    phi: float
    regime: Regime = "libration"
    sign: int = 1
    modulus: Modulus | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_regime(self.regime)
        if not (math.isfinite(self.I) and self.I >= 0):
            raise DomainError(f"action must be finite and non-negative, got {self.I!r}")
        if not math.isfinite(self.phi):
            raise DomainError("angle must be finite")
        if self.sign not in (1, -1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign!r}")
        if self.regime == "libration" and self.sign != 1:
            raise DomainError("librations carry sign +1")
        object.__setattr__(self, "I", float(self.I))
        object.__setattr__(self, "phi", float(np.mod(self.phi, TWO_PI)))


def separatrix_action(regime: Regime, alpha: float) -> float:
    """Limit of the action at the separatrix: ``8 sqrt(alpha)/pi`` or ``4 sqrt(alpha)/pi``."""
    _check_regime(regime)
    alpha = _check_alpha(alpha)
    return (8.0 if regime == "libration" else 4.0) * math.sqrt(alpha) / math.pi


def action_from_modulus(k: ModulusLike, regime: Regime, alpha: float) -> float:
    """Action of the unperturbed orbit with modulus ``k``."""
    _check_regime(regime)
    alpha = _check_alpha(alpha)
    mod = as_modulus(k)
    K = complete_K(mod)
    if regime == "libration":
        # E - k'^2 K = k^2 K Delta, free of cancellation as k -> 0
        return 8.0 / math.pi * math.sqrt(alpha) * K * mod.m * delta_libration(mod)
    if mod.k == 0.0:
        raise DomainError("rotation action is unbounded at k = 0")
    return 4.0 * math.sqrt(alpha) * K * e_over_k(mod) / (mod.k * math.pi)


def dI_dk(k: ModulusLike, regime: Regime, alpha: float) -> float:
    """Derivative of the action with respect to the modulus.

    Libration ``(8/pi) k K sqrt(alpha)``; rotation ``-4 sqrt(alpha) K / (pi k^2)``.
    """
    _check_regime(regime)
    alpha = _check_alpha(alpha)
    mod = as_modulus(k)
    K = complete_K(mod)
    if regime == "libration":
        return 8.0 / math.pi * mod.k * K * math.sqrt(alpha)
    if mod.k == 0.0:
        raise DomainError("rotation action is unbounded at k = 0")
    return -4.0 * math.sqrt(alpha) * K / (math.pi * mod.m)


def frequency(k: ModulusLike, regime: Regime, alpha: float) -> float:
    """Angular frequency ``Omega = dH/dI`` on the orbit with modulus ``k``."""
    _check_regime(regime)
    alpha = _check_alpha(alpha)
    mod = as_modulus(k)
    K = complete_K(mod)
    if regime == "libration":
        return math.pi * math.sqrt(alpha) / (2.0 * K)
    if mod.k == 0.0:
        raise DomainError("rotation frequency is unbounded at k = 0")
    return math.pi * math.sqrt(alpha) / (mod.k * K)


def zeta(k: ModulusLike, regime: Regime) -> float:
    """Twist ``dOmega/dI``; independent of ``alpha``.

    Libration ``-pi^2 / (16 k^2 K^3) (E/k'^2 - K)`` is negative; rotation
    ``pi^2 E / (4 k'^2 K^3)`` is positive.
    """
    _check_regime(regime)
    mod = as_modulus(k)
    if mod.k == 0.0 and regime == "rotation":
        raise DomainError("rotation twist is undefined at k = 0")
    K = complete_K(mod)
    E = K * e_over_k(mod)
    if regime == "libration":
        # E/k'^2 - K = (E - k'^2 K)/k'^2 = k^2 K Delta / k'^2
        return -math.pi**2 * delta_libration(mod) / (16.0 * mod.m1 * K**2)
    return math.pi**2 * E / (4.0 * mod.m1 * K**3)


def modulus_from_action(I: float, regime: Regime, alpha: float) -> Modulus:
    """Invert :func:`action_from_modulus`.

    Raises
    ------
    SeparatrixError
        If ``I`` is within the guard band of the separatrix action.
    DomainError
        If ``I`` lies outside the range of the regime.
    """
    _check_regime(regime)
    alpha = _check_alpha(alpha)
    I = float(I)
    sep = separatrix_action(regime, alpha)
    if abs(I - sep) <= ACTION_GUARD * sep:
        raise SeparatrixError(f"action {I!r} is within the separatrix guard band")
    if regime == "libration":
        if I < 0 or I > sep:
            raise DomainError(f"libration actions lie in [0, {sep}), got {I}")
        if I == 0.0:
            return Modulus(0.0)
        fn = lambda m: (action_from_modulus(m, regime, alpha), dI_dk(m, regime, alpha))  # noqa: E731
        increasing = True
    else:
        if I < sep:
            raise DomainError(f"rotation actions exceed {sep}, got {I}")
        fn = lambda m: (action_from_modulus(m, regime, alpha), dI_dk(m, regime, alpha))  # noqa: E731
        increasing = False
    try:
        return solve_modulus(fn, I, increasing, "action relation")
    except DomainError as exc:
        raise SeparatrixError(str(exc)) from exc


def _modulus_of(aa: ActionAngle, alpha: float) -> Modulus:
    if aa.modulus is not None:
        return aa.modulus
    return modulus_from_action(aa.I, aa.regime, alpha)


def _arg(aa: ActionAngle, mod: Modulus) -> tuple[float, float]:
    K = complete_K(mod)
    if aa.regime == "libration":
        return 2.0 * K * aa.phi / math.pi, K
    return K * aa.phi / math.pi, K


def to_cartesian(aa: ActionAngle, alpha: float) -> tuple[float, float]:
    """Map ``(I, phi)`` to ``(q, p)``.

    Libration ``q`` lies in ``(-pi, pi)``; rotation ``q = sign * 2 am(u)`` is
    continuous in ``phi`` and lies in ``sign * [0, 2 pi)``.
    """
    alpha = _check_alpha(alpha)
    mod = _modulus_of(aa, alpha)
    u, _ = _arg(aa, mod)
    sn, cn, dn = jacobi_elliptic(u, mod)
    ra = math.sqrt(alpha)
    if aa.regime == "libration":
        return 2.0 * math.asin(mod.k * sn), 2.0 * mod.k * ra * cn
    q = 2.0 * jacobi_amplitude(u, mod)
    p = 2.0 * ra * dn / mod.k
    return aa.sign * q, aa.sign * p


def energy_modulus(q: float, p: float, alpha: float) -> tuple[Regime, Modulus]:
    """Regime and modulus of the orbit through ``(q, p)``, free of cancellation.

    Raises
    ------
    SeparatrixError
        If ``|E0 - 1| <= 1e-10``.
    """
    alpha = _check_alpha(alpha)
    q, p = float(q), float(p)
    if not (math.isfinite(q) and math.isfinite(p)):
        raise DomainError("phase point must be finite")
    s2 = math.sin(0.5 * q) ** 2
    c2 = math.cos(0.5 * q) ** 2
    r = p * p / (4.0 * alpha)
    gap = 2.0 * (r - c2)  # E0 - 1
    if abs(gap) <= SEPARATRIX_GUARD:
        raise SeparatrixError(f"point ({q}, {p}) lies within {SEPARATRIX_GUARD:g} of the separatrix")
    if gap < 0:
        m, m1 = s2 + r, c2 - r
    else:
        w = s2 + r
        m, m1 = 1.0 / w, (r - c2) / w
    regime: Regime = "libration" if gap < 0 else "rotation"
    if m1 < MIN_COMPLEMENT_SQ:
        raise SeparatrixError(f"point ({q}, {p}) is too close to the separatrix (1 - k^2 = {m1:.3e})")
    if m1 < 0.5:
        return regime, Modulus.from_complement(math.sqrt(m1))
    return regime, Modulus(math.sqrt(m))


def from_cartesian(q: float, p: float, alpha: float) -> ActionAngle:
    """Map ``(q, p)`` to action-angle variables.

    The angle is recovered from the amplitude ``psi`` of the Jacobi argument
    through ``u = F(psi, k)``, with the quadrant fixed by ``atan2``.
    """
    regime, mod = energy_modulus(q, p, alpha)
    alpha = float(alpha)
    K = complete_K(mod)
    I = action_from_modulus(mod, regime, alpha) if mod.k > 0 else 0.0
    if regime == "libration":
        if mod.k == 0.0:
            return ActionAngle(0.0, 0.0, "libration", 1, mod)
        qw = wrap_angle(q)
        psi = math.atan2(math.sin(0.5 * qw), p / (2.0 * math.sqrt(alpha)))
        u = elliptic_F(psi, mod)
        phi = math.pi * u / (2.0 * K)
        return ActionAngle(I, phi, "libration", 1, mod)
    sign = 1 if p > 0 else -1
    qs = float(np.mod(sign * q, TWO_PI))
    u = elliptic_F(0.5 * qs, mod)
    phi = math.pi * u / K
    return ActionAngle(I, phi, "rotation", sign, mod)


def jacobian(aa: ActionAngle, alpha: float, literal: bool = False) -> np.ndarray:
    """Jacobian ``[[dq/dphi, dq/dI], [dp/dphi, dp/dI]]`` of the map to ``(q, p)``.

    With ``literal=True`` the action derivatives are evaluated with the
    incomplete integral ``E(u)`` and explicit ``phi`` terms; the default
    uses the equivalent zeta form in which those terms cancel.
    """
    alpha = _check_alpha(alpha)
    mod = _modulus_of(aa, alpha)
    if mod.k == 0.0:
        raise DomainError("the Jacobian is singular at the fixed point")
    u, K = _arg(aa, mod)
    sn, cn, dn = jacobi_elliptic(u, mod)
    k, m, m1 = mod.k, mod.m, mod.m1
    ra = math.sqrt(alpha)
    phi = aa.phi
    E = K * e_over_k(mod)
    Eu = incomplete_E(u, mod)
    Z = jacobi_zeta(u, mod)
    if aa.regime == "libration":
        dq_dphi = 4.0 * k * K * cn / math.pi
        dp_dphi = -ra * 4.0 * k * K * sn * dn / math.pi
        if literal:
            dq_dI = math.pi / (4 * k * K * ra) * (
                sn / dn + 2 * E * phi * cn / (math.pi * m1) + m * sn * cn * cn / (m1 * dn) - Eu * cn / m1
            )
            dp_dI = math.pi / (4 * k * K) * (
                cn - 2 * E * phi * sn * dn / (math.pi * m1) - m * sn * sn * cn / m1 + Eu * sn * dn / m1
            )
        else:
            dq_dI = math.pi / (4 * k * K * ra) * (sn / dn + m * sn * cn * cn / (m1 * dn) - Z * cn / m1)
            dp_dI = math.pi / (4 * k * K) * (cn - m * sn * sn * cn / m1 + Z * sn * dn / m1)
    else:
        dq_dphi = 2.0 * K * dn / math.pi
        dp_dphi = -ra * 2.0 * k * K * sn * cn / math.pi
        if literal:
            dq_dI = -(math.pi * m / (2 * K * ra)) * (
                phi * E * dn / (math.pi * k * m1) + k * sn * cn / m1 - Eu * dn / (k * m1)
            )
            dp_dI = (math.pi * m / (2 * K)) * (
                dn / m + phi * E * sn * cn / (math.pi * m1) + sn * sn * dn / m1 - Eu * sn * cn / m1
            )
        else:
            dq_dI = -(math.pi * m / (2 * K * ra)) * (k * sn * cn / m1 - Z * dn / (k * m1))
            dp_dI = (math.pi * m / (2 * K)) * (dn / m + sn * sn * dn / m1 - Z * sn * cn / m1)
    J = np.array([[dq_dphi, dq_dI], [dp_dphi, dp_dI]])
    return aa.sign * J


def jacobian_det(aa: ActionAngle, alpha: float, literal: bool = False) -> float:
    """Determinant of :func:`jacobian`; equals one for a canonical map."""
    J = jacobian(aa, alpha, literal)
    return float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])


def perturbed_rhs_action_angle(aa: ActionAngle, tau: float, params: PendulumParams, C1: float) -> tuple[float, float]:
    """Right-hand side ``(phi', I')`` of the forced, damped pendulum.

    The perturbation is ``beta cos(tau - tau0) sin q - gamma p`` in ``p'``
    with ``epsilon = beta`` and ``gamma = C1 epsilon``.
    """
    if params.orientation != "downward":
        raise DomainError("action-angle variables are built on the hanging pendulum")
    alpha = params.alpha
    eps = params.beta
    mod = _modulus_of(aa, alpha)
    u, K = _arg(aa, mod)
    k, m, m1 = mod.k, mod.m, mod.m1
    ra = math.sqrt(alpha)
    c = math.cos(float(tau) - params.tau0)
    if mod.k == 0.0:
        return frequency(mod, aa.regime, alpha), 0.0
    sn, cn, dn = jacobi_elliptic(u, mod)
    Z = jacobi_zeta(u, mod)
    if aa.regime == "libration":
        dphi = (
            math.pi * ra / (2 * K)
            - (eps * math.pi / (2 * K * ra)) * (sn * sn + m * sn * sn * cn * cn / m1 - Z * sn * cn * dn / m1) * c
            + (C1 * eps * math.pi * cn / (2 * K)) * (sn / dn + m * sn * cn * cn / (m1 * dn) - Z * cn / m1)
        )
        dI = (8 * eps * m * K / math.pi) * c * sn * cn * dn - (8 * C1 * eps * m * ra * K / math.pi) * cn * cn
    else:
        dphi = (
            math.pi * ra / (k * K)
            + (eps * math.pi * k / (ra * K)) * (m * sn * sn * cn * cn / m1 - Z * sn * cn * dn / m1) * c
            - (C1 * eps * math.pi / K) * (m * sn * cn * dn / m1 - Z * dn * dn / m1)
        )
        dI = (4 * eps * K / math.pi) * c * sn * cn * dn - (4 * C1 * eps * ra * K / (math.pi * k)) * dn * dn
    return float(dphi), float(dI)
