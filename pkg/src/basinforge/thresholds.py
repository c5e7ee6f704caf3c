"""Leading-order damping thresholds of subharmonic attractors.

A ``p:q`` resonance of the unperturbed pendulum has period ``2 pi q``.  For
librations the resonant modulus solves ``K(k) = pi q sqrt(alpha) / (2 p)``,
for rotations ``k K(k) = pi q sqrt(alpha) / (2 p)``.  The attractor persists
to first order while ``gamma <= C1 * beta`` with

    C1 = G1 / (sqrt(alpha) Delta)          (libration)
    C1 = k G1 / (sqrt(alpha) Delta)        (rotation)

where ``G1`` is the period average of ``sn cn dn`` against the forcing and
``Delta`` the average of ``cn^2`` (libration) or ``dn^2`` (rotation).
Only ``p = 1`` with ``q`` even gives a non-zero ``G1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from .elliptic import (
    Modulus,
    ModulusLike,
    as_modulus,
    complete_K,
    delta_libration,
    e_over_k,
    fourier_coefficients,
    invert_modulus,
    jacobi_elliptic,
    nome,
)
from .errors import AboveThresholdError, DomainError

Regime = Literal["libration", "rotation"]

_GL_ORDER = 20


def _check_regime(regime: str) -> None:
    if regime not in ("libration", "rotation"):
        raise DomainError(f"regime must be 'libration' or 'rotation', got {regime!r}")


@dataclass(frozen=True)
class ResonanceSpec:
    """A ``p:q`` resonance in one regime; ``gcd(p, q)`` must be one."""

    p: int
    q: int
    regime: Regime = "libration"

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if math.gcd(self.p, self.q) != 1:
            raise DomainError(f"p and q must be coprime, got {self.p}:{self.q}")
        _check_regime(self.regime)


@dataclass(frozen=True)
class ThresholdRow:
    """One row of a threshold table."""

    regime: Regime
    q: int
    k: Modulus
    G1: float
    Delta: float
    C1: float
    alpha: float
    p: int = 1

    def gamma_threshold(self, epsilon: float) -> float:
        """Threshold damping ``C1 * epsilon`` for forcing amplitude ``epsilon``."""
        return self.C1 * float(epsilon)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime, "p": self.p, "q": self.q, "k": self.k.k, "kc": self.k.kc,
            "G1": self.G1, "Delta": self.Delta, "C1": self.C1, "alpha": self.alpha,
        }


def admissible(spec: ResonanceSpec) -> bool:
    """Whether the resonance has a non-zero first-order threshold (``p = 1``, ``q`` even)."""
    return spec.p == 1 and spec.q % 2 == 0


def _require_admissible(spec: ResonanceSpec) -> None:
    if not admissible(spec):
        raise DomainError(
            f"resonance {spec.p}:{spec.q} is not admissible; first-order thresholds need p = 1 and even q"
        )


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be positive, got {alpha}")
    return alpha


def resonant_modulus(spec: ResonanceSpec, alpha: float) -> Modulus:
    """Modulus of the unperturbed orbit of period ``2 pi q / p``.

    Raises
    ------
    NoSolutionError
        If the period lies outside the spectrum of the regime.
    """
    alpha = _check_alpha(alpha)
    target = math.pi * spec.q * math.sqrt(alpha) / (2.0 * spec.p)
    return invert_modulus(target, "K" if spec.regime == "libration" else "kK")


def delta(k: ModulusLike, regime: Regime) -> float:
    """Average of ``cn^2`` (libration) or ``dn^2`` (rotation) over a period."""
    _check_regime(regime)
    mod = as_modulus(k)
    if regime == "libration":
        return delta_libration(mod)
    return e_over_k(mod)


@lru_cache(maxsize=4096)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def harmonic_average(k: ModulusLike, q: int, kind: str = "sin", tol: float = 1e-12) -> float:
    """Average of ``sn cn dn (u) * trig(q v)`` over ``u in [0, 4K]``, ``v = pi u / (2K)``.

    Composite Gauss-Legendre panels on each quarter period; the panel count
    doubles until successive values agree to ``tol`` (relative, with an
    absolute floor of ``1e-2 tol``).
    """
    if kind not in ("sin", "cos"):
        raise DomainError(f"kind must be 'sin' or 'cos', got {kind!r}")
    mod = as_modulus(k)
    K = complete_K(mod)
    trig = np.sin if kind == "sin" else np.cos
    x, w = _gl_nodes(_GL_ORDER)

    def value(panels: int) -> float:
        h = K / panels
        left = h * np.arange(4 * panels)
        u = (left[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
        sn, cn, dn = jacobi_elliptic(u, mod)
        f = sn * cn * dn * trig(q * math.pi * u / (2.0 * K))
        return float(np.sum(f.reshape(-1, _GL_ORDER) * w) * 0.5 * h / (4.0 * K))

    panels = max(1, int(q))
    old = value(panels)
    for _ in range(12):
        panels *= 2
        new = value(panels)
        if abs(new - old) <= tol * max(abs(new), 1e-2):
            return new
        old = new
    raise DomainError(f"harmonic average did not converge for q={q}")


def g1(spec: ResonanceSpec, alpha: float) -> float:
    """Forcing average ``G1`` of an admissible resonance by quadrature."""
    _require_admissible(spec)
    return harmonic_average(resonant_modulus(spec, alpha), spec.q, "sin")


def fourier_harmonic_average(k: ModulusLike, q: int, tol: float = 1e-17) -> float:
    """Average of ``sn cn dn * sin(q v)`` from the nome expansions.

    With ``sn = sum S_a sin(A v)``, ``cn = sum C_b cos(B v)`` and
    ``dn = sum D_c cos(C v)`` (``A, B`` odd, ``C`` even) the product has
    harmonics ``A + s1 B + s2 C`` and only those equal to ``+-q`` contribute,
    each with weight ``+-1/8``.
    """
    mod = as_modulus(k)
    if mod.k == 0.0:
        return 0.0
    sn_c, cn_c, dn_c = fourier_coefficients(mod, tol)
    A = 2 * np.arange(len(sn_c)) + 1
    B = 2 * np.arange(len(cn_c)) + 1
    ncoef = len(dn_c)
    # D_{-c} = D_c folds into the two signs s2, so index by |C| / 2
    total = 0.0
    for s1 in (1, -1):
        L = A[:, None] + s1 * B[None, :]
        amp = sn_c[:, None] * cn_c[None, :]
        for s2 in (1, -1):
            for target, sign in ((q, 1.0), (-q, -1.0)):
                C = s2 * (target - L)
                ok = (C >= 0) & (C % 2 == 0) & (C // 2 < ncoef)
                if np.any(ok):
                    total += sign * float(np.sum(amp[ok] * dn_c[C[ok] // 2]))
    return total / 8.0


def g1_fourier(spec: ResonanceSpec, alpha: float) -> float:
    """``G1`` from the Fourier-series reduction (independent of quadrature)."""
    _require_admissible(spec)
    return fourier_harmonic_average(resonant_modulus(spec, alpha), spec.q)


def g1_closed_form(k: ModulusLike, q: int) -> float:
    """Summed Fourier reduction ``pi^3 m^2 Q^m / (2 k^2 K^3 (1 - Q^(2m)))``, ``q = 2m``.

    ``Q`` is the nome.  Uses ``sn cn dn = -(1/(2 k^2)) d(dn^2)/du`` and the
    nome expansion of ``dn^2``.
    """
    if q % 2:
        return 0.0
    mod = as_modulus(k)
    if mod.k == 0.0:
        return 0.0
    m = q // 2
    K = complete_K(mod)
    Q = nome(mod)
    return math.pi**3 * m * m * Q**m / (2.0 * mod.m * K**3 * (1.0 - Q ** (2 * m)))


def threshold_C1(spec: ResonanceSpec, alpha: float) -> ThresholdRow:
    """Assemble ``(k, G1, Delta, C1)`` for an admissible resonance."""
    _require_admissible(spec)
    alpha = _check_alpha(alpha)
    mod = resonant_modulus(spec, alpha)
    G = harmonic_average(mod, spec.q, "sin")
    D = delta(mod, spec.regime)
    scale = 1.0 if spec.regime == "libration" else mod.k
    C = scale * G / (math.sqrt(alpha) * D)
    return ThresholdRow(spec.regime, spec.q, mod, G, D, C, alpha, spec.p)


def threshold_table(alpha: float, qmax: int, regimes: Iterable[Regime] = ("libration", "rotation")) -> list[ThresholdRow]:
    """Rows for ``p = 1`` and even ``q <= qmax`` in each regime."""
    qmax = int(qmax)
    if qmax < 2:
        raise DomainError(f"qmax must be at least 2, got {qmax}")
    rows = []
    for regime in regimes:
        for q in range(2, qmax + 1, 2):
            rows.append(threshold_C1(ResonanceSpec(1, q, regime), alpha))
    return rows


CSV_COLUMNS = ("regime", "q", "k", "G1", "Delta", "C1")


def table_csv(rows: Iterable[ThresholdRow]) -> str:
    """CSV text with columns ``regime,q,k,G1,Delta,C1``."""
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(f"{r.regime},{r.q},{r.k.k:.15f},{r.G1:.10f},{r.Delta:.10f},{r.C1:.10f}")
    return "\n".join(lines) + "\n"


def phase_for_threshold(spec: ResonanceSpec, alpha: float, C1_actual: float) -> float:
    """Forcing phase ``tau0`` at which ``C1_actual`` balances the forcing.

    ``sin tau0 = C1_actual / C1``, principal branch.

    Raises
    ------
    AboveThresholdError
        If ``|C1_actual|`` exceeds the threshold.
    """
    row = threshold_C1(spec, alpha)
    c = float(C1_actual)
    if not math.isfinite(c):
        raise DomainError("C1_actual must be finite")
    if abs(c) > row.C1:
        raise AboveThresholdError(
            f"|C1| = {abs(c):.6g} exceeds the threshold {row.C1:.6g} of the {spec.p}:{spec.q} {spec.regime}"
        )
    return math.asin(max(-1.0, min(1.0, c / row.C1)))


def second_order_threshold(spec: ResonanceSpec, alpha: float) -> float:
    """Second-order constant ``C2`` in ``gamma = C2 epsilon^2``; not computed."""
    raise NotImplementedError("second-order thresholds gamma = C2 epsilon^2 are not implemented")
