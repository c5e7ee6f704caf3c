"""Elliptic integrals and Jacobi elliptic functions of real argument.

Everything is built on the arithmetic-geometric mean.  The complementary
modulus ``k' = sqrt(1 - k**2)`` is carried alongside ``k`` so that moduli
extremely close to one (``k'`` of order 1e-7) keep full relative precision;
construct such moduli with :meth:`Modulus.from_complement`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, NoSolutionError

#: Smallest admissible value of ``1 - k**2``.
MIN_COMPLEMENT_SQ = 1e-15

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Modulus:
    """Elliptic modulus ``k`` together with its complement ``kc``.

    Parameters
    ----------
    k : float
        Modulus in ``[0, 1)``.
    kc : float, optional
        Complementary modulus.  Computed from ``k`` when omitted.
    """

    k: float
    kc: float | None = None

    def __post_init__(self):
        k = float(self.k)
        if not (0.0 <= k < 1.0) or not math.isfinite(k):
            raise DomainError(f"modulus must lie in [0, 1), got {self.k!r}")
        if self.kc is None:
            kc = math.sqrt((1.0 - k) * (1.0 + k))
        else:
            kc = float(self.kc)
            if not (0.0 < kc <= 1.0):
                raise DomainError(f"complementary modulus must lie in (0, 1], got {kc!r}")
            if abs(k * k + kc * kc - 1.0) > 8 * _EPS:
                raise DomainError("k**2 + kc**2 must equal 1")
        if kc * kc < MIN_COMPLEMENT_SQ:
            raise DomainError(
                f"modulus too close to 1 (1 - k^2 = {kc * kc:.3e} < {MIN_COMPLEMENT_SQ:g})"
            )
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "kc", kc)

    @classmethod
    def from_complement(cls, kc: float) -> "Modulus":
        """Build a modulus from its complement, exact in ``kc``."""
        kc = float(kc)
        if not (0.0 < kc <= 1.0):
            raise DomainError(f"complementary modulus must lie in (0, 1], got {kc!r}")
        return cls(math.sqrt((1.0 - kc) * (1.0 + kc)), kc)

    @property
    def m(self) -> float:
        """Parameter ``k**2``."""
        return self.k * self.k

    @property
    def m1(self) -> float:
        """Complementary parameter ``1 - k**2``."""
        return self.kc * self.kc

    def complement(self) -> "Modulus":
        """The complementary modulus ``k'`` as a :class:`Modulus`."""
        if self.k == 0.0:
            raise DomainError("the complement of k=0 is k'=1, outside [0, 1)")
        return Modulus(self.kc, self.k)


ModulusLike = Union[Modulus, float]


def as_modulus(k: ModulusLike) -> Modulus:
    """Coerce a float or :class:`Modulus` to :class:`Modulus`."""
    if isinstance(k, Modulus):
        return k
    if isinstance(k, (bool, np.bool_)):
        raise DomainError("modulus must be a real number")
    return Modulus(float(k))


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two non-negative numbers."""
    if a < 0 or b < 0:
        raise DomainError("agm requires non-negative arguments")
    for _ in range(64):
        if abs(a - b) <= 2 * _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def _agm_sequence(mod: Modulus) -> tuple[list[float], list[float]]:
    """Sequences ``a_n`` and ``c_n`` of the AGM of ``(1, k')`` with ``c_0 = k``."""
    a, b = 1.0, mod.kc
    aa, cc = [1.0], [mod.k]
    for _ in range(64):
        if cc[-1] <= _EPS * aa[-1] * 0.5:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        aa.append(a)
        cc.append(c)
    return aa, cc


def complete_K(k: ModulusLike) -> float:
    """Complete elliptic integral of the first kind ``K(k)``."""
    mod = as_modulus(k)
    return math.pi / (2.0 * agm(1.0, mod.kc))


def complete_E(k: ModulusLike) -> float:
    """Complete elliptic integral of the second kind ``E(k)``.

    ``k = 1`` is accepted and gives ``E(1) = 1``.
    """
    if not isinstance(k, Modulus):
        kf = float(k)
        if kf == 1.0:
            return 1.0
        if not (0.0 <= kf <= 1.0):
            raise DomainError(f"modulus must lie in [0, 1], got {k!r}")
    mod = as_modulus(k)
    return complete_K(mod) * e_over_k(mod)


def e_over_k(k: ModulusLike) -> float:
    """Ratio ``E(k)/K(k)`` from the AGM series."""
    mod = as_modulus(k)
    aa, cc = _agm_sequence(mod)
    s = 0.0
    w = 0.5
    for c in cc:
        s += w * c * c
        w *= 2.0
    return 1.0 - s


def nome(k: ModulusLike) -> float:
    """Jacobi nome ``exp(-pi K(k')/K(k))``."""
    mod = as_modulus(k)
    if mod.k == 0.0:
        return 0.0
    return math.exp(-math.pi * agm(1.0, mod.kc) / agm(1.0, mod.k))


def _phases(u, mod: Modulus):
    """Descending Landen phases ``phi_0 .. phi_N`` for the reduced argument.

    Returns the phase list, the number ``m`` of half-periods ``2K`` removed
    from ``u`` and ``K``.
    """
    aa, cc = _agm_sequence(mod)
    K = math.pi / (2.0 * aa[-1])
    u = np.asarray(u, dtype=float)
    m = np.rint(u / (2.0 * K))
    ur = u - 2.0 * K * m
    n = len(aa) - 1
    phi = (2.0**n) * aa[n] * ur
    phis = [phi]
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(cc[j] / aa[j] * np.sin(phi)))
        phis.append(phi)
    phis.reverse()
    return phis, cc, m, K


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def jacobi_elliptic(u, k: ModulusLike):
    """Jacobi elliptic functions ``sn, cn, dn`` at real argument ``u``.

    ``u`` may be a scalar or array.  ``dn`` is formed from
    ``dn**2 = k'**2 + k**2 cn**2``, which stays accurate as ``k -> 1``.
    """
    mod = as_modulus(k)
    phis, _, m, _ = _phases(u, mod)
    sign = 1.0 - 2.0 * np.mod(m, 2.0)
    sn = sign * np.sin(phis[0])
    cn = sign * np.cos(phis[0])
    dn = np.sqrt(mod.m1 + mod.m * cn * cn)
    return _out(sn), _out(cn), _out(dn)


def jacobi_amplitude(u, k: ModulusLike):
    """Amplitude ``am(u, k)``, continuous and increasing in ``u``."""
    mod = as_modulus(k)
    phis, _, m, _ = _phases(u, mod)
    return _out(phis[0] + math.pi * m)


def jacobi_zeta(u, k: ModulusLike):
    """Jacobi zeta function ``Z(u, k) = E(u, k) - u E(k)/K(k)``."""
    mod = as_modulus(k)
    phis, cc, _, _ = _phases(u, mod)
    z = np.zeros_like(phis[0])
    for j in range(1, len(phis)):
        z = z + cc[j] * np.sin(phis[j])
    return _out(z)


def incomplete_E(u, k: ModulusLike):
    """Incomplete integral of the second kind in Jacobi form, ``int_0^u dn^2``."""
    mod = as_modulus(k)
    u = np.asarray(u, dtype=float)
    return _out(u * e_over_k(mod) + np.asarray(jacobi_zeta(u, mod)))


def carlson_rf(x, y, z):
    """Carlson's symmetric integral ``R_F(x, y, z)`` by duplication."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    if np.any(x < 0) or np.any(y < 0) or np.any(z < 0):
        raise DomainError("R_F requires non-negative arguments")
    for _ in range(60):
        mu = (x + y + z) / 3.0
        dx, dy, dz = 1 - x / mu, 1 - y / mu, 1 - z / mu
        if np.max(np.abs(np.stack([dx, dy, dz]))) < 1e-4:
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * (sy + sz) + sy * sz
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
    mu = (x + y + z) / 3.0
    dx, dy, dz = 1 - x / mu, 1 - y / mu, 1 - z / mu
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    poly = 1 - e2 / 10 + e3 / 14 + e2 * e2 / 24 - 3 * e2 * e3 / 44
    return _out(poly / np.sqrt(mu))


def elliptic_F(phi, k: ModulusLike):
    """Incomplete integral of the first kind ``F(phi, k)`` for any real ``phi``.

    Inverse of :func:`jacobi_amplitude`.
    """
    mod = as_modulus(k)
    phi = np.asarray(phi, dtype=float)
    n = np.rint(phi / math.pi)
    r = phi - n * math.pi
    s, c = np.sin(r), np.cos(r)
    f = s * np.asarray(carlson_rf(c * c, mod.m1 + mod.m * c * c, 1.0))
    return _out(f + 2.0 * n * complete_K(mod))


def fourier_coefficients(k: ModulusLike, tol: float = 1e-17):
    """Fourier coefficients of ``sn``, ``cn`` and ``dn`` in ``v = pi u / (2K)``.

    Returns
    -------
    sn_c, cn_c : ndarray
        ``sn = sum_j sn_c[j] sin((2j+1) v)``, ``cn = sum_j cn_c[j] cos((2j+1) v)``.
    dn_c : ndarray
        ``dn = dn_c[0] + sum_{j>=1} dn_c[j] cos(2 j v)``.

    Series are truncated once the nome power drops below ``tol``.
    """
    mod = as_modulus(k)
    K = complete_K(mod)
    q = nome(mod)
    nmax = 1
    if q > 0:
        nmax = max(1, int(math.ceil(math.log(tol) / math.log(q))) + 1)
    if mod.k == 0.0:
        return np.array([1.0]), np.array([1.0]), np.array([1.0])
    j = np.arange(nmax, dtype=float)
    odd = 2 * j + 1
    qo = q ** (odd / 2)
    amp = 2 * math.pi / (mod.k * K)
    sn_c = amp * qo / (1 - q**odd)
    cn_c = amp * qo / (1 + q**odd)
    dn_c = np.empty(nmax + 1)
    dn_c[0] = math.pi / (2 * K)
    jj = np.arange(1, nmax + 1, dtype=float)
    dn_c[1:] = (2 * math.pi / K) * q**jj / (1 + q ** (2 * jj))
    return sn_c, cn_c, dn_c


def jacobi_fourier(u, k: ModulusLike, tol: float = 1e-17):
    """Evaluate ``sn, cn, dn`` from their nome expansions (independent route)."""
    mod = as_modulus(k)
    u = np.asarray(u, dtype=float)
    if mod.k == 0.0:
        return _out(np.sin(u)), _out(np.cos(u)), _out(np.ones_like(u))
    K = complete_K(mod)
    v = math.pi * u / (2 * K)
    sn_c, cn_c, dn_c = fourier_coefficients(mod, tol)
    odd = 2 * np.arange(len(sn_c)) + 1
    ev = np.arange(1, len(dn_c))
    sn = np.tensordot(np.sin(np.multiply.outer(v, odd)), sn_c, axes=([-1], [0]))
    cn = np.tensordot(np.cos(np.multiply.outer(v, odd)), cn_c, axes=([-1], [0]))
    dn = dn_c[0] + np.tensordot(np.cos(np.multiply.outer(v, 2 * ev)), dn_c[1:], axes=([-1], [0]))
    return _out(sn), _out(cn), _out(dn)


def delta_libration(k: ModulusLike) -> float:
    """``(E/K - k'^2) / k^2``, evaluated without cancellation at small ``k``.

    Uses ``E/K - k'^2 = k^2/2 - sum_{n>=1} 2^(n-1) c_n^2`` with the AGM
    sequence ``c_{n+1} = c_n^2 / (4 a_{n+1})``.
    """
    mod = as_modulus(k)
    if mod.k == 0.0:
        return 0.5
    a, b = 1.0, mod.kc
    c = mod.k * mod.k / (2.0 * (1.0 + mod.kc))  # c_1 = (1 - k')/2
    a, b = 0.5 * (a + b), math.sqrt(a * b)
    s = 0.0
    w = 1.0
    r = c / mod.k
    for _ in range(64):
        term = w * r * r
        s += term
        if term <= _EPS * 0.25 * s or r == 0.0:
            break
        a_next = 0.5 * (a + b)
        b = math.sqrt(a * b)
        # c_{n+1} = c_n^2 / (4 a_{n+1}) expressed in r_n = c_n / k
        r = r * r * mod.k / (4.0 * a_next)
        a = a_next
        w *= 2.0
    return 0.5 - s


def solve_modulus(fn, target: float, increasing: bool, what: str = "equation") -> Modulus:
    """Solve ``fn(k) = target`` for a strictly monotone ``fn`` on ``[0, 1)``.

    ``fn(mod)`` returns ``(value, d value / dk)``.  Moduli near one are
    parametrised by ``s = log k'`` (``dk/ds = -k'^2/k``) so that ``k'`` is
    resolved to full relative precision.  Bisection safeguards Newton.
    """
    kc_min = math.sqrt(MIN_COMPLEMENT_SQ) * (1 + 1e-12)
    top = Modulus.from_complement(kc_min)
    vtop = fn(top)[0]
    if (increasing and target > vtop) or (not increasing and target < vtop):
        raise DomainError(f"solution of the {what} lies too close to k = 1")
    mid = Modulus(0.5)
    vmid = fn(mid)[0]
    small = (vmid >= target) if increasing else (vmid <= target)
    if small:
        lo, hi = 0.0, 0.5
        x = 0.25
        make = Modulus
    else:
        lo, hi = math.log(kc_min), math.log(mid.kc)
        x = 0.5 * (lo + hi)
        make = lambda s: Modulus.from_complement(math.exp(s))  # noqa: E731
    # sign of d fn / d x in the chosen variable
    up = increasing if small else not increasing
    for _ in range(200):
        mod = make(x)
        val, dk = fn(mod)
        r = val - target
        if (r > 0) == up:
            hi = x
        else:
            lo = x
        deriv = dk if small else -dk * mod.m1 / mod.k
        xn = x - r / deriv if deriv != 0 else math.inf
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        done = abs(xn - x) <= 4 * _EPS * max(abs(x), 1e-300) or hi - lo <= 4 * _EPS * max(abs(x), 1.0)
        x = xn
        if done:
            break
    return make(x)


def _kform(mod: Modulus, form: str) -> tuple[float, float]:
    """Value of the form and its derivative in ``k``."""
    K = complete_K(mod)
    if form == "K":
        if mod.k == 0.0:
            return K, 0.0
        E = K * e_over_k(mod)
        return K, (E / mod.m1 - K) / mod.k
    E = K * e_over_k(mod)
    return mod.k * K, E / mod.m1


def invert_modulus(target: float, form: str = "K") -> Modulus:
    """Solve ``K(k) = target`` (``form="K"``) or ``k K(k) = target`` (``form="kK"``).

    Raises
    ------
    NoSolutionError
        If ``target`` is below the infimum of the form.
    DomainError
        If the solution lies closer to ``k = 1`` than the modulus guard allows.
    """
    if form not in ("K", "kK"):
        raise DomainError(f"unknown form {form!r}; expected 'K' or 'kK'")
    target = float(target)
    if not math.isfinite(target):
        raise DomainError("target must be finite")
    inf = math.pi / 2 if form == "K" else 0.0
    if target < inf or (form == "kK" and target <= 0.0):
        raise NoSolutionError(f"{form}(k) = {target} has no solution; infimum is {inf}")
    if form == "K" and target == inf:
        return Modulus(0.0)
    mod = solve_modulus(lambda m: _kform(m, form), target, True, f"{form}(k) = {target}")
    if abs(_kform(mod, form)[0] - target) > 1e-12 * target:
        raise NoSolutionError(f"modulus inversion did not converge for target {target}")
    return mod
