"""Time integrators with exact stroboscopic sampling.

Two independent schemes are provided:

* ``rk_adaptive``: the embedded Dormand-Prince 8(5,3) pair with the usual
  step-size controller.
* ``taylor``: a Taylor-series method on the polynomial system obtained by
  adjoining ``s = sin x`` and ``c = cos x`` to the pendulum state.

Both stop exactly on requested output times and on the breakpoints of the
damping schedule, so Poincare samples are never interpolated.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numba as nb
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dc

from .errors import DomainError, IntegrationError, NonFiniteState, RadiusCollapse, StepSizeUnderflow
from .model import TWO_PI, State, VectorField, pendulum_kernel, wrap_angle

_A = np.ascontiguousarray(_dc.A[:12, :12])
_B = np.ascontiguousarray(_dc.B)
_C = np.ascontiguousarray(_dc.C[:12])
_E3 = np.ascontiguousarray(_dc.E3)
_E5 = np.ascontiguousarray(_dc.E5)

OK, UNDERFLOW, NONFINITE, COLLAPSE = 0, 1, 2, 3


@dataclass(frozen=True)
class IntegratorSpec:
    """Integrator choice and tolerances.

    Parameters
    ----------
    method : {"rk_adaptive", "taylor"}
    rel_tol, abs_tol : float
        Local error tolerances, each in ``[1e-14, 1e-3]``.
    max_step : float
        Largest step taken.
    taylor_order : int
        Series order for the Taylor method, in ``[8, 40]``.
    renormalize : bool
        Project ``(s, c)`` back onto the unit circle after each Taylor step.
    """

    method: Literal["rk_adaptive", "taylor"] = "rk_adaptive"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = math.pi
    taylor_order: int = 20
    renormalize: bool = True

    def __post_init__(self):
        if self.method not in ("rk_adaptive", "taylor"):
            raise DomainError(f"unknown method {self.method!r}")
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (1e-14 <= v <= 1e-3):
                raise DomainError(f"{name} must lie in [1e-14, 1e-3], got {v}")
        if not (self.max_step > 0 and math.isfinite(self.max_step)):
            raise DomainError("max_step must be positive and finite")
        if not (8 <= int(self.taylor_order) <= 40) or int(self.taylor_order) != self.taylor_order:
            raise DomainError(f"taylor_order must be an integer in [8, 40], got {self.taylor_order}")

    @classmethod
    def tight(cls, method: str = "rk_adaptive") -> "IntegratorSpec":
        """Tolerances used for invariant and threshold checks."""
        return cls(method=method, rel_tol=1e-12, abs_tol=1e-13)

    @classmethod
    def reference(cls, method: str = "rk_adaptive") -> "IntegratorSpec":
        """Smallest tolerances with a capped step, for cross-method comparisons.

        The embedded error estimate of the 8(5,3) pair is optimistic on large
        steps; capping the step keeps its global error below the Taylor
        method's on strongly amplifying transients.
        """
        if method == "taylor":
            return cls(method=method, rel_tol=1e-14, abs_tol=1e-14, taylor_order=30)
        return cls(method=method, rel_tol=1e-14, abs_tol=1e-14, max_step=0.05)

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------------------
# Dormand-Prince 8(5,3)


@nb.njit
def rk_advance(fun, p, t, y, tend, h, rtol, atol, hmax, xcap, K, ys, yn):
    """Advance ``y`` in place from ``t`` to exactly ``tend``.

    ``xcap`` bounds the magnitude of the first component entering the error
    scale, so unwrapped angles do not loosen the tolerance.
    Returns ``(status, t, h)`` with ``h`` the proposed next step.
    """
    d = y.shape[0]
    comp = np.zeros(d)
    if h <= 0.0:
        h = min(hmax, 0.1)
    while t < tend:
        if h > hmax:
            h = hmax
        # a step ending within roundoff of tend is taken as the last one
        last = t + h >= tend - 1e-12 * max(1.0, abs(tend))
        hh = tend - t if last else h
        if not last and hh < 1e-14 * max(1.0, abs(t)):
            return UNDERFLOW, t, h
        for s in range(12):
            for i in range(d):
                acc = 0.0
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ys[i] = y[i] + hh * acc
            fun(t + _C[s] * hh, ys, p, K[s])
        err5 = 0.0
        err3 = 0.0
        for i in range(d):
            inc = 0.0
            e5 = 0.0
            e3 = 0.0
            for s in range(12):
                inc += _B[s] * K[s, i]
                e5 += _E5[s] * K[s, i]
                e3 += _E3[s] * K[s, i]
            # compensated update: yn holds the increment until acceptance
            yn[i] = hh * inc
            m = max(abs(y[i]), abs(y[i] + yn[i]))
            if i == 0 and m > xcap:
                m = xcap
            sc = atol + rtol * m
            err5 += (e5 / sc) ** 2
            err3 += (e3 / sc) ** 2
        den = err5 + 0.01 * err3
        err = hh * err5 / math.sqrt(den * d) if den > 0.0 else 0.0
        if not np.isfinite(err):
            h = 0.2 * hh
            continue
        if err <= 1.0:
            t = tend if last else t + hh
            for i in range(d):
                dy = yn[i] - comp[i]
                tmp = y[i] + dy
                comp[i] = (tmp - y[i]) - dy
                y[i] = tmp
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * err ** (-0.125)))
            if not last or fac < 1.0:
                h = hh * fac
        else:
            h = hh * max(0.2, 0.9 * err ** (-0.125))
    for i in range(d):
        if not np.isfinite(y[i]):
            return NONFINITE, t, h
    return OK, t, h


@nb.njit
def rk_segment(fun, p, t, y, tend, h, rtol, atol, hmax, xcap, tb, K, ys, yn):
    """Like :func:`rk_advance` but stops on the breakpoint ``tb`` if crossed."""
    if t < tb < tend:
        st, t, h = rk_advance(fun, p, t, y, tb, h, rtol, atol, hmax, xcap, K, ys, yn)
        if st != OK:
            return st, t, h
    return rk_advance(fun, p, t, y, tend, h, rtol, atol, hmax, xcap, K, ys, yn)


@nb.njit
def rk_samples(fun, p, y, t0, times, rtol, atol, hmax, xcap, tb, out):
    """Integrate through increasing ``times`` storing states in ``out``."""
    d = y.shape[0]
    K = np.empty((12, d))
    ys = np.empty(d)
    yn = np.empty(d)
    t = t0
    h = -1.0
    for j in range(times.shape[0]):
        st, t, h = rk_segment(fun, p, t, y, times[j], h, rtol, atol, hmax, xcap, tb, K, ys, yn)
        if st != OK:
            return st, j, t
        for i in range(d):
            out[j, i] = y[i]
    return OK, times.shape[0], t


# ----------------------------------------------------------------------------
# Taylor series on the augmented pendulum (x, y, s, c)


@nb.njit(cache=True)
def taylor_coefficients(p, t, st, order, X, Y, S, C, F, G):
    """Fill Taylor coefficient arrays of the augmented pendulum at time ``t``."""
    a, beta, tau0 = p[0], p[1], p[2]
    phi = t - tau0
    cph = math.cos(phi)
    sph = math.sin(phi)
    inv_fact = 1.0
    F[0] = a - beta * cph
    for j in range(1, order + 1):
        inv_fact /= j
        r = j % 4
        if r == 0:
            dj = cph
        elif r == 1:
            dj = -sph
        elif r == 2:
            dj = -cph
        else:
            dj = sph
        F[j] = -beta * dj * inv_fact
    for j in range(order + 1):
        G[j] = 0.0
    if p[5] > 0.0 and t < p[5]:
        G[0] = p[3] + (p[4] - p[3]) * t / p[5]
        G[1] = (p[4] - p[3]) / p[5]
    else:
        G[0] = p[4]
    X[0] = st[0]
    Y[0] = st[1]
    S[0] = st[2]
    C[0] = st[3]
    for j in range(order):
        fs = 0.0
        gy = 0.0
        cy = 0.0
        sy = 0.0
        for i in range(j + 1):
            fs += F[i] * S[j - i]
            gy += G[i] * Y[j - i]
            cy += C[i] * Y[j - i]
            sy += S[i] * Y[j - i]
        X[j + 1] = Y[j] / (j + 1)
        Y[j + 1] = -(fs + gy) / (j + 1)
        S[j + 1] = cy / (j + 1)
        C[j + 1] = -sy / (j + 1)


@nb.njit(cache=True)
def _horner(A, order, h):
    acc = A[order]
    for j in range(order - 1, -1, -1):
        acc = acc * h + A[j]
    return acc


@nb.njit(cache=True)
def taylor_step_kernel(p, t, st, order, rtol, atol, hlim, xcap, renorm, X, Y, S, C, F, G):
    """One Taylor step in place; the step never exceeds ``hlim``.

    Step size: ``0.8 * min_j (tol / |a_j|)^(1/j)`` over the last two orders,
    with ``tol`` the mixed absolute/relative tolerance.
    Returns ``(status, h)``.
    """
    taylor_coefficients(p, t, st, order, X, Y, S, C, F, G)
    m = max(min(abs(st[0]), xcap), abs(st[1]))
    tol = atol + rtol * m
    h = hlim
    for j in (order - 1, order):
        nrm = max(abs(X[j]), abs(Y[j]))
        if nrm > 0.0:
            hj = 0.8 * (tol / nrm) ** (1.0 / j)
            if hj < h:
                h = hj
    if h < 1e-12 and h < hlim:
        return COLLAPSE, h
    st[0] = _horner(X, order, h)
    st[1] = _horner(Y, order, h)
    st[2] = _horner(S, order, h)
    st[3] = _horner(C, order, h)
    if renorm:
        r = math.sqrt(st[2] * st[2] + st[3] * st[3])
        st[2] /= r
        st[3] /= r
    for i in range(4):
        if not np.isfinite(st[i]):
            return NONFINITE, h
    return OK, h


@nb.njit(cache=True)
def taylor_advance(p, t, st, tend, order, rtol, atol, hmax, xcap, renorm, work):
    """Advance the augmented state to exactly ``tend``; returns ``(status, t, nsteps)``."""
    X = work[0]
    Y = work[1]
    S = work[2]
    C = work[3]
    F = work[4]
    G = work[5]
    n = 0
    while t < tend:
        hlim = min(hmax, tend - t)
        st_code, h = taylor_step_kernel(p, t, st, order, rtol, atol, hlim, xcap, renorm, X, Y, S, C, F, G)
        if st_code != OK:
            return st_code, t, n
        n += 1
        if h >= tend - t - 1e-12 * max(1.0, abs(tend)):
            t = tend
        else:
            t += h
    return OK, t, n


@nb.njit(cache=True)
def taylor_samples(p, st, t0, times, order, rtol, atol, hmax, xcap, renorm, tb, out):
    work = np.zeros((6, order + 1))
    t = t0
    for j in range(times.shape[0]):
        if t < tb < times[j]:
            code, t, _ = taylor_advance(p, t, st, tb, order, rtol, atol, hmax, xcap, renorm, work)
            if code != OK:
                return code, j, t
        code, t, _ = taylor_advance(p, t, st, times[j], order, rtol, atol, hmax, xcap, renorm, work)
        if code != OK:
            return code, j, t
        out[j, 0] = st[0]
        out[j, 1] = st[1]
    return OK, times.shape[0], t


# ----------------------------------------------------------------------------
# Python front end


def _xcap(field: VectorField) -> float:
    return math.pi if field.periodic_x else math.inf


def _breakpoint(field: VectorField) -> float:
    return field.breakpoints[0] if field.breakpoints else -1.0


def _raise(code: int, t: float, state) -> None:
    if code == UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow at tau={t}", t, state)
    if code == NONFINITE:
        raise NonFiniteState(f"non-finite state at tau={t}", t, state)
    if code == COLLAPSE:
        raise RadiusCollapse(f"Taylor radius estimate collapsed at tau={t}", t, state)
    raise IntegrationError(f"integration failed with code {code} at tau={t}", t, state)


def _check_taylor(field: VectorField) -> None:
    if field.kernel is not pendulum_kernel:
        raise DomainError("the Taylor method is implemented for the pendulum field only")


def integrate_samples(y0, tau_start: float, times, field: VectorField, spec: IntegratorSpec | None = None):
    """Integrate ``y0`` from ``tau_start`` and return the states at ``times``.

    Parameters
    ----------
    y0 : array_like
        Initial state of dimension ``field.dim``.
    times : array_like
        Non-decreasing output times, all ``>= tau_start``.

    Returns
    -------
    ndarray, shape (len(times), dim)
    """
    spec = spec or IntegratorSpec()
    y = np.array(y0, dtype=float).reshape(-1)
    if y.shape[0] != field.dim:
        raise DomainError(f"state dimension {y.shape[0]} does not match field dimension {field.dim}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state is not finite", tau_start, y)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size and (times[0] < tau_start or np.any(np.diff(times) < 0)):
        raise DomainError("output times must be non-decreasing and not before the start time")
    out = np.empty((times.size, field.dim))
    tb = _breakpoint(field)
    if spec.method == "taylor":
        _check_taylor(field)
        st = np.array([y[0], y[1], math.sin(y[0]), math.cos(y[0])])
        code, j, t = taylor_samples(
            field.args, st, float(tau_start), times, int(spec.taylor_order), spec.rel_tol,
            spec.abs_tol, spec.max_step, _xcap(field), spec.renormalize, tb, out,
        )
        last = st[:2]
    else:
        code, j, t = rk_samples(
            field.kernel, field.args, y, float(tau_start), times, spec.rel_tol, spec.abs_tol,
            spec.max_step, _xcap(field), tb, out,
        )
        last = y
    if code != OK:
        good = out[j - 1].copy() if j > 0 else np.array(y0, dtype=float)
        _raise(code, t, good if code == NONFINITE else last.copy())
    return out


def integrate_to(state: State, tau_end: float, field: VectorField, spec: IntegratorSpec | None = None) -> State:
    """Solution of the initial value problem at ``tau_end``."""
    if tau_end < state.tau:
        raise DomainError("tau_end must not precede the state's time")
    out = integrate_samples([state.x, state.y], state.tau, [tau_end], field, spec)
    return State(float(out[0, 0]), float(out[0, 1]), float(tau_end))


def taylor_step(state, tau: float, field: VectorField, order: int = 20, rel_tol: float = 1e-12,
                abs_tol: float = 1e-14, max_step: float = math.pi, renormalize: bool = False):
    """One step of the Taylor method on the augmented state ``(x, y, s, c)``.

    Returns
    -------
    next_state : ndarray, shape (4,)
    h : float
        Step size taken.

    Raises
    ------
    RadiusCollapse
        If the estimated step falls below 1e-12.
    """
    _check_taylor(field)
    st = np.array(state, dtype=float).reshape(4)
    if abs(st[2] - math.sin(st[0])) > 1e-12 or abs(st[3] - math.cos(st[0])) > 1e-12:
        raise DomainError("augmented state must satisfy s = sin x and c = cos x")
    w = np.zeros((6, order + 1))
    code, h = taylor_step_kernel(
        field.args, float(tau), st, int(order), rel_tol, abs_tol, max_step, _xcap(field),
        renormalize, w[0], w[1], w[2], w[3], w[4], w[5],
    )
    if code != OK:
        _raise(code, tau, st)
    return st, h


def taylor_run(state, tau: float, n_steps: int, field: VectorField, order: int = 20,
               rel_tol: float = 1e-12, abs_tol: float = 1e-14, max_step: float = math.pi,
               renormalize: bool = False):
    """Take ``n_steps`` free Taylor steps; returns the final augmented state and time."""
    _check_taylor(field)
    st = np.array(state, dtype=float).reshape(4)
    w = np.zeros((6, order + 1))
    return _taylor_run(field.args, float(tau), st, int(n_steps), int(order), rel_tol, abs_tol,
                       max_step, _xcap(field), renormalize, w)


@nb.njit(cache=True)
def _taylor_run(p, t, st, n, order, rtol, atol, hmax, xcap, renorm, work):
    for _ in range(n):
        code, h = taylor_step_kernel(p, t, st, order, rtol, atol, hmax, xcap, renorm,
                                     work[0], work[1], work[2], work[3], work[4], work[5])
        if code != OK:
            break
        t += h
    return st, t


@dataclass(frozen=True)
class PoincareSeries:
    """Stroboscopic samples at ``tau_start + 2 pi k`` for ``k`` in ``k_range``.

    Attributes
    ----------
    states : ndarray, shape (n+1, 2)
        Wrapped ``(x, y)`` samples.
    unwrapped : ndarray, shape (n+1,)
        Unwrapped angle at each sample.
    taus : ndarray
        Sample times.
    winding : ndarray, shape (n,)
        Per-period increments of the unwrapped angle divided by ``2 pi``.
    """

    states: np.ndarray
    unwrapped: np.ndarray
    taus: np.ndarray
    winding: np.ndarray
    k_range: tuple[int, int]

    def __len__(self) -> int:
        return self.states.shape[0]


def poincare_series(state: State, n_periods: int, field: VectorField,
                    spec: IntegratorSpec | None = None) -> PoincareSeries:
    """Sample the flow every forcing period starting at ``state.tau``."""
    n_periods = int(n_periods)
    if n_periods < 1:
        raise DomainError("n_periods must be at least 1")
    taus = state.tau + TWO_PI * np.arange(1, n_periods + 1)
    out = integrate_samples([state.x, state.y], state.tau, taus, field, spec)
    xs = np.concatenate([[state.x], out[:, 0]])
    ys = np.concatenate([[state.y], out[:, 1]])
    wrapped = wrap_angle(xs) if field.periodic_x else xs
    return PoincareSeries(
        states=np.column_stack([wrapped, ys]),
        unwrapped=xs,
        taus=np.concatenate([[state.tau], taus]),
        winding=np.diff(xs) / TWO_PI,
        k_range=(0, n_periods),
    )
