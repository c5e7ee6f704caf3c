"""Attractor classification and basin-of-attraction statistics.

Each initial condition is integrated with stroboscopic sampling at
``tau = 2 pi k``.  A compiled per-sample routine watches the Poincare points
and stops as soon as one of three things is established:

* the orbit sits on a known attractor (library snapshot) for
  ``confirm_periods`` full cycles,
* the orbit repeats itself with least period ``n <= max_period``,
* the orbit rests on an equilibrium.

Samples run in fixed stages against a frozen library snapshot and are merged
in index order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence

import numba as nb
import numpy as np

from .errors import AbsentPairError, DomainError, LostTrackError
from .integrate import IntegratorSpec, PoincareSeries, rk_segment
from .model import TWO_PI, DampingSchedule, PendulumParams, State, VectorField, pendulum_field, wrap_angle

CODE_LIBRARY, CODE_NEW, CODE_FIXED, CODE_UNRESOLVED, CODE_ERROR = 0, 1, 2, 3, 4

WINDOW = (-math.pi, math.pi, -4.0, 4.0)


@dataclass(frozen=True)
class ClassificationPolicy:
    """Tolerances and budgets of the classifier.

    Attributes
    ----------
    match_tol : float
        Max-norm distance for matching a library witness.
    fp_tol : float
        Distance from an equilibrium counted as resting on it.
    converge_tol : float
        Distance between successive cycles counted as a repeat.
    confirm_periods : int
        Number of consecutive cycles required for every decision.
    max_period : int
        Longest cycle detected, in forcing periods.
    budget_periods : int
        Forcing periods sampled after the ramp before giving up.
    region_radius : float
        Hausdorff radius for attaching an undecided bounded orbit to a
        known periodic attractor.
    integrator : IntegratorSpec
        Must use the ``rk_adaptive`` method.
    """

    match_tol: float = 1e-3
    fp_tol: float = 1e-4
    converge_tol: float = 1e-6
    confirm_periods: int = 3
    max_period: int = 16
    budget_periods: int = 5000
    region_radius: float = 0.3
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)

    def __post_init__(self):
        if isinstance(self.integrator, dict):
            object.__setattr__(self, "integrator", IntegratorSpec(**self.integrator))
        for name in ("match_tol", "fp_tol", "converge_tol", "region_radius"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise DomainError(f"{name} must lie in (0, 1), got {v}")
        if self.converge_tol > self.match_tol:
            raise DomainError("converge_tol must not exceed match_tol")
        for name, lo in (("confirm_periods", 1), ("max_period", 1), ("budget_periods", 1)):
            v = getattr(self, name)
            if int(v) != v or v < lo:
                raise DomainError(f"{name} must be an integer >= {lo}, got {v}")
        if self.integrator.method != "rk_adaptive":
            raise DomainError("basin classification uses the rk_adaptive integrator")

    @property
    def ring_size(self) -> int:
        return max(64, (self.confirm_periods + 1) * self.max_period)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SamplingSpec:
    """Initial conditions over the window ``[x_lo, x_hi] x [y_lo, y_hi]``.

    ``mode="random"`` draws ``count`` uniform points from a Philox stream
    keyed by ``seed``; point ``i`` depends only on ``(seed, i)``.
    ``mode="mesh"`` takes cell centres of a ``grid[0] x grid[1]`` mesh, a
    set symmetric under ``(x, y) -> (-x, -y)`` for the default window.
    """

    mode: Literal["random", "mesh"] = "random"
    count: int = 20000
    grid: tuple[int, int] | None = None
    window: tuple[float, float, float, float] = WINDOW
    seed: int = 42

    def __post_init__(self):
        if self.mode not in ("random", "mesh"):
            raise DomainError(f"unknown sampling mode {self.mode!r}")
        object.__setattr__(self, "window", tuple(float(v) for v in self.window))
        x0, x1, y0, y1 = self.window
        if not (x0 < x1 and y0 < y1):
            raise DomainError("window bounds must be increasing")
        if self.mode == "random":
            if int(self.count) != self.count or self.count < 1:
                raise DomainError("count must be a positive integer")
        else:
            if self.grid is None or len(self.grid) != 2 or min(self.grid) < 1:
                raise DomainError("mesh sampling needs grid dimensions (W, H) >= 1")
            object.__setattr__(self, "grid", (int(self.grid[0]), int(self.grid[1])))
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def size(self) -> int:
        return self.count if self.mode == "random" else self.grid[0] * self.grid[1]

    def points(self) -> np.ndarray:
        """Initial conditions, shape ``(size, 2)``."""
        x0, x1, y0, y1 = self.window
        if self.mode == "random":
            rng = np.random.Generator(np.random.Philox(key=int(self.seed)))
            u = rng.random((self.count, 2))
            return np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]])
        w, h = self.grid
        xs = x0 + (np.arange(w) + 0.5) * (x1 - x0) / w
        ys = y0 + (np.arange(h) + 0.5) * (y1 - y0) / h
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["grid"] = list(self.grid) if self.grid else None
        return d


# ----------------------------------------------------------------------------
# compiled classifier


@nb.njit(cache=True)
def _dist(ax, ay, bx, by, periodic):
    dx = ax - bx
    if periodic:
        dx = dx - TWO_PI * math.floor((dx + math.pi) / TWO_PI)
    return max(abs(dx), abs(ay - by))


@nb.njit
def _classify_kernel(fun, p, x0, y0, t_start, tb, t_first, budget, rtol, atol, hmax, xcap,
                     periodic, eqs, fp_tol, match_tol, conv_tol, confirm, max_period,
                     lib_n, lib_w, lib_pts, ring, out, K, ys, yn):
    """Classify one initial condition.

    Returns ``(code, a, b, k)``: for a library match ``a`` is the entry; for a
    new cycle ``a`` is the period and ``b`` the winding over one cycle, with
    the cycle in ``out``; for a fixed point ``a`` is the equilibrium index;
    when unresolved ``a`` is the number of tail points in ``out``.  ``k`` is
    the number of periods sampled.
    """
    nring = ring.shape[0]
    y = np.empty(2)
    y[0] = x0
    y[1] = y0
    t = t_start
    h = -1.0
    if t_first > t:
        st, t, h = rk_segment(fun, p, t, y, t_first, h, rtol, atol, hmax, xcap, tb, K, ys, yn)
        if st != 0:
            return CODE_ERROR, st, 0, 0
    neq = eqs.shape[0]
    fpc = np.zeros(neq, np.int64)
    nlib = lib_n.shape[0]
    c = 0
    for k in range(budget + 1):
        if k > 0:
            st, t, h = rk_segment(fun, p, t, y, t_first + TWO_PI * k, h, rtol, atol, hmax, xcap,
                                  tb, K, ys, yn)
            if st != 0:
                return CODE_ERROR, st, 0, k
        ux = y[0]
        wy = y[1]
        if periodic:
            wx = math.pi - (math.pi - ux) % TWO_PI
        else:
            wx = ux
        slot = c % nring
        ring[slot, 0] = wx
        ring[slot, 1] = wy
        ring[slot, 2] = ux
        c += 1

        for e in range(neq):
            if _dist(wx, wy, eqs[e], 0.0, periodic) < fp_tol:
                fpc[e] += 1
            else:
                fpc[e] = 0
            if fpc[e] >= confirm:
                return CODE_FIXED, e, 0, k

        for L in range(nlib):
            n = lib_n[L]
            need = confirm * n
            if c < need or c < n + 1:
                continue
            for j in range(n):
                if _dist(wx, wy, lib_pts[L, j, 0], lib_pts[L, j, 1], periodic) >= match_tol:
                    continue
                ok = True
                for i in range(1, need):
                    s = (c - 1 - i) % nring
                    jj = ((j - i) % n + n) % n
                    if _dist(ring[s, 0], ring[s, 1], lib_pts[L, jj, 0], lib_pts[L, jj, 1],
                             periodic) >= match_tol:
                        ok = False
                        break
                if ok:
                    dw = (ux - ring[(c - 1 - n) % nring, 2]) / TWO_PI
                    if abs(dw - lib_w[L]) < 0.01:
                        return CODE_LIBRARY, L, 0, k

        for n in range(1, max_period + 1):
            need = confirm * n
            if c < need + n:
                break
            ok = True
            for i in range(need):
                a = (c - 1 - i) % nring
                b = (c - 1 - i - n) % nring
                if _dist(ring[a, 0], ring[a, 1], ring[b, 0], ring[b, 1], periodic) >= conv_tol:
                    ok = False
                    break
            if ok:
                # a cycle whose sub-cycle already nearly closes is a slow
                # transient onto the shorter cycle (multiplier close to -1)
                for d in range(1, n):
                    if n % d != 0:
                        continue
                    spread = 0.0
                    for i in range(n):
                        a = (c - 1 - i) % nring
                        b = (c - 1 - i - d) % nring
                        spread = max(spread, _dist(ring[a, 0], ring[a, 1], ring[b, 0], ring[b, 1], periodic))
                    if spread < match_tol:
                        ok = False
                        break
            if ok:
                dw = (ux - ring[(c - 1 - n) % nring, 2]) / TWO_PI
                w = np.rint(dw)
                if abs(dw - w) < 0.01:
                    for i in range(n):
                        s = (c - n + i) % nring
                        out[i, 0] = ring[s, 0]
                        out[i, 1] = ring[s, 1]
                        out[i, 2] = ring[s, 2]
                    return CODE_NEW, n, np.int64(w), k
    m = min(c, nring)
    for i in range(m):
        s = (c - m + i) % nring
        out[i, 0] = ring[s, 0]
        out[i, 1] = ring[s, 1]
        out[i, 2] = ring[s, 2]
    return CODE_UNRESOLVED, m, 0, budget


@nb.njit
def _classify_batch(fun, p, pts, t_start, tb, t_first, budget, rtol, atol, hmax, xcap, periodic,
                    eqs, fp_tol, match_tol, conv_tol, confirm, max_period, lib_n, lib_w, lib_pts,
                    nring, codes, va, vb, vk, outs):
    K = np.empty((12, 2))
    ys = np.empty(2)
    yn = np.empty(2)
    ring = np.empty((nring, 3))
    for i in range(pts.shape[0]):
        code, a, b, k = _classify_kernel(
            fun, p, pts[i, 0], pts[i, 1], t_start, tb, t_first, budget, rtol, atol, hmax, xcap,
            periodic, eqs, fp_tol, match_tol, conv_tol, confirm, max_period, lib_n, lib_w,
            lib_pts, ring, outs[i], K, ys, yn,
        )
        codes[i] = code
        va[i] = a
        vb[i] = b
        vk[i] = k


# ----------------------------------------------------------------------------
# attractors and library


@dataclass
class Attractor:
    """A classified invariant set.

    Attributes
    ----------
    id : int
        Index in its library.
    kind : {"fixed_point", "periodic", "aperiodic_region"}
    period_n : int
        Cycle length in forcing periods.
    winding : int
        Net revolutions over one cycle; ``winding / period_n`` per period.
    witness : ndarray, shape (period_n, 2)
        Wrapped Poincare points in orbit order, starting from the
        lexicographically smallest point.
    label : str
        Short name (``FP``, ``OSC``, ``PR``, ``NR2``, ``DO4``...).
    bucket : int or None
        For an aperiodic region, the periodic attractor it is reported with.
    """

    id: int
    kind: str
    period_n: int
    winding: int
    witness: np.ndarray
    label: str = ""
    bucket: int | None = None
    context: dict = field(default_factory=dict, repr=False)
    centre: float | None = None

    @property
    def family(self) -> str:
        """Label without the suffix that separates symmetric copies."""
        return self.label.rstrip("abcdefghijklmnopqrstuvwxyz")

    @property
    def winding_per_period(self) -> float:
        w = self.winding / self.period_n
        return int(w) if w == int(w) else w

    @property
    def is_rotation(self) -> bool:
        return self.winding != 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "label": self.label,
            "family": self.family,
            "centre": self.centre,
            "period": self.period_n,
            "winding": self.winding,
            "winding_per_period": self.winding_per_period,
            "bucket": self.bucket,
            "witness": np.asarray(self.witness).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Attractor":
        return cls(d["id"], d["kind"], d["period"], d["winding"], np.array(d["witness"], float).reshape(-1, 2),
                   d.get("label", ""), d.get("bucket"))


def _canonical(points: np.ndarray) -> np.ndarray:
    """Rotate a cycle so it starts at its lexicographically smallest point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    return np.roll(pts, -start, axis=0)


def _cycle_distance(a: np.ndarray, b: np.ndarray, periodic: bool = True) -> float:
    """Max-norm distance between two equal-length cycles, minimised over alignment."""
    if a.shape != b.shape:
        return math.inf
    best = math.inf
    for s in range(a.shape[0]):
        r = np.roll(b, -s, axis=0)
        dx = a[:, 0] - r[:, 0]
        if periodic:
            dx = dx - TWO_PI * np.floor((dx + math.pi) / TWO_PI)
        best = min(best, float(np.max(np.maximum(np.abs(dx), np.abs(a[:, 1] - r[:, 1])))))
    return best


def _pairwise(a: np.ndarray, b: np.ndarray, periodic: bool = True) -> np.ndarray:
    dx = a[:, None, 0] - b[None, :, 0]
    if periodic:
        dx = dx - TWO_PI * np.floor((dx + math.pi) / TWO_PI)
    return np.hypot(dx, a[:, None, 1] - b[None, :, 1])


def hausdorff(a: np.ndarray, b: np.ndarray, periodic: bool = True) -> float:
    """Hausdorff distance between two point sets on the cylinder."""
    d = _pairwise(np.asarray(a, float).reshape(-1, 2), np.asarray(b, float).reshape(-1, 2), periodic)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


class AttractorLibrary:
    """Ordered collection of attractors found so far.

    Parameters
    ----------
    match_tol : float
        Two cycles closer than this (after cyclic alignment) are the same.
    periodic_x : bool
        Whether distances wrap in the first coordinate.
    orientation : str
        Used only for labels.
    """

    def __init__(self, match_tol: float = 1e-3, periodic_x: bool = True, orientation: str = "downward",
                 equilibria: Sequence[float] = (0.0, math.pi), field: VectorField | None = None):
        self.field = field
        self.match_tol = float(match_tol)
        self.periodic_x = bool(periodic_x)
        self.orientation = orientation
        self.equilibria = tuple(float(e) for e in equilibria)
        self.attractors: list[Attractor] = []

    def __len__(self) -> int:
        return len(self.attractors)

    def __iter__(self):
        return iter(self.attractors)

    def __getitem__(self, i: int) -> Attractor:
        return self.attractors[i]

    def find(self, kind: str, period_n: int, winding: int, points: np.ndarray) -> int | None:
        """Id of an attractor matching the cycle, or ``None``."""
        pts = np.asarray(points, float).reshape(-1, 2)
        for a in self.attractors:
            if a.kind != kind or a.period_n != period_n or a.winding != winding:
                continue
            if _cycle_distance(a.witness, pts, self.periodic_x) < self.match_tol:
                return a.id
        return None

    def add(self, kind: str, period_n: int, winding: int, points: np.ndarray, bucket: int | None = None,
            context: dict | None = None) -> int:
        """Insert a cycle unless an equal one is present; returns its id."""
        pts = _canonical(points)
        if kind != "aperiodic_region":
            found = self.find(kind, period_n, winding, pts)
            if found is not None:
                return found
        att = Attractor(len(self.attractors), kind, int(period_n), int(winding), pts, "", bucket, context or {})
        if kind == "periodic" and winding == 0 and self.field is not None and self.periodic_x:
            att.centre = orbit_centre(self.field, pts[0], int(period_n))
        self.attractors.append(att)
        self._relabel()
        return att.id

    def fixed_point(self, eq_index: int) -> int:
        x = self.equilibria[eq_index]
        return self.add("fixed_point", 1, 0, np.array([[wrap_angle(x) if self.periodic_x else x, 0.0]]))

    def region_for(self, bucket: int) -> int:
        for a in self.attractors:
            if a.kind == "aperiodic_region" and a.bucket == bucket:
                return a.id
        base = self.attractors[bucket]
        return self.add("aperiodic_region", base.period_n, base.winding, base.witness, bucket=bucket)

    def snapshot(self, max_period: int):
        """Arrays consumed by the compiled classifier."""
        ids = [a.id for a in self.attractors if a.kind != "aperiodic_region"]
        n = len(ids)
        lib_n = np.zeros(n, np.int64)
        lib_w = np.zeros(n, np.float64)
        lib_pts = np.zeros((n, max(1, max_period), 2))
        for r, i in enumerate(ids):
            a = self.attractors[i]
            lib_n[r] = a.period_n
            lib_w[r] = a.winding
            lib_pts[r, : a.period_n] = a.witness
        return np.array(ids, np.int64), lib_n, lib_w, lib_pts

    def _label_of(self, a: Attractor) -> str:
        inverted = self.orientation == "inverted"
        if a.kind == "fixed_point":
            at_origin = abs(a.witness[0, 0]) < 1.0
            if inverted:
                return "FP" if at_origin else "DFP"
            return "FP" if at_origin else "UFP"
        n = a.period_n
        suffix = "" if n == 1 else str(n)
        if a.kind == "aperiodic_region":
            return f"{self.attractors[a.bucket].label}~" if a.bucket is not None else "AR"
        if a.winding > 0:
            return "PR" + suffix
        if a.winding < 0:
            return "NR" + suffix
        cx = a.centre
        if cx is None:
            cx = math.atan2(np.mean(np.sin(a.witness[:, 0])), np.mean(np.cos(a.witness[:, 0])))
        if inverted:
            return ("UO" if abs(cx) < math.pi / 2 else "DO") + str(n)
        return "OSC" if n == 2 else f"OSC{n}"

    def _relabel(self) -> None:
        base = [self._label_of(a) for a in self.attractors if a.kind != "aperiodic_region"]
        counts: dict[str, int] = {}
        for b in base:
            counts[b] = counts.get(b, 0) + 1
        seen: dict[str, int] = {}
        for a in self.attractors:
            if a.kind == "aperiodic_region":
                continue
            b = self._label_of(a)
            if counts[b] > 1:
                a.label = b + "abcdefghijklmnopqrstuvwxyz"[seen.get(b, 0) % 26]
                seen[b] = seen.get(b, 0) + 1
            else:
                a.label = b
        for a in self.attractors:
            if a.kind == "aperiodic_region":
                a.label = self._label_of(a)

    def by_label(self, label: str) -> Attractor | None:
        for a in self.attractors:
            if a.label == label:
                return a
        return None

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self.attractors]


# ----------------------------------------------------------------------------
# classification front end


@dataclass(frozen=True)
class Classification:
    """Outcome for one initial condition.

    ``attractor_id`` is ``None`` when the sample is unresolved.
    """

    attractor_id: int | None
    code: int
    periods: int
    tail: np.ndarray | None = None

    @property
    def unresolved(self) -> bool:
        return self.attractor_id is None


def _first_sample_time(t_start: float, T0: float) -> float:
    t = max(t_start, T0)
    return TWO_PI * math.ceil(t / TWO_PI - 1e-12)


def _field_for(params, schedule) -> VectorField:
    if isinstance(params, VectorField):
        return params
    return pendulum_field(params, schedule)


def _run_batch(fld: VectorField, pts: np.ndarray, t_start: float, policy: ClassificationPolicy, snap):
    ids, lib_n, lib_w, lib_pts = snap
    spec = policy.integrator
    n = pts.shape[0]
    nring = policy.ring_size
    codes = np.zeros(n, np.int64)
    va = np.zeros(n, np.int64)
    vb = np.zeros(n, np.int64)
    vk = np.zeros(n, np.int64)
    outs = np.zeros((n, nring, 3))
    tb = fld.breakpoints[0] if fld.breakpoints else -1.0
    _classify_batch(
        fld.kernel, fld.args, np.ascontiguousarray(pts, dtype=float), float(t_start), tb,
        _first_sample_time(t_start, fld.T0), int(policy.budget_periods), spec.rel_tol, spec.abs_tol,
        spec.max_step, math.pi if fld.periodic_x else math.inf, fld.periodic_x,
        np.array(fld.equilibria, float), policy.fp_tol, policy.match_tol, policy.converge_tol,
        int(policy.confirm_periods), int(policy.max_period), lib_n, lib_w, lib_pts, nring,
        codes, va, vb, vk, outs,
    )
    return ids, codes, va, vb, vk, outs


def _merge_one(library: AttractorLibrary, ids, code: int, a: int, b: int, out: np.ndarray,
               policy: ClassificationPolicy) -> int | None:
    """Turn a compiled result into a library id (``None`` if unresolved)."""
    if code == CODE_LIBRARY:
        return int(ids[a])
    if code == CODE_FIXED:
        return library.fixed_point(a)
    if code == CODE_NEW:
        pts = out[:a, :2]
        if a == 1 and b == 0:
            for e, x in enumerate(library.equilibria):
                if _dist(pts[0, 0], pts[0, 1], x, 0.0, library.periodic_x) < policy.fp_tol:
                    return library.fixed_point(e)
        return library.add("periodic", a, b, pts)
    if code == CODE_UNRESOLVED:
        tail = out[:a]
        if a < 2:
            return None
        rate = (tail[-1, 2] - tail[0, 2]) / TWO_PI / (a - 1)
        best, best_d = None, math.inf
        for att in library.attractors:
            if att.kind != "periodic":
                continue
            if abs(rate - att.winding / att.period_n) > 0.05:
                continue
            d = hausdorff(tail[:, :2], att.witness, library.periodic_x)
            if d < best_d:
                best, best_d = att.id, d
        if best is not None and best_d < policy.region_radius:
            return library.region_for(best)
        return None
    return None


def classify_trajectory(start: State, params, schedule: DampingSchedule, library: AttractorLibrary,
                        policy: ClassificationPolicy | None = None) -> Classification:
    """Classify one trajectory, growing ``library`` if it finds a new attractor.

    ``params`` is a :class:`PendulumParams` or a ready :class:`VectorField`.
    Classification starts at the first forcing period at or after the end
    of the damping ramp.
    """
    policy = policy or ClassificationPolicy()
    fld = _field_for(params, schedule)
    snap = library.snapshot(policy.max_period)
    ids, codes, va, vb, vk, outs = _run_batch(fld, np.array([[start.x, start.y]]), start.tau, policy, snap)
    aid = _merge_one(library, ids, int(codes[0]), int(va[0]), int(vb[0]), outs[0], policy)
    tail = outs[0, : int(va[0])].copy() if codes[0] == CODE_UNRESOLVED else None
    return Classification(aid, int(codes[0]), int(vk[0]), tail)


def detect_period(series: PoincareSeries, max_period: int = 16, tol: float = 1e-6, confirm: int = 3):
    """Least period of the tail of a Poincare series.

    Returns ``(n, winding_per_period)`` or ``None``.  The last ``confirm``
    blocks of ``n`` points must each repeat the previous block within
    ``tol``, and the unwrapped drift over a block must be an integer number
    of turns within 0.01.
    """
    pts = series.states
    ux = series.unwrapped
    c = pts.shape[0]
    if c < 2:
        return None
    for n in range(1, max_period + 1):
        need = confirm * n
        if c < need + n:
            break
        a = pts[c - need:]
        b = pts[c - need - n: c - n]
        dx = a[:, 0] - b[:, 0]
        dx = dx - TWO_PI * np.floor((dx + math.pi) / TWO_PI)
        if np.max(np.maximum(np.abs(dx), np.abs(a[:, 1] - b[:, 1]))) >= tol:
            continue
        dw = (ux[-1] - ux[-1 - n]) / TWO_PI
        w = round(dw)
        if abs(dw - w) < 0.01:
            per = w / n
            return n, int(per) if per == int(per) else per
    return None


# ----------------------------------------------------------------------------
# basin estimation


def orbit_centre(fld: VectorField, point: np.ndarray, n_periods: int, per_period: int = 64) -> float:
    """Circular mean of the angle along one cycle started at a Poincare point."""
    from .integrate import integrate_samples

    t_first = _first_sample_time(0.0, fld.T0)
    times = t_first + TWO_PI * np.arange(1, n_periods * per_period + 1) / per_period
    xs = integrate_samples(point, t_first, times, fld)[:, 0]
    return float(math.atan2(np.mean(np.sin(xs)), np.mean(np.cos(xs))))


@dataclass
class BasinEntry:
    attractor_id: int
    label: str
    family: str
    kind: str
    period: int
    winding: int
    bucket: int | None
    count: int
    fraction: float
    ci: float


@dataclass
class BasinReport:
    """Basin fractions for one parameter set and schedule.

    ``fractions`` of all entries plus ``unresolved / total`` sum to one.
    ``ci`` is the 3-sigma binomial half-width ``3 sqrt(f (1 - f) / N)``.
    """

    entries: list[BasinEntry]
    unresolved: int
    total: int
    seed: int
    params: dict
    schedule: dict
    sampling: dict
    policy: dict
    attractors: list[dict]
    labels: np.ndarray | None = field(default=None, repr=False)
    wall_time: float = 0.0
    config: dict | None = None

    @property
    def unresolved_fraction(self) -> float:
        return self.unresolved / self.total

    def entry(self, label: str) -> BasinEntry | None:
        for e in self.entries:
            if e.label == label:
                return e
        return None

    def fraction(self, label: str) -> float:
        """Fraction of one attractor (0 when absent)."""
        e = self.entry(label)
        return e.fraction if e else 0.0

    def family_fraction(self, family: str) -> float:
        """Total fraction of all symmetric copies sharing a label family."""
        return sum(e.fraction for e in self.entries if e.family == family and e.kind != "aperiodic_region")

    def bucket_fraction(self, label: str) -> float:
        """Fraction of an attractor plus the aperiodic regions reported with it."""
        e = self.entry(label)
        if e is None:
            return 0.0
        return e.fraction + sum(x.fraction for x in self.entries if x.bucket == e.attractor_id)

    def select(self, kind: str | None = None, period: int | None = None, winding: int | None = None):
        return [e for e in self.entries
                if (kind is None or e.kind == kind) and (period is None or e.period == period)
                and (winding is None or e.winding == winding)]

    def rotations(self) -> list[BasinEntry]:
        return [e for e in self.entries if e.winding != 0]

    def closure(self) -> float:
        """Total of fractions and the unresolved share (one by construction)."""
        return math.fsum([e.fraction for e in self.entries] + [self.unresolved / self.total])

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "total": self.total,
            "unresolved": self.unresolved,
            "unresolved_fraction": self.unresolved_fraction,
            "seed": self.seed,
            "params": self.params,
            "schedule": self.schedule,
            "sampling": self.sampling,
            "policy": self.policy,
            "entries": [asdict(e) for e in self.entries],
            "attractors": self.attractors,
        }
        if self.config is not None:
            d["config"] = self.config
        if timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def grid_csv(self, points: np.ndarray) -> str:
        """One ``x,y,attractor_id`` row per sample (``-1`` for unresolved)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "attractor_id"])
        for (x, y), a in zip(points, self.labels):
            w.writerow([repr(float(x)), repr(float(y)), int(a)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"{e.label:>8s} {100 * e.fraction:7.2f}% +/- {100 * e.ci:.2f}" for e in self.entries]
        lines.append(f"{'unres':>8s} {100 * self.unresolved_fraction:7.2f}%")
        return "\n".join(lines)


def _ci(f: float, n: int) -> float:
    return 3.0 * math.sqrt(max(f * (1 - f), 0.0) / n)


def _stages(n: int, chunk: int) -> list[list[tuple[int, int]]]:
    """Fixed stage and chunk layout; independent of the worker count."""
    bounds = [0]
    for b in (256, 2048):
        if b < n:
            bounds.append(b)
    bounds.append(n)
    stages = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        stages.append([(s, min(s + chunk, hi)) for s in range(lo, hi, chunk)])
    return stages


_POOL_STATE: dict = {}


def _pool_init(fld, policy, snap):
    _POOL_STATE["args"] = (fld, policy, snap)


def _pool_task(pts):
    fld, policy, snap = _POOL_STATE["args"]
    return _run_batch(fld, pts, 0.0, policy, snap)


def default_workers() -> int:
    env = os.environ.get("BASINFORGE_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError as exc:
            raise DomainError(f"BASINFORGE_WORKERS must be an integer, got {env!r}") from exc
        if w < 1:
            raise DomainError("BASINFORGE_WORKERS must be positive")
        return w
    return 1


def estimate_basins(params: PendulumParams, schedule: DampingSchedule, sampling: SamplingSpec,
                    policy: ClassificationPolicy | None = None, workers: int | None = None,
                    library: AttractorLibrary | None = None, chunk: int = 256) -> BasinReport:
    """Classify every sample of ``sampling`` and tabulate basin fractions.

    Samples are processed in stages (the first 256, up to 2048, the rest).
    Each stage runs against the library as it stood when the stage began,
    chunks may run in separate processes, and results are merged in sample
    order.  The report is therefore a function of the inputs alone.
    """
    policy = policy or ClassificationPolicy()
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise DomainError("workers must be positive")
    t0 = time.perf_counter()
    fld = _field_for(params, schedule)
    if library is None:
        library = AttractorLibrary(policy.match_tol, fld.periodic_x, getattr(params, "orientation", "downward"),
                                   fld.equilibria, fld)
    pts = sampling.points()
    n = pts.shape[0]
    labels = np.full(n, -1, np.int64)
    for stage in _stages(n, chunk):
        snap = library.snapshot(policy.max_period)
        if workers == 1 or len(stage) == 1:
            results = [_run_batch(fld, pts[lo:hi], 0.0, policy, snap) for lo, hi in stage]
        else:
            with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                                     initargs=(fld, policy, snap)) as ex:
                results = list(ex.map(_pool_task, [pts[lo:hi] for lo, hi in stage]))
        for (lo, hi), (ids, codes, va, vb, vk, outs) in zip(stage, results):
            for i in range(hi - lo):
                aid = _merge_one(library, ids, int(codes[i]), int(va[i]), int(vb[i]), outs[i], policy)
                labels[lo + i] = -1 if aid is None else aid
    counts = np.bincount(labels[labels >= 0], minlength=len(library))
    unresolved = int(np.sum(labels < 0))
    entries = []
    for att in library:
        c = int(counts[att.id]) if att.id < counts.size else 0
        if c == 0:
            continue
        f = c / n
        entries.append(BasinEntry(att.id, att.label, att.family, att.kind, att.period_n, att.winding, att.bucket, c, f, _ci(f, n)))
    entries.sort(key=lambda e: (-e.count, e.attractor_id))
    for att in library:
        att.context = {"params": asdict(params) if hasattr(params, "alpha") else {}, "schedule": asdict(schedule)}
    return BasinReport(
        entries=entries,
        unresolved=unresolved,
        total=n,
        seed=int(sampling.seed),
        params=asdict(params) if hasattr(params, "alpha") else {"field": fld.name},
        schedule=asdict(schedule),
        sampling=sampling.to_dict(),
        policy=policy.to_dict(),
        attractors=library.to_list(),
        labels=labels,
        wall_time=time.perf_counter() - t0,
    )


# ----------------------------------------------------------------------------
# sweeps


def gamma_family(gammas: Iterable[float]) -> list[DampingSchedule]:
    """Constant schedules, one per damping value."""
    return [DampingSchedule.constant(g) for g in gammas]


def ramp_family(gamma0: float, gamma1: float, T0s: Iterable[float]) -> list[DampingSchedule]:
    """Ramps from ``gamma0`` to ``gamma1`` over each ``T0``."""
    return [DampingSchedule(gamma0, gamma1, t) for t in T0s]


SWEEP_COLUMNS = ["gamma0", "gamma1", "T0", "attractor_id", "kind", "label", "period", "winding",
                 "fraction", "ci", "unresolved"]


@dataclass
class SweepTable:
    schedules: list[DampingSchedule]
    reports: list[BasinReport]

    def rows(self) -> list[dict]:
        out = []
        for s, r in zip(self.schedules, self.reports):
            for e in r.entries:
                out.append({
                    "gamma0": s.gamma0, "gamma1": s.gamma1, "T0": s.T0, "attractor_id": e.attractor_id,
                    "kind": e.kind, "label": e.label, "period": e.period, "winding": e.winding,
                    "fraction": e.fraction, "ci": e.ci, "unresolved": r.unresolved_fraction,
                })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()


def sweep(params: PendulumParams, family: Sequence[DampingSchedule], sampling: SamplingSpec,
          policy: ClassificationPolicy | None = None, workers: int | None = None) -> SweepTable:
    """One basin report per schedule, each with its own library."""
    if len(family) == 0:
        raise DomainError("sweep family is empty")
    reports = [estimate_basins(params, s, sampling, policy, workers) for s in family]
    return SweepTable(list(family), reports)


def symmetry_audit(report: BasinReport) -> float:
    """Absolute difference between the basins of a +/- rotation pair.

    The pair with the largest combined basin is used.
    """
    pair = rotation_pair(report)
    return abs(pair[0].fraction - pair[1].fraction)


def rotation_pair(report: BasinReport) -> tuple[BasinEntry, BasinEntry]:
    """The mirror pair of rotating attractors with the largest combined basin."""
    best = None
    for a in report.entries:
        if a.winding <= 0 or a.kind != "periodic":
            continue
        for b in report.entries:
            if b.kind == "periodic" and b.period == a.period and b.winding == -a.winding:
                if best is None or a.fraction + b.fraction > best[0].fraction + best[1].fraction:
                    best = (a, b)
    if best is None:
        raise AbsentPairError("report has no pair of rotations with opposite winding")
    return best


def pair_difference_ci(report: BasinReport) -> float:
    """3-sigma half-width of the difference of the two pair fractions."""
    a, b = rotation_pair(report)
    f1, f2, n = a.fraction, b.fraction, report.total
    return 3.0 * math.sqrt(max(f1 + f2 - (f1 - f2) ** 2, 0.0) / n)


# ----------------------------------------------------------------------------
# continuation in the damping


@dataclass(frozen=True)
class ScanEvent:
    """Change of the continued attractor between two damping values.

    ``kind`` is ``period_change``, ``disappearance``, ``collapse_to_fixed_point``
    or ``unresolved``.  ``gamma`` is the midpoint of the refined bracket
    ``[gamma_before, gamma_after]``.
    """

    kind: str
    gamma_before: float
    gamma_after: float
    before: tuple[int, int]
    after: tuple[int, int] | None

    @property
    def gamma(self) -> float:
        return 0.5 * (self.gamma_before + self.gamma_after)


@dataclass
class ScanPoint:
    gamma: float
    period: int | None
    winding: int | None
    witness: np.ndarray | None


@dataclass
class ScanResult:
    events: list[ScanEvent]
    track: list[ScanPoint]

    def first(self, kind: str | None = None) -> ScanEvent | None:
        for e in self.events:
            if kind is None or e.kind == kind:
                return e
        return None


def _continue_once(params: PendulumParams, gamma: float, witness: np.ndarray, policy: ClassificationPolicy):
    fld = pendulum_field(params, DampingSchedule.constant(gamma))
    lib = AttractorLibrary(policy.match_tol, True, params.orientation)
    snap = lib.snapshot(policy.max_period)
    _, codes, va, vb, _, outs = _run_batch(fld, witness[:1], 0.0, policy, snap)
    code, a, b = int(codes[0]), int(va[0]), int(vb[0])
    if code == CODE_NEW:
        if a == 1 and b == 0:
            for x in fld.equilibria:
                if _dist(outs[0, 0, 0], outs[0, 0, 1], x, 0.0, True) < policy.fp_tol:
                    return "fixed", None
        return "cycle", (a, b, _canonical(outs[0, :a, :2]))
    if code == CODE_FIXED:
        return "fixed", None
    return "unresolved", None


def _compare(prev: tuple[int, int, np.ndarray], outcome, params, radius: float) -> str:
    kind, cyc = outcome
    n0, w0, pts0 = prev
    if kind == "fixed":
        eqs = np.array([[0.0, 0.0], [math.pi, 0.0]])
        d = min(hausdorff(pts0, eqs[i:i + 1]) for i in range(2))
        return "collapse_to_fixed_point" if d < radius else "disappearance"
    if kind == "unresolved":
        return "unresolved"
    n, w, pts = cyc
    if n == n0 and w == w0 and hausdorff(pts, pts0) < radius:
        return "same"
    if n != n0 and w * n0 == w0 * n and hausdorff(pts, pts0) < radius:
        return "period_change"
    return "disappearance"


def bifurcation_scan(params: PendulumParams, gammas: Sequence[float], tracked: Attractor,
                     policy: ClassificationPolicy | None = None, radius: float = 0.5,
                     refine_tol: float = 1e-5, stop_on_loss: bool = True) -> ScanResult:
    """Continue ``tracked`` along the damping values ``gammas``.

    At each value the trajectory is restarted from the current witness point
    with constant damping.  Changes are bracketed between consecutive values
    and refined by bisection down to ``refine_tol``.  Scanning stops at the
    first period change, disappearance or collapse when ``stop_on_loss``.

    Raises
    ------
    LostTrackError
        If continuation from the witness at ``gammas[0]`` does not return
        the tracked cycle.
    """
    policy = policy or ClassificationPolicy()
    gammas = [float(g) for g in gammas]
    if len(gammas) < 2:
        raise DomainError("a scan needs at least two damping values")
    if tracked.kind != "periodic":
        raise DomainError("only periodic attractors can be continued")
    prev = (tracked.period_n, tracked.winding, np.asarray(tracked.witness, float))
    track = [ScanPoint(gammas[0], prev[0], prev[1], prev[2])]
    events: list[ScanEvent] = []
    g_prev = gammas[0]
    out0 = _continue_once(params, g_prev, prev[2], policy)
    if _compare(prev, out0, params, radius) != "same":
        raise LostTrackError(f"the tracked attractor is not reproduced at gamma = {g_prev}")
    prev = out0[1]
    track[0] = ScanPoint(g_prev, prev[0], prev[1], prev[2])
    for g in gammas[1:]:
        outcome = _continue_once(params, g, prev[2], policy)
        verdict = _compare(prev, outcome, params, radius)
        if verdict == "same":
            prev = outcome[1]
            track.append(ScanPoint(g, prev[0], prev[1], prev[2]))
            g_prev = g
            continue
        if verdict == "unresolved":
            events.append(ScanEvent("unresolved", g_prev, g, prev[:2], None))
            track.append(ScanPoint(g, None, None, None))
            continue
        lo, hi, lo_state = g_prev, g, prev
        while abs(hi - lo) > refine_tol:
            mid = 0.5 * (lo + hi)
            om = _continue_once(params, mid, lo_state[2], policy)
            if _compare(lo_state, om, params, radius) == "same":
                lo, lo_state = mid, om[1]
            else:
                hi = mid
        after = outcome[1][:2] if outcome[0] == "cycle" else None
        events.append(ScanEvent(verdict, lo, hi, prev[:2], after))
        track.append(ScanPoint(g, *(outcome[1] if outcome[0] == "cycle" else (None, None, None))))
        if stop_on_loss:
            break
        if outcome[0] != "cycle":
            break
        prev = outcome[1]
        g_prev = g
    return ScanResult(events, track)


def existence_window(params: PendulumParams, gamma: float, tracked: Attractor, lo: float, hi: float,
                     step: float, policy: ClassificationPolicy | None = None,
                     refine_tol: float = 1e-5) -> tuple[float, float, ScanResult, ScanResult]:
    """Damping interval over which ``tracked`` persists, scanning down to ``lo`` and up to ``hi``.

    Each edge is the last damping value at which continuation still returns
    the same cycle.  A scan that never loses the attractor reports the range
    end.
    """
    if not lo <= gamma <= hi or step <= 0:
        raise DomainError("need lo <= gamma <= hi and a positive step")
    down = np.append(np.arange(gamma, lo, -step), lo)
    up = np.append(np.arange(gamma, hi, step), hi)
    edges = []
    scans = []
    for gs in (down, up):
        if len(gs) < 2 or gs[0] == gs[-1]:
            edges.append(float(gamma))
            scans.append(ScanResult([], []))
            continue
        res = bifurcation_scan(params, gs, tracked, policy, refine_tol=refine_tol)
        loss = next((e for e in res.events if e.kind != "unresolved"), None)
        if loss is None:
            edges.append(float(gs[-1]))
        else:
            edges.append(float(loss.gamma_before))
        scans.append(res)
    return edges[0], edges[1], scans[0], scans[1]
