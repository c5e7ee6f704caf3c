"""Acceptance criteria, each run at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per
criterion as it completes; the lines are also repeated in the summary.
"""

import contextlib
import io
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from basinforge.basins import (
    Attractor,
    SamplingSpec,
    bifurcation_scan,
    estimate_basins,
    existence_window,
    pair_difference_ci,
    symmetry_audit,
)
from basinforge.cli import parse_and_dispatch
from basinforge.model import DampingSchedule, PendulumParams
from basinforge.stability import global_attraction_bound

DOWN = PendulumParams(0.5, 0.1)
INV = PendulumParams(0.1, 0.545, "inverted")
SEED = 42

# published (q, k, G1, Delta, C1) at alpha = 0.5
LIBRATION = [
    (2, 0.885201568846, 0.172135, 0.407121, 0.597944),
    (4, 0.998888384493, 0.077675, 0.224342, 0.489649),
    (6, 0.999986981343, 0.051734, 0.150043, 0.487616),
    (8, 0.999999846887, 0.038800, 0.112539, 0.487578),
    (10, 0.999999998199, 0.031040, 0.090032, 0.487577),
    (12, 0.999999999979, 0.025867, 0.075026, 0.487577),
]
ROTATION = [
    (2, 0.924397052341, 0.156774, 0.474414, 0.432005),
    (4, 0.998899257272, 0.077612, 0.225808, 0.485542),
    (6, 0.999986983601, 0.051734, 0.150063, 0.487439),
    (8, 0.999999846887, 0.038800, 0.112540, 0.487577),
    (10, 0.999999998199, 0.031040, 0.090032, 0.487577),
    (12, 0.999999999978, 0.025867, 0.075026, 0.487577),
]
# the printed rotation q = 6 C1 disagrees with its own row: k G1 / (sqrt(alpha) Delta) = 0.487542
MISPRINT = ("rotation", 6, "C1")

_cache: dict = {}


def basins(params, schedule, n, seed=SEED):
    key = (params, schedule, n, seed)
    if key not in _cache:
        t = time.perf_counter()
        rep = estimate_basins(params, schedule, SamplingSpec(count=n, seed=seed))
        _cache[key] = (rep, time.perf_counter() - t)
    return _cache[key]


def pct(f):
    return 100.0 * f


def within(value, target, tol):
    return abs(value - target) <= tol


def check_closure(rep):
    assert sum(e.count for e in rep.entries) + rep.unresolved == rep.total
    assert rep.unresolved_fraction < 0.005


# ----------------------------------------------------------------------------
# 1. threshold tables


@pytest.fixture(scope="module")
def threshold_rows():
    buf = io.StringIO()
    t = time.perf_counter()
    with contextlib.redirect_stdout(buf):
        code = parse_and_dispatch(["thresholds", "--alpha", "0.5", "--qmax", "12"])
    elapsed = time.perf_counter() - t
    assert code == 0
    rows = {}
    for line in buf.getvalue().strip().splitlines()[1:]:
        regime, q, k, G, D, C = line.split(",")
        rows[(regime, int(q))] = (float(k), float(G), float(D), float(C))
    return rows, elapsed


def table_mismatches(rows):
    bad = []
    for regime, table in (("libration", LIBRATION), ("rotation", ROTATION)):
        for q, k, G, D, C in table:
            got = rows[(regime, q)]
            for name, ref, val, tol in (("k", k, got[0], 1e-9), ("G1", G, got[1], 1e-4),
                                        ("Delta", D, got[2], 1e-4), ("C1", C, got[3], 1e-4)):
                if not within(val, ref, tol):
                    bad.append((regime, q, name, val, ref))
    return bad


@pytest.mark.xfail(strict=True, reason="the published rotation q=6 C1 is inconsistent with its own k, G1 and Delta")
def test_criterion_1_threshold_tables(threshold_rows, record):
    rows, elapsed = threshold_rows
    bad = table_mismatches(rows)
    detail = ", ".join(f"{r} q={q} {n}: {v:.6f} vs {ref:.6f} (diff {abs(v - ref):.2e})" for r, q, n, v, ref in bad)
    ok = not bad and elapsed < 10
    record(1, ok, f"{48 - len(bad)}/48 entries within tolerance in {elapsed:.2f} s"
           + (f"; off: {detail}" if bad else ""))
    assert ok


def test_threshold_tables_except_misprint(threshold_rows):
    rows, elapsed = threshold_rows
    bad = table_mismatches(rows)
    assert [(r, q, n) for r, q, n, _, _ in bad] == [MISPRINT]
    assert elapsed < 10


def test_threshold_misprint_is_internal(threshold_rows):
    # the published k, G1 and Delta of the row give a C1 that our value matches
    q, k, G, D, C = ROTATION[2]
    implied = k * G / (math.sqrt(0.5) * D)
    ours = threshold_rows[0][("rotation", 6)][3]
    assert abs(implied - ours) < 1e-5
    assert abs(C - ours) > 1e-4


# ----------------------------------------------------------------------------
# 2. global-attraction bound


def test_criterion_2_global_attraction_bound(record):
    t = time.perf_counter()
    b = global_attraction_bound(0.5, 0.1)
    elapsed = time.perf_counter() - t
    ok = within(b, 0.1021, 5e-4) and elapsed < 1
    record(2, ok, f"bound = {b:.8f} (target 0.1021 +/- 5e-4) in {elapsed * 1e3:.2f} ms")
    assert ok


# ----------------------------------------------------------------------------
# 3. downward constant damping


def test_criterion_3_downward_basins(record):
    n = 20000
    r03, t03 = basins(DOWN, DampingSchedule.constant(0.03), n)
    r05, t05 = basins(DOWN, DampingSchedule.constant(0.05), n)
    r06, t06 = basins(DOWN, DampingSchedule.constant(0.06), n)
    for r in (r03, r05, r06):
        check_closure(r)
    fp, osc, pr, nr = (pct(r03.fraction(x)) for x in ("FP", "OSC", "PR", "NR"))
    checks = [
        within(fp, 69.94, 1.5), within(osc, 21.23, 1.5), within(pr, 4.42, 1.5), within(nr, 4.42, 1.5),
        sum(e.count for e in r05.rotations()) == 0, within(pct(r05.fraction("FP")), 85.61, 1.5),
        r06.fraction("FP") == 1.0 and r06.unresolved == 0,
    ]
    total = t03 + t05 + t06
    ok = all(checks)
    record(3, ok, f"g=0.03 FP {fp:.2f} OSC {osc:.2f} PR {pr:.2f} NR {nr:.2f}; "
           f"g=0.05 rotations {sum(e.count for e in r05.rotations())} FP {pct(r05.fraction('FP')):.2f}; "
           f"g=0.06 FP {pct(r06.fraction('FP')):.2f} unresolved {r06.unresolved}; {total:.0f} s on 1 worker")
    assert ok
    assert symmetry_audit(r03) <= pair_difference_ci(r03)


# ----------------------------------------------------------------------------
# 4. inverted constant damping


def do2_bucket(rep):
    return sum(rep.bucket_fraction(e.label) for e in rep.entries if e.family == "DO2" and e.kind == "periodic")


def test_criterion_4_inverted_basins(record):
    n = 20000
    r20, t20 = basins(INV, DampingSchedule.constant(0.2), n)
    r27, t27 = basins(INV, DampingSchedule.constant(0.2725), n)
    for r in (r20, r27):
        check_closure(r)
    fp, pr, nr = (pct(r20.fraction(x)) for x in ("FP", "PR", "NR"))
    fp27, do2, do4 = pct(r27.fraction("FP")), pct(do2_bucket(r27)), pct(r27.family_fraction("DO4"))
    ok = all([
        within(fp, 64.31, 1.5), within(pr, 17.84, 1.2), within(nr, 17.84, 1.2),
        within(fp27, 17.21, 1.5), within(do2, 79.44, 1.5), 0 < do4 <= 6,
    ])
    record(4, ok, f"g=0.2 FP {fp:.2f} PR {pr:.2f} NR {nr:.2f}; g=0.2725 FP {fp27:.2f} DO2 {do2:.2f} "
           f"DO4 {do4:.2f}; {t20 + t27:.0f} s on 1 worker")
    assert ok


# ----------------------------------------------------------------------------
# 5. damping ramps


def test_criterion_5_ramps(record):
    n = 10000
    t = time.perf_counter()
    const = basins(DOWN, DampingSchedule.constant(0.02), n)[0]
    fps = {}
    for T0 in (0, 100, 1000):
        rep = basins(DOWN, DampingSchedule(0.02, 0.03, T0), n)[0]
        check_closure(rep)
        fps[T0] = pct(rep.fraction("FP"))
    inv = basins(INV, DampingSchedule(0.2725, 0.2, 1000), n)[0]
    check_closure(inv)
    elapsed = time.perf_counter() - t
    fc = pct(const.fraction("FP"))
    d0, d1000 = abs(fps[0] - fc), abs(fps[1000] - fc)
    # 3-sigma width of d0 - d1000 from the three independent estimates
    sig = math.sqrt(sum(f * (100 - f) / n for f in (fps[0], fps[1000])))
    ok = all([
        within(fps[0], 69.94, 1.5), within(fps[100], 68.84, 1.5), within(fps[1000], 70.65, 1.5),
        d1000 < d0, pct(inv.fraction("FP")) >= 97.0,
    ])
    record(5, ok, f"FP(T0=0,100,1000) = {fps[0]:.2f}, {fps[100]:.2f}, {fps[1000]:.2f}; "
           f"|FP1000-FPc| {d1000:.2f} < |FP0-FPc| {d0:.2f} (FPc {fc:.2f}, 3-sigma {3 * sig:.2f}); "
           f"inverted ramp FP {pct(inv.fraction('FP')):.2f}; {elapsed:.0f} s")
    assert ok


# ----------------------------------------------------------------------------
# 6. continuation in the damping


def tracked(params, gamma, n, pick):
    rep = estimate_basins(params, DampingSchedule.constant(gamma), SamplingSpec(count=n, seed=1))
    return Attractor.from_dict(next(a for a in rep.attractors if pick(a)))


def test_criterion_6_bifurcation_scan(record):
    t = time.perf_counter()
    pr2 = tracked(INV, 0.09, 1000, lambda a: a["kind"] == "periodic" and a["period"] == 2 and a["winding"] == 2)
    ev = bifurcation_scan(INV, np.arange(0.09, 0.1001, 0.002), pr2).first("period_change")
    pr1 = tracked(INV, 0.26, 400, lambda a: a["label"] == "PR")
    loss = bifurcation_scan(INV, np.arange(0.26, 0.2801, 0.002), pr1).first("disappearance")
    do4 = tracked(INV, 0.2725, 2000, lambda a: a["family"] == "DO4")
    lo, hi, _, _ = existence_window(INV, 0.2725, do4, 0.268, 0.278, 0.0005)
    elapsed = time.perf_counter() - t
    ok = all([
        ev is not None and 0.09 <= ev.gamma <= 0.10 and ev.after == (1, 1),
        loss is not None and within(loss.gamma, 0.2694, 0.002),
        0.270 <= lo <= 0.272 and 0.2742 <= hi <= 0.276,
        elapsed < 600,
    ])
    record(6, ok, f"PR2->PR1 at {ev.gamma if ev else float('nan'):.5f}; PR1 lost at "
           f"{loss.gamma if loss else float('nan'):.5f}; DO4 window [{lo:.5f}, {hi:.5f}]; {elapsed:.0f} s")
    assert ok


# ----------------------------------------------------------------------------
# 7. property suites


PROPERTY_SUITES = [
    "tests/test_elliptic.py",
    "tests/test_actionangle.py",
    "tests/test_integrate.py",
    "tests/test_basins.py",
]


def test_criterion_7_property_suites(record, request):
    root = request.config.rootpath
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES],
                         cwd=root, capture_output=True, text=True)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    ok = res.returncode == 0
    record(7, ok, f"elliptic, action-angle, integrator and basin suites: {tail}")
    assert ok, res.stdout[-3000:]


# ----------------------------------------------------------------------------
# 8. declared out of scope


def test_criterion_8_declared_out_of_scope(record):
    # at desk scale the 3-sigma half-width of a 70% basin is well above 0.2 pp
    hw = 300 * math.sqrt(0.7 * 0.3 / 20000)
    ok = hw > 0.2
    record(8, ok, f"not reproduced by design: +/-0.2 pp precision (desk-scale 3-sigma {hw:.2f} pp at N=20000), "
           "cubic-oscillator rows at gamma=5e-4, anomalous T0 jumps of the inverted ramps")
    assert ok


# ----------------------------------------------------------------------------
# supporting invariants


def test_ramp_trend_at_T0_2000():
    n = 10000
    fc = basins(DOWN, DampingSchedule.constant(0.02), n)[0].fraction("FP")
    f0 = basins(DOWN, DampingSchedule(0.02, 0.03, 0), n)[0].fraction("FP")
    f2000 = basins(DOWN, DampingSchedule(0.02, 0.03, 2000), n)[0].fraction("FP")
    assert abs(f2000 - fc) < abs(f0 - fc)


def test_mesh_symmetry():
    s = SamplingSpec(mode="mesh", grid=(200, 100))
    rep = estimate_basins(DOWN, DampingSchedule.constant(0.03), s)
    check_closure(rep)
    assert pct(symmetry_audit(rep)) < 0.5
