"""Command-line front end.

Every run is described by a :class:`RunConfig`.  The config is embedded in
the output, and feeding that output back through ``--config`` repeats the
run exactly; flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .basins import (
    Attractor,
    ClassificationPolicy,
    SamplingSpec,
    bifurcation_scan,
    default_workers,
    estimate_basins,
    existence_window,
    sweep,
)
from .errors import BasinforgeError, DomainError
from .integrate import IntegratorSpec, integrate_samples
from .model import TWO_PI, DampingSchedule, PendulumParams, pendulum_field
from .stability import floquet, global_attraction_bound
from .thresholds import table_csv, threshold_table

COMMANDS = ("thresholds", "stability", "basins", "sweep", "scan", "integrate")


@dataclass
class RunConfig:
    """Complete, serialisable description of one run."""

    command: str
    model: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    seed: int = 42
    workers: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if "config" in d and "command" not in d:
            d = d["config"]
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        if d.get("command") not in COMMANDS:
            raise DomainError(f"config command must be one of {COMMANDS}")
        return cls(**d)

    # builders -------------------------------------------------------------

    def params(self) -> PendulumParams:
        m = {"alpha": 0.5, "beta": 0.1, "orientation": "downward", "tau0": 0.0, **self.model}
        return PendulumParams(m["alpha"], m["beta"], m["orientation"], m["tau0"])

    def damping(self) -> DampingSchedule:
        s = self.schedule
        if "gamma0" not in s:
            raise DomainError("a damping value is required (--gamma or --gamma0/--gamma1/--t0)")
        return DampingSchedule(s["gamma0"], s.get("gamma1"), s.get("T0", 0.0))

    def integrator_spec(self) -> IntegratorSpec:
        return IntegratorSpec(**self.integrator) if self.integrator else IntegratorSpec()

    def classification_policy(self) -> ClassificationPolicy:
        return ClassificationPolicy(**{**self.policy, "integrator": self.integrator_spec()})

    def sampling_spec(self) -> SamplingSpec:
        s = {"mode": "random", "count": 20000, **self.sampling}
        grid = tuple(s["grid"]) if s.get("grid") else None
        window = tuple(s["window"]) if s.get("window") else SamplingSpec.window
        return SamplingSpec(s["mode"], int(s["count"]), grid, window, int(self.seed))


# ----------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    """Parse ``a,b,c`` or ``start:stop:step`` (stop included)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(v) for v in text.split(":")]
            if len(parts) != 3 or parts[2] == 0:
                raise ValueError
            a, b, st = parts
            n = int(math.floor((b - a) / st + 1e-9)) + 1
            if n < 1 or n > 100000:
                raise ValueError
            return [round(a + i * st, 12) for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list 'a,b,c' or a range 'start:stop:step', got {text!r}")


def _window(text: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI or LO:HI:STEP, got {text!r}")
    if len(parts) not in (2, 3) or not parts[0] < parts[1] or (len(parts) == 3 and not parts[2] > 0):
        raise argparse.ArgumentTypeError(f"expected LO:HI[:STEP] with LO < HI and STEP > 0, got {text!r}")
    return parts


def _mesh(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("mesh dimensions must be positive")
    return w, h


def _pair(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}")
    return x, y


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="ratio g / (l omega^2)")
    p.add_argument("--beta", type=float, help="forcing amplitude b / l")
    p.add_argument("--inverted", action="store_true", default=None, help="inverted pendulum coordinates")
    p.add_argument("--tau0", type=float, help="forcing phase")


def _schedule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, help="constant damping")
    p.add_argument("--gamma0", type=float, help="initial damping of the ramp")
    p.add_argument("--gamma1", type=float, help="final damping of the ramp")
    p.add_argument("--t0", type=float, help="ramp duration T0")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config (or an output that embeds one)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--tol", type=float, help="integrator relative tolerance (absolute = tol / 100)")


def _sampling_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="number of random samples")
    p.add_argument("--mesh", type=_mesh, help="mesh sampling WxH instead of random points")
    p.add_argument("--seed", type=int, help="64-bit sampling seed")
    p.add_argument("--workers", type=int, help="worker processes (default $BASINFORGE_WORKERS or 1)")
    p.add_argument("--budget", type=int, help="forcing periods sampled before a start is unresolved")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basinforge",
        description="Attractors, thresholds and basins of the damped pendulum with oscillating support.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("thresholds", help="first-order damping thresholds as CSV")
    p.add_argument("--alpha", type=float)
    p.add_argument("--qmax", type=int)
    _common_flags(p)

    p = sub.add_parser("stability", help="Floquet stability and the global-attraction bound")
    _model_flags(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--point", choices=("down", "up", "both"))
    _common_flags(p)

    p = sub.add_parser("basins", help="basin fractions as a JSON report")
    _model_flags(p)
    _schedule_flags(p)
    _sampling_flags(p)
    p.add_argument("--grid-out", help="write one x,y,attractor_id row per sample to this file")
    _common_flags(p)

    p = sub.add_parser("sweep", help="basin fractions over a damping family as CSV")
    _model_flags(p)
    p.add_argument("--gammas", type=_floats, help="constant damping values")
    p.add_argument("--gamma0", type=float)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--t0s", type=_floats, help="ramp durations for gamma0 -> gamma1")
    _sampling_flags(p)
    _common_flags(p)

    p = sub.add_parser("scan", help="continue an attractor in the damping")
    _model_flags(p)
    p.add_argument("--gammas", type=_floats, help="damping values, in scan order")
    p.add_argument("--track", help="label of the attractor to follow at the first damping value")
    p.add_argument("--witness", type=_pair, help="start point x,y instead of --track")
    p.add_argument("--window", type=_window, help="LO:HI:STEP, scan both ways from the first damping value")
    p.add_argument("--probe", type=int, help="samples used to find the tracked attractor (default 400)")
    p.add_argument("--seed", type=int)
    _common_flags(p)

    p = sub.add_parser("integrate", help="dump a single trajectory as CSV")
    _model_flags(p)
    _schedule_flags(p)
    p.add_argument("--x0", type=float)
    p.add_argument("--y0", type=float)
    p.add_argument("--tau-end", type=float)
    p.add_argument("--dt", type=float, help="output spacing (default 2 pi, the Poincare map)")
    p.add_argument("--method", choices=("rk_adaptive", "taylor"))
    _common_flags(p)
    return parser


def _load_config(path: str | None, command: str) -> RunConfig:
    if not path:
        return RunConfig(command)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path!r}: {exc}") from exc
    cfg = RunConfig.from_dict(data)
    if cfg.command != command:
        raise DomainError(f"config is for {cfg.command!r}, not {command!r}")
    return cfg


def _get(args, name):
    return getattr(args, name, None)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge ``--config`` with explicit flags and validate the result."""
    cfg = _load_config(args.config, args.command)
    m = dict(cfg.model)
    for key in ("alpha", "beta", "tau0"):
        if _get(args, key) is not None:
            m[key] = _get(args, key)
    if _get(args, "inverted"):
        m["orientation"] = "inverted"
    if args.command == "thresholds":
        m.setdefault("alpha", 0.5)
        m = {"alpha": m["alpha"]}
    cfg.model = m

    s = dict(cfg.schedule)
    if _get(args, "gamma") is not None:
        if any(_get(args, k) is not None for k in ("gamma0", "gamma1", "t0")) and args.command != "sweep":
            raise DomainError("--gamma cannot be combined with --gamma0/--gamma1/--t0")
        s = {"gamma0": args.gamma, "gamma1": args.gamma, "T0": 0.0}
    for flag, key in (("gamma0", "gamma0"), ("gamma1", "gamma1"), ("t0", "T0")):
        if _get(args, flag) is not None:
            s[key] = _get(args, flag)
    if s and "gamma0" in s:
        s.setdefault("gamma1", s["gamma0"])
        s.setdefault("T0", 0.0)
    cfg.schedule = s

    smp = dict(cfg.sampling)
    if _get(args, "n") is not None:
        smp.update(mode="random", count=args.n, grid=None)
    if _get(args, "mesh") is not None:
        smp.update(mode="mesh", grid=list(args.mesh), count=args.mesh[0] * args.mesh[1])
    cfg.sampling = smp
    if _get(args, "seed") is not None:
        cfg.seed = args.seed
    if _get(args, "workers") is not None:
        cfg.workers = args.workers
    if _get(args, "tol") is not None:
        cfg.integrator = {**cfg.integrator, "rel_tol": args.tol, "abs_tol": args.tol / 100.0}
    if _get(args, "method") is not None:
        cfg.integrator = {**cfg.integrator, "method": args.method}
    if _get(args, "budget") is not None:
        cfg.policy = {**cfg.policy, "budget_periods": args.budget}
    out = dict(cfg.outputs)
    for key in ("out", "grid_out"):
        if _get(args, key) is not None:
            out[key] = _get(args, key)
    cfg.outputs = out
    opts = dict(cfg.options)
    for key in ("qmax", "point", "gammas", "t0s", "track", "witness", "window", "probe", "x0", "y0",
                "tau_end", "dt"):
        v = _get(args, key)
        if v is not None:
            opts[key] = list(v) if isinstance(v, tuple) else v
    cfg.options = opts
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Range checks performed before any computation."""
    o = cfg.options
    if cfg.command == "thresholds":
        if not cfg.model["alpha"] > 0:
            raise DomainError("--alpha must be positive")
        if int(o.get("qmax", 12)) < 2:
            raise DomainError("--qmax must be at least 2")
        return
    cfg.params()
    if cfg.integrator:
        cfg.integrator_spec()
    if cfg.workers is not None and int(cfg.workers) < 1:
        raise DomainError("--workers must be positive")
    if cfg.command in ("basins", "integrate"):
        cfg.damping()
    if cfg.command == "stability":
        g = cfg.schedule.get("gamma0")
        if g is None:
            raise DomainError("stability needs --gamma")
        if g < 0:
            raise DomainError("--gamma must be non-negative")
    if cfg.command in ("basins", "sweep"):
        cfg.sampling_spec()
        cfg.classification_policy()
    if cfg.command == "sweep":
        if o.get("gammas") is None and o.get("t0s") is None:
            raise DomainError("sweep needs --gammas or --t0s with --gamma0/--gamma1")
        if o.get("t0s") is not None:
            if "gamma0" not in cfg.schedule or "gamma1" not in cfg.schedule:
                raise DomainError("--t0s needs --gamma0 and --gamma1")
            if min(o["t0s"]) < 0:
                raise DomainError("ramp durations must be non-negative")
        for g in o.get("gammas") or []:
            if g < 0:
                raise DomainError("damping values must be non-negative")
    if cfg.command == "scan":
        gs = o.get("gammas")
        if not gs:
            raise DomainError("scan needs --gammas")
        if o.get("window") is None and len(gs) < 2:
            raise DomainError("scan needs at least two damping values")
        if o.get("window") is not None and len(o["window"]) < 2:
            raise DomainError("--window needs LO:HI:STEP")
        if (o.get("track") is None) == (o.get("witness") is None):
            raise DomainError("scan needs exactly one of --track or --witness")
        if int(o.get("probe", 400)) < 1:
            raise DomainError("--probe must be positive")
        cfg.classification_policy()
    if cfg.command == "integrate":
        if o.get("dt") is not None and not o["dt"] > 0:
            raise DomainError("--dt must be positive")
        if o.get("tau_end") is not None and not o["tau_end"] > 0:
            raise DomainError("--tau-end must be positive")


# ----------------------------------------------------------------------------
# commands


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_thresholds(cfg: RunConfig) -> str:
    rows = threshold_table(cfg.model["alpha"], int(cfg.options.get("qmax", 12)))
    return table_csv(rows)


def run_stability(cfg: RunConfig) -> str:
    params = cfg.params()
    gamma = float(cfg.schedule["gamma0"])
    which = cfg.options.get("point", "down")
    points = ("down", "up") if which == "both" else (which,)
    lines = []
    bound = None
    if params.orientation == "downward":
        try:
            bound = global_attraction_bound(params.alpha, params.beta)
        except DomainError:
            bound = None
    for pt in points:
        r = floquet(params, gamma, pt)
        head = f"{pt}: {r.verdict}"
        if bound is not None:
            head += f"; bound γ̄₁ = {bound:.5f}"
        lines.append(head)
        mus = ", ".join(f"{m.real:.10g}{m.imag:+.10g}j" for m in r.multipliers)
        lines.append(f"  multipliers: {mus}  (|mu| = {', '.join(f'{abs(m):.6g}' for m in r.multipliers)})")
    if bound is None:
        reason = "beta >= alpha" if params.beta >= params.alpha else "inverted coordinates"
        lines.append(f"global-attraction bound not applicable ({reason})")
    return "\n".join(lines) + "\n"


def run_basins(cfg: RunConfig) -> str:
    params, sched, sampling = cfg.params(), cfg.damping(), cfg.sampling_spec()
    workers = cfg.workers if cfg.workers is not None else default_workers()
    report = estimate_basins(params, sched, sampling, cfg.classification_policy(), workers)
    report.config = cfg.to_dict()
    grid_out = cfg.outputs.get("grid_out")
    if grid_out:
        _emit(report.grid_csv(sampling.points()), grid_out)
    sys.stderr.write(report.summary() + f"\n(wall time {report.wall_time:.1f} s)\n")
    return report.to_json(timing=False) + "\n"


def run_sweep(cfg: RunConfig) -> str:
    from .basins import gamma_family, ramp_family

    o = cfg.options
    params, sampling = cfg.params(), cfg.sampling_spec()
    if o.get("t0s") is not None:
        family = ramp_family(cfg.schedule["gamma0"], cfg.schedule["gamma1"], o["t0s"])
    else:
        family = gamma_family(o["gammas"])
    workers = cfg.workers if cfg.workers is not None else default_workers()
    table = sweep(params, family, sampling, cfg.classification_policy(), workers)
    header = "# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n"
    return header + table.to_csv()


def _tracked(cfg: RunConfig, params: PendulumParams, gamma: float, policy: ClassificationPolicy) -> Attractor:
    o = cfg.options
    if o.get("witness") is not None:
        from .basins import AttractorLibrary, classify_trajectory
        from .model import State

        lib = AttractorLibrary(policy.match_tol, True, params.orientation)
        x, y = o["witness"]
        cls_ = classify_trajectory(State(x, y), params, DampingSchedule.constant(gamma), lib, policy)
        if cls_.attractor_id is None:
            raise DomainError(f"the witness start did not settle on an attractor at gamma = {gamma}")
        return lib[cls_.attractor_id]
    probe = SamplingSpec("random", int(o.get("probe", 400)), None, seed=int(cfg.seed))
    report = estimate_basins(params, DampingSchedule.constant(gamma), probe, policy, cfg.workers or 1)
    for a in report.attractors:
        if a["label"] == o["track"]:
            return Attractor.from_dict(a)
    found = ", ".join(a["label"] for a in report.attractors)
    raise DomainError(f"no attractor labelled {o['track']!r} at gamma = {gamma} (found: {found})")


def _event_dict(e) -> dict:
    return {"kind": e.kind, "gamma": e.gamma, "gamma_before": e.gamma_before, "gamma_after": e.gamma_after,
            "before": list(e.before), "after": None if e.after is None else list(e.after)}


def run_scan(cfg: RunConfig) -> str:
    o = cfg.options
    params = cfg.params()
    policy = cfg.classification_policy()
    gammas = [float(g) for g in o["gammas"]]
    tracked = _tracked(cfg, params, gammas[0], policy)
    out: dict[str, Any] = {"config": cfg.to_dict(), "tracked": tracked.to_dict()}
    if o.get("window") is not None:
        lo, hi, step = (list(o["window"]) + [None])[:3]
        step = step if step is not None else abs(hi - lo) / 20
        if not (lo <= gammas[0] <= hi):
            raise DomainError("the first damping value must lie inside --window")
        glo, ghi, down, up = existence_window(params, gammas[0], tracked, lo, hi, abs(step), policy)
        out["window"] = [glo, ghi]
        out["events"] = [_event_dict(e) for e in down.events + up.events]
    else:
        res = bifurcation_scan(params, gammas, tracked, policy)
        out["events"] = [_event_dict(e) for e in res.events]
        out["track"] = [
            {"gamma": p.gamma, "period": p.period, "winding": p.winding,
             "witness": None if p.witness is None else np.asarray(p.witness).tolist()}
            for p in res.track
        ]
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def run_integrate(cfg: RunConfig) -> str:
    o = cfg.options
    params, sched = cfg.params(), cfg.damping()
    spec = cfg.integrator_spec()
    x0, y0 = float(o.get("x0", 0.0)), float(o.get("y0", 0.0))
    tau_end = float(o.get("tau_end", 100.0))
    dt = float(o.get("dt", TWO_PI))
    times = dt * np.arange(1, int(math.floor(tau_end / dt + 1e-9)) + 1)
    out = integrate_samples([x0, y0], 0.0, times, pendulum_field(params, sched), spec)
    lines = ["# config: " + json.dumps(cfg.to_dict(), sort_keys=True), "tau,x,y", f"{0.0!r},{x0!r},{y0!r}"]
    lines += [f"{t!r},{x!r},{y!r}" for t, (x, y) in zip(times.tolist(), out.tolist())]
    return "\n".join(lines) + "\n"


RUNNERS = {
    "thresholds": run_thresholds,
    "stability": run_stability,
    "basins": run_basins,
    "sweep": run_sweep,
    "scan": run_scan,
    "integrate": run_integrate,
}


def parse_and_dispatch(argv: Sequence[str] | None = None) -> int:
    """Run the command line ``argv``; returns the exit code (0, 1 domain error, 2 usage)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("basinforge: error: a command is required\n")
        return 2
    try:
        cfg = config_from_args(args)
        text = RUNNERS[cfg.command](cfg)
        _emit(text, cfg.outputs.get("out"))
    except BasinforgeError as exc:
        sys.stderr.write(f"basinforge {args.command}: error: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
