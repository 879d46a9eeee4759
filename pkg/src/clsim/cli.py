"""Command-line front end: theory, simulate, sweep, and verify.

Configuration precedence is defaults < config file < flags; the resolved
configuration is echoed into a manifest written next to every CSV, so any
output can be reproduced exactly from its manifest.  Exit codes: 0 ok,
2 invalid input, 3 boundary regime (theory), 4 runtime numerical failure,
5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, montecarlo, theory
from .errors import (BoundaryRegimeError, BoundaryStepError, CapacityError,
                     DimensionError, EmptySweepError, GeometryError,
                     InvalidConfigError, RangeError, RankDeficiencyError,
                     ReplicationError, UndefinedMetricError)
from .geometry import MODES, GeometrySpec
from .montecarlo import SWEEP_AXES, ExperimentSpec, SweepSpec, agreement_suite
from .plotting import render_sweep_plots
from .trainer import BUFFER_MODES, FIRST_TASK_POLICIES, SequenceConfig

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BOUNDARY = 3
EXIT_RUNTIME = 4
EXIT_VERIFY = 5

CSV_HEADER = ("axis_value", "metric", "task", "mean", "stderr", "theory",
              "regime", "reps", "seed")

DEFAULTS = {
    "s": 0,
    "sigma": 0.0,
    "mode": "identical",
    "theta": None,
    "buffer": "current-fresh",
    "first_task": "padded",
    "reps": 50,
    "seed": 0,
    "threads": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clsim",
        description="Sequential rehearsal estimators for continual linear "
                    "regression: simulation, closed-form theory, verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (JSON or key=value lines)")
    common.add_argument("--T", type=int, dest="T", help="number of tasks")
    common.add_argument("--n", type=int, help="samples per task")
    common.add_argument("--p", type=int, help="parameter dimension")
    common.add_argument("--s", type=int, help="total rehearsal samples")
    common.add_argument("--sigma", type=float, help="noise standard deviation")
    common.add_argument("--mode", choices=MODES, help="task geometry family")
    common.add_argument("--theta", type=float,
                        help="task angle in degrees (angle mode)")
    common.add_argument("--threads", type=int,
                        help="worker threads (fallback: CLSIM_THREADS)")

    run_flags = argparse.ArgumentParser(add_help=False)
    run_flags.add_argument("--buffer", choices=BUFFER_MODES, help="buffer mode")
    run_flags.add_argument("--first-task", dest="first_task",
                           choices=FIRST_TASK_POLICIES, help="first-task policy")
    run_flags.add_argument("--reps", type=int, help="Monte Carlo replications")
    run_flags.add_argument("--seed", type=int, help="master seed")
    run_flags.add_argument("--out", help="output CSV path")

    p_theory = sub.add_parser("theory", parents=[common],
                              help="print closed-form error breakdowns as JSON")
    p_theory.set_defaults(func=cmd_theory)

    p_sim = sub.add_parser("simulate", parents=[common, run_flags],
                           help="replicate one configuration, write CSV + manifest")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", parents=[common, run_flags],
                             help="sweep one axis, write CSV + manifest (+ SVG)")
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, help="swept variable")
    p_sweep.add_argument("--range", dest="range_spec",
                         help="start:stop:step (stop inclusive)")
    p_sweep.add_argument("--values", help="comma-separated axis values")
    p_sweep.add_argument("--plot", action="store_true",
                         help="also render one SVG per metric")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="run the theory-vs-simulation agreement suite")
    p_verify.add_argument("--suite", default="quick",
                          help="quick or full (default: quick)")
    p_verify.add_argument("--seed", type=int, help="suite seed")
    p_verify.set_defaults(func=cmd_verify)
    return parser


# --------------------------------------------------------------------------
# configuration resolution

def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            body = fh.read()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config file {path}: {exc}") from exc
    stripped = body.lstrip()
    if path.endswith(".json") or stripped.startswith("{"):
        try:
            data = json.loads(body)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError(f"config file {path} must hold an object")
    else:
        data = {}
        for lineno, line in enumerate(body.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfigError(
                    f"config file {path} line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            data[key.strip()] = _parse_scalar(value)
    # flatten a nested geometry object into the flag namespace
    geom = data.pop("geometry", None)
    if geom is not None:
        if not isinstance(geom, dict):
            raise InvalidConfigError("config geometry must be an object")
        data.setdefault("mode", geom.get("mode"))
        if geom.get("theta_degrees") is not None:
            data.setdefault("theta", geom["theta_degrees"])
        for key in ("sq_norms", "sq_dists"):
            if geom.get(key) is not None:
                data.setdefault(key, geom[key])
    return {k.replace("-", "_"): v for k, v in data.items()}


def _resolve(args: argparse.Namespace, names: tuple[str, ...]) -> dict:
    """defaults < config file < explicit flags."""
    resolved = {k: v for k, v in DEFAULTS.items() if k in names}
    if getattr(args, "config", None):
        file_conf = _load_config_file(args.config)
        for key, value in file_conf.items():
            if key in names:
                resolved[key] = value
    for key in names:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _require(resolved: dict, *names: str) -> None:
    missing = [k for k in names if resolved.get(k) is None]
    if missing:
        raise InvalidConfigError(f"missing required settings: {', '.join(missing)}")


def _geometry_spec(resolved: dict) -> GeometrySpec:
    mode = resolved.get("mode") or "identical"
    if mode == "explicit":
        if resolved.get("sq_norms") is None or resolved.get("sq_dists") is None:
            raise InvalidConfigError(
                "explicit geometry needs sq_norms and sq_dists (JSON config)")
        return GeometrySpec("explicit",
                            sq_norms=tuple(resolved["sq_norms"]),
                            sq_dists=tuple(tuple(r) for r in resolved["sq_dists"]))
    if mode == "angle" and resolved.get("theta") is None:
        raise InvalidConfigError("angle mode needs --theta")
    return GeometrySpec(mode, theta_degrees=resolved.get("theta"))


def _threads(resolved: dict) -> int:
    value = resolved.get("threads")
    if value is None:
        value = os.environ.get("CLSIM_THREADS", "1")
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise InvalidConfigError(f"threads must be an integer, got {value!r}")
    if value < 1:
        raise InvalidConfigError(f"threads must be >= 1, got {value}")
    return value


# --------------------------------------------------------------------------
# serialization

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row.axis_value), row.metric,
                             _fmt(row.task), _fmt(row.mean), _fmt(row.stderr),
                             _fmt(row.theory), row.regime, row.reps, row.seed])


def _manifest_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return stem + ".manifest.json"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_manifest(out: str, command: str, resolved: dict,
                    geom_spec: GeometrySpec, outputs: list[str],
                    extra: dict | None = None) -> str:
    manifest = {
        "tool": "clsim",
        "version": __version__,
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(),
        "master_seed": resolved.get("seed"),
        "config": {k: v for k, v in resolved.items()
                   if k not in ("sq_norms", "sq_dists")},
        "geometry": geom_spec.describe(),
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    path = _manifest_path(out)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# --------------------------------------------------------------------------
# commands

_COMMON_NAMES = ("T", "n", "p", "s", "sigma", "mode", "theta", "threads",
                 "sq_norms", "sq_dists")
_RUN_NAMES = _COMMON_NAMES + ("buffer", "first_task", "reps", "seed", "out")


def _breakdown_json(bd: theory.TheoryBreakdown) -> dict:
    out = {"total": bd.total, "terms": bd.terms, "lambda": bd.lam,
           "regime": bd.regime}
    if bd.u is not None:
        out["u"] = bd.u.tolist()
    return out


def cmd_theory(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _COMMON_NAMES)
    _require(resolved, "T", "n", "p", "s", "sigma")
    geom_spec = _geometry_spec(resolved)
    T, n, p, s = resolved["T"], resolved["n"], resolved["p"], resolved["s"]
    sigma = resolved["sigma"]
    geom = geom_spec.build(T)
    payload = {
        "T": T, "n": n, "p": p, "s": s, "sigma": sigma,
        "geometry": geom_spec.describe(),
        "regime": theory.classify_regime(p, n, s).label,
        "lambda": theory.contraction_factor(p, n, s),
        "adaptation": _breakdown_json(theory.theory_adaptation(T, n, p, s, sigma, geom)),
        "generalization": _breakdown_json(
            theory.theory_generalization(T, n, p, s, sigma, geom)),
    }
    try:
        payload["memory"] = _breakdown_json(
            theory.theory_memory(T, n, p, s, sigma, geom))
    except UndefinedMetricError:
        payload["memory"] = None
    json.dump(_jsonable(payload), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _build_experiment(resolved: dict) -> tuple[ExperimentSpec, GeometrySpec]:
    geom_spec = _geometry_spec(resolved)
    config = SequenceConfig(
        T=resolved["T"], n=resolved["n"], p=resolved["p"], s=resolved["s"],
        sigma=resolved["sigma"], geometry=geom_spec.build(resolved["T"]),
        buffer_mode=resolved["buffer"], first_task_policy=resolved["first_task"],
        seed=resolved["seed"])
    return ExperimentSpec(config, resolved["reps"], resolved["seed"]), geom_spec


def cmd_simulate(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _RUN_NAMES)
    _require(resolved, "T", "n", "p", "out")
    threads = _threads(resolved)
    spec, geom_spec = _build_experiment(resolved)
    rows = montecarlo.run_replications(spec, threads=threads)
    out = resolved["out"]
    _write_csv(out, rows)
    manifest = _write_manifest(out, "simulate", resolved, geom_spec, [out],
                               {"threads": threads})
    print(f"wrote {out} and {manifest}")
    return EXIT_OK


def _parse_range(range_spec: str, integral: bool) -> list:
    parts = range_spec.split(":")
    if len(parts) != 3:
        raise InvalidConfigError(
            f"--range must be start:stop:step, got {range_spec!r}")
    try:
        start, stop, step = (float(x) for x in parts)
    except ValueError as exc:
        raise InvalidConfigError(f"bad --range {range_spec!r}: {exc}") from exc
    if step <= 0:
        raise InvalidConfigError(f"--range step must be positive, got {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count < 1:
        raise InvalidConfigError(f"--range {range_spec!r} is empty")
    values = [start + i * step for i in range(count)]
    return [int(round(v)) for v in values] if integral else values


def _axis_values(resolved: dict, args: argparse.Namespace) -> list:
    axis = resolved["axis"]
    integral = axis in ("p", "s")
    if getattr(args, "values", None):
        raw = [v for v in args.values.split(",") if v.strip()]
        if not raw:
            raise InvalidConfigError("--values is empty")
        return [int(v) if integral else float(v) for v in raw]
    if getattr(args, "range_spec", None):
        return _parse_range(args.range_spec, integral)
    raise InvalidConfigError("sweep needs --range or --values")


def cmd_sweep(args: argparse.Namespace) -> int:
    resolved = _resolve(args, _RUN_NAMES + ("axis",))
    resolved["axis"] = getattr(args, "axis", None) or resolved.get("axis")
    _require(resolved, "T", "n", "p", "axis", "out")
    threads = _threads(resolved)
    values = _axis_values(resolved, args)
    base, geom_spec = _build_experiment(resolved)
    sweep = SweepSpec(base, resolved["axis"], tuple(values),
                      geometry_spec=geom_spec)
    rows = montecarlo.run_sweep(sweep, threads=threads)
    out = resolved["out"]
    _write_csv(out, rows)
    outputs = [out]
    if getattr(args, "plot", False):
        stem = os.path.splitext(out)[0]
        outputs.extend(render_sweep_plots(rows, resolved["axis"], stem))
    manifest = _write_manifest(out, "sweep", resolved, geom_spec, outputs,
                               {"threads": threads, "axis": resolved["axis"],
                                "values": values})
    print(f"wrote {', '.join(outputs)} and {manifest}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    resolved = _resolve(args, ("threads",))
    threads = _threads(resolved)
    if args.suite not in montecarlo.SUITES:
        raise InvalidConfigError(
            f"--suite must be one of {montecarlo.SUITES}, got {args.suite!r}")
    seed = args.seed if args.seed is not None else montecarlo.DEFAULT_SUITE_SEED
    report = agreement_suite(args.suite, threads=threads, seed=seed)
    for cell in report.cells:
        flag = " FAIL" if abs(cell.z) > 3.0 else ""
        print(f"{cell.label} {cell.metric} t={cell.task} "
              f"mean={cell.mean:.6g} stderr={cell.stderr:.3g} "
              f"theory={cell.theory:.6g} z={cell.z:+.2f}{flag}")
    n_fail = len(report.failures)
    print(f"cells={len(report.cells)} failures={n_fail} "
          f"allowed={report.allowed_failures}")
    if report.passed:
        print("verify: PASS")
        return EXIT_OK
    worst = report.worst
    print(f"verify: FAIL worst cell {worst.label} {worst.metric} "
          f"t={worst.task} z={worst.z:+.2f}", file=sys.stderr)
    return EXIT_VERIFY


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for bad flags
        return int(exc.code or 0)
    try:
        return args.func(args)
    except BoundaryRegimeError as exc:
        print(f"clsim: boundary regime: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except (InvalidConfigError, GeometryError, DimensionError, RangeError,
            EmptySweepError, BoundaryStepError, UndefinedMetricError) as exc:
        print(f"clsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RankDeficiencyError, CapacityError, ReplicationError) as exc:
        print(f"clsim: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())
