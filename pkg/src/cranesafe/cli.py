"""Command line entry point: ``cranesafe run|compare|validate``.

Exit codes: 0 when the command's acceptance conditions hold, 1 when the run
finished but a condition failed, 2 for an invalid scenario or override, 3
when the simulation aborted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CraneSafeError, ScenarioError
from .harness import (compare_nominal_robust, compute_metrics, config_from_dict,
                      config_to_dict, export_run, load_config, run_scenario)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
SAFETY_TOL = 1e-6
_OVERRIDABLE = ("ocp", "barrier")


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    section, dot, name = key.partition(".")
    if not sep or not dot or section not in _OVERRIDABLE or not name:
        raise ScenarioError(f"override must look like ocp.<field>=<json> or "
                            f"barrier.<field>=<json>, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"override {key}: value is not JSON ({exc})") from exc
    return section, name, value


def apply_overrides(cfg, overrides, **top):
    """New config with ``section.field=value`` overrides and top-level fields applied."""
    data = config_to_dict(cfg)
    for text in overrides or ():
        section, name, value = _parse_override(text)
        data[section][name] = value
    for key, val in top.items():
        if val is not None:
            data[key] = val
    return config_from_dict(data)


def _common(p):
    p.add_argument("--config", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.FIELD=JSON",
                   help="override an ocp or barrier field, e.g. barrier.alpha_gain=0.3")
    p.add_argument("--sqp-iters", type=int, default=None, help="shortcut for ocp.sqp_iters")
    p.add_argument("--alpha-gain", type=float, default=None,
                   help="shortcut for barrier.alpha_gain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cranesafe",
                                     description="Robust safe MPC for a ship-mounted crane")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one mode and export logs and plots")
    _common(run)
    run.add_argument("--mode", choices=("nominal", "robust"), default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--duration", type=float, default=None, help="seconds")

    cmp_ = sub.add_parser("compare", help="run both modes with shared seeds")
    _common(cmp_)
    cmp_.add_argument("--out", type=Path, required=True)

    val = sub.add_parser("validate", help="check the scenario file only")
    val.add_argument("--config", required=True, type=Path)
    return parser


def _load(args):
    cfg = load_config(args.config)
    extra = list(args.overrides)
    if args.sqp_iters is not None:
        extra.append(f"ocp.sqp_iters={args.sqp_iters}")
    if args.alpha_gain is not None:
        extra.append(f"barrier.alpha_gain={args.alpha_gain!r}")
    top = {}
    if getattr(args, "mode", None) is not None:
        top["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        top["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        top["duration"] = args.duration
    return apply_overrides(cfg, extra, **top) if extra or top else cfg


def _cmd_run(args) -> int:
    cfg = _load(args)
    log = run_scenario(cfg)
    metrics = compute_metrics(log)
    export_run(log, args.out)
    lines = [f"mode: {cfg.mode}"] + [f"{k}: {v}" for k, v in metrics.as_dict().items()]
    ok = cfg.mode == "nominal" or metrics.min_h_t >= -SAFETY_TOL
    lines.append(f"verdict: {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    (args.out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_compare(args) -> int:
    cfg = _load(args)
    report = compare_nominal_robust(cfg)
    for log in report.logs.values():
        export_run(log, args.out)
    text = report.text()
    (args.out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if report.separated else EXIT_FAIL


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: valid")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "validate": _cmd_validate}
    try:
        return handler[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CraneSafeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "apply_overrides"]
