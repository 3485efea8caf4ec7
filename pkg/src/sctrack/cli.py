"""Command line: ``sctrack run | sweep | gen``.

Errors exit non-zero with a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import SWEEP_PARAMS, ConfigError, PipelineConfig, PipelineError, run, sweep
from .scene import SyntheticScenario, generate_synthetic, write_sequence
from .lifecycle import MODES


def _load_config(args) -> PipelineConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    cfg = PipelineConfig.from_dict(data)
    updates = {}
    if getattr(args, "mode", None):
        updates["mode"] = args.mode
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    if getattr(args, "ideal_detector", False):
        updates["ideal_detector"] = True
    if getattr(args, "ideal_tracker", False):
        updates["ideal_tracker"] = True
    if getattr(args, "plots", False):
        updates["plots"] = True
    if getattr(args, "workers", None):
        updates["workers"] = args.workers
    try:
        return cfg.with_updates(**updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_values(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
    return out


def cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run(cfg, args.input)
    rep = result.report
    summary = {"mode": rep.mode, "beta": rep.beta, "map": rep.map, "ap": rep.ap,
               "n_proposed": rep.n_proposed, "n_conventional": rep.n_conventional, "out": cfg.output_dir}
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = sweep(cfg, args.param, _parse_values(args.values), args.input)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def cmd_gen(args) -> int:
    scenario = SyntheticScenario.from_json(args.scenario)
    root = write_sequence(args.out, generate_synthetic(scenario))
    print(json.dumps({"out": str(root), "frames": scenario.duration_frames}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sctrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline JSON config")
        p.add_argument("--input", required=True, help="sequence directory or scenario JSON")
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--out", help="output directory")
        p.add_argument("--ideal-detector", action="store_true")
        p.add_argument("--ideal-tracker", action="store_true")
        p.add_argument("--workers", type=int)

    p_run = sub.add_parser("run", help="process one sequence and write report.json, events.jsonl, prc_*.csv")
    common(p_run)
    p_run.add_argument("--plots", action="store_true", help="also write prc_<class>.svg")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="rerun with one parameter varied; writes sweep.csv")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True, help="comma separated, e.g. 10,30,50,70")
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("gen", help="render a scenario JSON to a sequence directory")
    p_gen.add_argument("--scenario", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except PipelineError as exc:
        err = {"error": type(exc.cause).__name__, "message": str(exc), "frame": exc.frame_index}
        code = 3
    except ConfigError as exc:
        err = {"error": "ConfigError", "message": str(exc)}
        code = 2
    except (OSError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        code = 1
    print(json.dumps(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
