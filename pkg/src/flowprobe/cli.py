"""Command-line harness.

Verbs: ``run`` (solver-by-field matrix), ``sweep-epsilon``, ``sweep-horizon``,
``train`` (fit the toy learned field), ``validate-config``. Exit codes:
0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ExperimentConfig,
    TOOL_VERSION,
    emit_reports,
    run_matrix,
    sweep_bundle,
    sweep_epsilon,
    sweep_horizon,
)
from .errors import ConfigError, NumericalBlowup, StiffnessError, TrainingDiverged
from .mlp import TrainingConfig, save_weights_file, train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="path to a YAML experiment config")
    sub.add_argument("--out", default=None, help="output directory (default: out)")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument(
        "--format",
        default="csv,json",
        help="comma-separated report formats (csv,json)",
    )
    sub.add_argument(
        "--serial-timing",
        action="store_true",
        help="measure wall times without co-scheduled work (execution is "
        "serial either way; accepted for interface stability)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowprobe",
        description="Benchmark harness for curvature-adaptive flow integration",
    )
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("run", "sweep-epsilon", "sweep-horizon", "train", "validate-config"):
        p = sub.add_parser(verb)
        _add_common(p)
        if verb == "sweep-epsilon":
            p.add_argument(
                "--epsilons", default=None, help="comma-separated epsilon values"
            )
        if verb == "sweep-horizon":
            p.add_argument(
                "--dts", default=None, help="comma-separated probe horizon values"
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.from_yaml(args.config)
        if args.seed is not None:
            config.seed = args.seed
        formats = [f for f in args.format.split(",") if f]
        out_dir = args.out or config.output_dir or "out"
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate-config":
            print(f"config ok: {len(config.corpus)} field(s), "
                  f"{len(config.solvers)} solver(s)")
            return EXIT_OK
        if args.command == "run":
            bundle = run_matrix(config)
            for path in emit_reports(bundle, formats, out_dir):
                print(f"wrote {path}")
            if bundle.any_cell_all_failed():
                print("error: at least one cell failed entirely", file=sys.stderr)
                return EXIT_RUNTIME
            return EXIT_OK
        if args.command == "sweep-epsilon":
            values = _parse_values(args.epsilons) or config.epsilon_values
            rows = sweep_epsilon(config, values)
            bundle = sweep_bundle(config, epsilon_sweep=rows)
            for path in emit_reports(bundle, formats, out_dir):
                print(f"wrote {path}")
            return EXIT_OK
        if args.command == "sweep-horizon":
            values = _parse_values(args.dts) or config.dt_values
            rows = sweep_horizon(config, values)
            bundle = sweep_bundle(config, horizon_sweep=rows)
            for path in emit_reports(bundle, formats, out_dir):
                print(f"wrote {path}")
            return EXIT_OK
        # train
        if config.train is None:
            print("config error: missing 'train' section", file=sys.stderr)
            return EXIT_CONFIG
        try:
            tc = TrainingConfig(**config.train)
        except (TypeError, ValueError) as exc:
            print(f"config error: train section: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        field, trace = train(tc)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        weights_path = out / f"weights-{tc.dataset}.mlpw"
        save_weights_file(field, weights_path)
        trace_path = out / "training_trace.json"
        trace_path.write_text(
            json.dumps({"interval_losses": trace.interval_losses}, indent=2) + "\n"
        )
        print(f"wrote {weights_path}")
        print(f"wrote {trace_path}")
        print(
            f"loss: first interval {trace.first:.4f} -> last interval {trace.last:.4f}"
        )
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowup, StiffnessError, TrainingDiverged, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _parse_values(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(v) for v in text.split(",") if v]


if __name__ == "__main__":
    raise SystemExit(main())
