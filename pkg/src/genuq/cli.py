"""Command-line entry point.

Subcommands mirror the pipeline stages: ``synth`` builds a seeded dataset,
``score`` writes per-record uncertainty values, ``calibrate`` fits
normalizers on a calibration split, ``evaluate`` assembles the metrics
report, and ``report`` re-renders a report as a text table.  Options come
from an optional key=value config file plus flag overrides; the sidecar
endpoint can also be set through the GENUQ_NLI_ENDPOINT environment
variable.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import GenuqError
from .pipeline import (
    RunConfig,
    render_table,
    run_calibrate,
    run_evaluate,
    run_score,
    run_synth,
)
from .registry import method_ids


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a single config option (repeatable)")
    parser.add_argument("--dataset", help="records JSONL to score/evaluate")
    parser.add_argument("--train", help="calibration/density-fitting split")
    parser.add_argument("--background", help="background records for rmd")
    parser.add_argument("--methods", help="comma-separated method ids (default: all)")
    parser.add_argument("--quality-metric", dest="quality_metric")
    parser.add_argument("--normalizers", help="comma-separated normalizer kinds or 'all'")
    parser.add_argument("--nli", help="'stub' or sidecar endpoint URL")
    parser.add_argument("--similarity", help="similarity kind for relevance weights")
    parser.add_argument("--similarity-file", dest="similarity_file",
                        help="precomputed similarity matrices JSONL")
    parser.add_argument("--max-rejection", dest="max_rejection", type=float)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)


def _build_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in (
        "dataset",
        "train",
        "background",
        "quality_metric",
        "nli",
        "similarity",
        "similarity_file",
        "output_dir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "methods", None):
        config.set_option("methods", args.methods)
    if getattr(args, "normalizers", None):
        config.set_option("normalizers", args.normalizers)
    if getattr(args, "max_rejection", None) is not None:
        config.max_rejection = args.max_rejection
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    for override in getattr(args, "set", []):
        key, _, value = override.partition("=")
        config.set_option(key.strip(), value.strip())
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genuq")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    _add_common(p_synth)
    p_synth.add_argument("--n", type=int, default=100, help="number of records")
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--correlation", type=float, default=1.0)
    p_synth.add_argument("--samples", type=int, default=5)
    p_synth.add_argument("--vocab", type=int, default=8)
    p_synth.add_argument("--out", required=True)

    p_score = sub.add_parser("score", help="score methods over a dataset")
    _add_common(p_score)
    p_score.add_argument("--out", help="score file path (default <output-dir>/scores.jsonl)")

    p_cal = sub.add_parser("calibrate", help="fit confidence normalizers")
    _add_common(p_cal)
    p_cal.add_argument("--scores", required=True, help="train-split score file")
    p_cal.add_argument("--models-dir", dest="models_dir")

    p_eval = sub.add_parser("evaluate", help="compute the metrics report")
    _add_common(p_eval)
    p_eval.add_argument("--scores", required=True, help="test-split score file")
    p_eval.add_argument("--models-dir", dest="models_dir")
    p_eval.add_argument("--out", help="report path (default <output-dir>/report.json)")

    p_report = sub.add_parser("report", help="render a report as a text table")
    p_report.add_argument("report_path")

    sub.add_parser("methods", help="list every registered method id")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "methods":
            for mid in method_ids():
                print(mid)
            return 0
        if args.command == "report":
            with open(args.report_path, "r", encoding="utf-8") as handle:
                print(render_table(json.load(handle)))
            return 0

        config = _build_config(args)
        if args.command == "synth":
            path = run_synth(
                config,
                n_records=args.n,
                path=args.out,
                noise=args.noise,
                correlation=args.correlation,
                n_samples=args.samples,
                vocab_size=args.vocab,
            )
            print(path)
            return 0
        if args.command == "score":
            print(run_score(config, score_path=args.out))
            return 0
        if args.command == "calibrate":
            print(run_calibrate(config, args.scores, models_dir=args.models_dir))
            return 0
        if args.command == "evaluate":
            path = run_evaluate(
                config, args.scores, models_dir=args.models_dir, report_path=args.out
            )
            with open(path, "r", encoding="utf-8") as handle:
                print(render_table(json.load(handle)))
            print(path)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except (GenuqError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
