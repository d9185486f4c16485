"""Command-line entry point: ``pdqubo <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .errors import ConfigError, DataError, QMatrixError, SolverError
from .qubo import load_q, validate

logger = logging.getLogger("pdqubo")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4


def _parse_k(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part == "*":
            out.append("*")
            continue
        try:
            out.append(int(part))
        except ValueError:
            raise ConfigError(f"--k expects integers or '*', got {part!r}") from None
    return out


def _parse_list(text: str, kind=str) -> list:
    try:
        return [kind(p.strip()) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key-value config file ([experiment] section)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--solver", help="solver name or comma-separated list")
    common.add_argument("--builder", help="coefficient builder name or comma-separated list")
    common.add_argument("--k", help="comma-separated cardinalities, '*' lets the solver choose")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pdqubo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("pipeline", parents=[common], help="select features and report test metrics")
    evp = sub.add_parser("energy-vs-perf", parents=[common], help="energy vs metric scatter")
    evp.add_argument("--num-solutions", type=int)
    sub.add_parser("stability", parents=[common], help="energy stability over scales")
    diff = sub.add_parser("difficulty", parents=[common], help="improvement under feature dropout")
    diff.add_argument("--drop-fractions", help="comma-separated fractions in [0, 1)")
    tim = sub.add_parser("timing", parents=[common], help="solver wall time per scale")
    tim.add_argument("--scales", help="comma-separated problem sizes")
    sub.add_parser("synth", parents=[common], help="write a planted synthetic corpus")
    vq = sub.add_parser("validate-q", parents=[common], help="check a saved coefficient matrix")
    vq.add_argument("path")
    return parser


def resolve_config(args) -> ex.ExperimentConfig:
    config = ex.ExperimentConfig.read(args.config) if args.config else ex.ExperimentConfig()
    changes = {}
    if args.out:
        changes["out"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.solver:
        changes["solvers"] = _parse_list(args.solver)
    if args.builder:
        changes["builders"] = _parse_list(args.builder)
    if args.k:
        changes["k_list"] = _parse_k(args.k)
    return config.replace(**changes) if changes else config


def _summary(report: dict) -> dict:
    command = report.get("command")
    if command == "pipeline":
        return {
            "metric_before": report["metric_before"],
            "rows": [
                {key: r[key] for key in ("builder", "solver", "k", "metric_after_mean", "energy_mean")}
                | {"selected": r["runs"][0]["selected"]}
                for r in report["rows"]
            ],
        }
    if command == "energy-vs-perf":
        return {"num_solutions": report["num_solutions"], "spearman": report["spearman"]}
    if command == "stability":
        return {"constraints": report["constraints"]}
    if command == "difficulty":
        return {"rows": [{k: r[k] for k in ("drop_fraction", "improvement_mean", "improvement_std")}
                         for r in report["rows"]]}
    if command == "timing":
        return {"table": report["table"]}
    return report


def run(args) -> dict:
    if args.command == "validate-q":
        return validate(load_q(args.path))
    config = resolve_config(args)
    if args.command == "pipeline":
        return ex.run_pipeline(config)
    if args.command == "energy-vs-perf":
        return ex.energy_vs_performance(config, args.num_solutions)
    if args.command == "stability":
        return ex.stability(config)
    if args.command == "difficulty":
        fractions = _parse_list(args.drop_fractions, float) if args.drop_fractions else None
        if fractions and not all(0.0 <= f < 1.0 for f in fractions):
            raise ConfigError("drop fractions must lie in [0, 1)")
        return ex.difficulty(config, fractions)
    if args.command == "timing":
        scales = _parse_list(args.scales, int) if args.scales else None
        return ex.timing(config, scales)
    return ex.synth(config)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, QMatrixError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(_summary(report), indent=2, default=ex._json_default))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
