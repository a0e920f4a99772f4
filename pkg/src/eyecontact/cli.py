"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
import argparse
import json
import sys
from pathlib import Path

from .classifier import SvmHyperParams
from .errors import ConfigError, EyeContactError
from .evaluation import ExperimentConfig, report_dict_to_csv, run_cross_experiment, run_within_experiment
from .io import read_dataset, read_report, report_json_text, write_dataset, write_report
from .pipeline import ClusterParams
from .synthgen import GeneratorConfig, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

LABELS = {"cluster": "clustered", "gt": "ground-truth"}
BREAKDOWN = {"none": "none", "category": "visibility-category", "headpose": "headpose-bucket"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_experiment_args(p: argparse.ArgumentParser, seed_required: bool):
    p.add_argument("--labels", choices=sorted(LABELS), required=True, help="training label source")
    p.add_argument("--by", choices=list(BREAKDOWN), default="none", help="breakdown of the report")
    p.add_argument("--out", required=True, help="output directory for report.json and report.csv")
    p.add_argument("--seed", type=int, required=seed_required, default=0)
    p.add_argument("--eps", type=float, default=20.0, help="clustering radius in mm")
    p.add_argument("--min-samples", type=int, default=5)
    p.add_argument("--max-points", type=int, default=None, help="cluster a seeded subsample of this size")
    p.add_argument("--per-person-clustering", action="store_true")
    p.add_argument("--lam", type=float, default=1e-4, help="SVM regularization strength")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--balanced", action="store_true", help="weight classes inversely to their frequency")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eyecontact", description="Eye contact detection experiments on frame datasets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--config", help="JSON generator config (defaults when omitted)")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, required=True)

    w = sub.add_parser("run-within", help="leave-one-person-out evaluation on one dataset")
    w.add_argument("--dataset", required=True)
    _add_experiment_args(w, seed_required=True)

    c = sub.add_parser("run-cross", help="train on one dataset, evaluate on another")
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    _add_experiment_args(c, seed_required=False)

    r = sub.add_parser("report", help="print a stored report")
    r.add_argument("--in", dest="in_dir", required=True)
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            label_source=LABELS[args.labels],
            breakdown=BREAKDOWN[args.by],
            cluster=ClusterParams(args.eps, args.min_samples, args.max_points),
            svm=SvmHyperParams(args.lam, args.epochs, args.seed, "balanced" if args.balanced else None),
            seed=args.seed,
            per_person_clustering=args.per_person_clustering,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _cmd_generate(args) -> int:
    d = {}
    if args.config:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(d, dict):
            raise ConfigError("generator config must be a JSON object")
    d["seed"] = args.seed
    cfg = GeneratorConfig.from_dict(d)
    write_dataset(generate_dataset(cfg), args.out)
    return EXIT_OK


def _cmd_within(args) -> int:
    cfg = _experiment_config(args)
    report = run_within_experiment(read_dataset(args.dataset), cfg)
    write_report(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_cross(args) -> int:
    cfg = _experiment_config(args)
    report = run_cross_experiment(read_dataset(args.train), read_dataset(args.test), cfg)
    write_report(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_report(args) -> int:
    report = read_report(args.in_dir)
    sys.stdout.write(report_json_text(report) if args.format == "json" else report_dict_to_csv(report))
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "run-within": _cmd_within, "run-cross": _cmd_cross, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (EyeContactError, OSError, json.JSONDecodeError) as exc:
        print(f"eyecontact: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
