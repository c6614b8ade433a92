"""Command line: bilinlab {run, report, list-kinds, validate}.

Exit codes: 0 all verdicts pass, 1 any failure, 2 usage error,
3 only inconclusive verdicts besides passes.
"""

import argparse
import os
import sys

from ..errors import UsageError
from .config import KINDS, ExperimentConfig
from .report import FORMATS, emit_report
from .runner import DEFAULT_CAP, ResultRecord, output_root, run_experiment, save_record

EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _formats(text):
    return tuple(f.strip() for f in text.split(",") if f.strip())


def build_parser():
    p = _Parser(prog="bilinlab", description="Run and report bilinear-estimate experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed-override", type=int, default=None)
    run.add_argument("--output-dir", default=None)
    run.add_argument("--cap-grid", type=int, default=DEFAULT_CAP,
                     help="largest estimated grid per cell (desk-scale guard)")
    run.add_argument("--formats", type=_formats, default=FORMATS)

    rep = sub.add_parser("report", help="emit reports for a stored record")
    rep.add_argument("record")
    rep.add_argument("--formats", type=_formats, default=FORMATS)
    rep.add_argument("--output-dir", default=None)

    sub.add_parser("list-kinds", help="list experiment kinds and their sweep axes")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return p


def _run(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed_override is not None:
        cfg.seed = args.seed_override
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    record = run_experiment(cfg, workers=args.workers, cap_grid=args.cap_grid)
    directory = os.path.join(output_root(cfg, args.output_dir), cfg.name)
    path = save_record(record, directory)
    stem = os.path.splitext(os.path.basename(path))[0]
    emit_report(record, args.formats, directory, stem)
    for v in record.verdicts:
        print(f"{v['name']}: {v['status']}" + (f" (fitted {v['fitted']:.4g})" if "fitted" in v else ""))
    for e in record.errors:
        print(f"cell {e['cell']} {e['coords']}: {e['type']}: {e['message']}", file=sys.stderr)
    print(f"status: {record.status}  record: {path}")
    return record.exit_code


def _report(args):
    try:
        record = ResultRecord.load(args.record)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read record: {exc}") from exc
    directory = args.output_dir or os.path.dirname(os.path.abspath(args.record))
    stem = os.path.splitext(os.path.basename(args.record))[0]
    for path in emit_report(record, args.formats, directory, stem):
        print(path)
    return record.exit_code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "run":
            return _run(args)
        if args.command == "report":
            return _report(args)
        if args.command == "list-kinds":
            for kind, spec in KINDS.items():
                print(f"{kind:18s} axes: {', '.join(spec['axes']) or '-'}"
                      f"  params: {', '.join(spec['params']) or '-'}")
            return 0
        if args.command == "validate":
            ExperimentConfig.load(args.config).validate()
            print("ok")
            return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
