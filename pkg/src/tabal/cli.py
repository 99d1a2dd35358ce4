"""Command-line entry points: run experiments, then summarize, test
significance, or export learning curves from a result store."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import (
    SUMMARY_METRICS,
    ResultStore,
    emit_learning_curves,
    load_config,
    run_experiment,
    significance_report,
    summarize,
    write_significance_csv,
    write_summary_csv,
)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.out is not None:
        cfg.output_dir = args.out
    store = run_experiment(cfg)
    if store.failures:
        print(f"{len(store.failures)} runs failed; see {store.directory / 'failures.json'}", file=sys.stderr)
        return 1
    print(f"records in {store.directory}")
    return 0


def _cmd_summarize(args) -> int:
    store = ResultStore(args.store)
    rows = summarize(store, metric=args.metric)
    path = write_summary_csv(rows, store.directory / f"summary_{args.metric}.csv")
    sys.stdout.write(path.read_text(encoding="utf-8"))
    return 0


def _cmd_significance(args) -> int:
    store = ResultStore(args.store)
    rows = significance_report(store, args.a, args.b, alpha_level=args.alpha)
    path = write_significance_csv(rows, store.directory / f"significance_{args.a}_vs_{args.b}.csv")
    sys.stdout.write(path.read_text(encoding="utf-8"))
    return 0


def _cmd_curves(args) -> int:
    store = ResultStore(args.store)
    written = emit_learning_curves(store, out_dir=args.out)
    print(f"wrote {len(written)} curve files to {written[0].parent if written else args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the experiment grid from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the experiment config file")
    p_run.add_argument("--jobs", type=int, default=None, help="parallel worker count")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_sum = sub.add_parser("summarize", help="per-dataset/strategy mean and std of a metric")
    p_sum.add_argument("--store", required=True, help="result store directory")
    p_sum.add_argument("--metric", choices=SUMMARY_METRICS, default="aulc")
    p_sum.set_defaults(func=_cmd_summarize)

    p_sig = sub.add_parser("significance", help="paired Wilcoxon + BH comparison of two strategies")
    p_sig.add_argument("--store", required=True)
    p_sig.add_argument("--a", required=True, help="first strategy name")
    p_sig.add_argument("--b", required=True, help="second strategy name")
    p_sig.add_argument("--alpha", type=float, default=0.05)
    p_sig.set_defaults(func=_cmd_significance)

    p_cur = sub.add_parser("curves", help="export per-group learning-curve CSVs")
    p_cur.add_argument("--store", required=True)
    p_cur.add_argument("--out", default=None)
    p_cur.set_defaults(func=_cmd_curves)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
