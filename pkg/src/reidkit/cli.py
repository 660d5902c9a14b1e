"""Command-line front end for batch evaluation on embedding files."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .io import EmbeddingFileError
from .pipeline import dump_schedule, gen_synthetic, run_eval, run_rerank_only

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    level_name = os.environ.get("REID_LOG_LEVEL", "warn").lower()
    level = _LOG_LEVELS.get(level_name)
    if level is None:
        print(f"reidkit: unknown REID_LOG_LEVEL {level_name!r}, using warn", file=sys.stderr)
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reidkit", description="Batch re-identification evaluation over embedding files"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="distance -> optional QE/re-rank -> metrics")
    p_eval.add_argument("--config", required=True, help="flat YAML-subset config file")
    p_eval.add_argument("--out", default=None, help="output directory (overrides config)")
    p_eval.add_argument("--seed", type=int, default=None, help="seed recorded in the config")
    p_eval.add_argument("--threads", type=int, default=None, help="worker threads")

    p_gen = sub.add_parser("gen-synthetic", help="write a synthetic query/gallery pair")
    p_gen.add_argument("--ids", type=int, required=True)
    p_gen.add_argument("--per-id", type=int, required=True)
    p_gen.add_argument("--dim", type=int, default=16)
    p_gen.add_argument("--noise", type=float, default=0.1)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--width", type=int, choices=(4, 8), default=4)

    p_sched = sub.add_parser("dump-schedule", help="tabulate the learning-rate curve")
    p_sched.add_argument("--config", required=True)
    p_sched.add_argument("--out", default=None)
    p_sched.add_argument("--stride", type=int, default=None)

    p_rr = sub.add_parser("rerank-only", help="write re-ranked distances without metrics")
    p_rr.add_argument("--config", required=True)
    p_rr.add_argument("--out", default=None)

    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "version":
            print(f"reidkit {__version__}")
        elif args.command == "eval":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, seed=args.seed)
            report = run_eval(cfg, out_dir=args.out, threads=args.threads)
            print(
                f"mAP={report.mean_ap:.4f} mINP={report.mean_inp:.4f} "
                f"rank-1={report.cmc[0]:.4f} AUC={report.auc:.4f} "
                f"({report.num_queries} queries, {report.num_excluded} excluded)"
            )
        elif args.command == "gen-synthetic":
            paths = gen_synthetic(
                args.ids, args.per_id, args.dim, args.noise, args.seed, args.out, width=args.width
            )
            print(f"wrote {paths['query']} and {paths['gallery']}")
        elif args.command == "dump-schedule":
            cfg = load_config(args.config)
            if cfg.schedule is None:
                raise ConfigError("config has no schedule section")
            out = args.out if args.out is not None else cfg.out_dir
            rows = dump_schedule(cfg.schedule, out, stride=args.stride)
            print(f"wrote {len(rows)} schedule rows to {out}")
        elif args.command == "rerank-only":
            cfg = load_config(args.config)
            run_rerank_only(cfg, out_dir=args.out)
            print("wrote re-ranked distances")
    except (ConfigError, EmbeddingFileError, ValueError, OSError) as exc:
        print(f"reidkit: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
