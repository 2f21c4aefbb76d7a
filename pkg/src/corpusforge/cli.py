"""Command line front end: run, list-processors, sample, stats.

stdout carries machine-readable output only (JSON, JSONL, or TSV);
progress and errors go to stderr. Exit codes: 0 success, 2 config or
validation error, 3 IO error, 4 stage/data error, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import replace
from typing import Optional

from .config import PipelineConfig, load_config, validate_config
from .core import document_to_line
from .engine import StagePlan, build_pipeline, run_pipeline, run_truncated
from .errors import (
    CorpusforgeError,
    CsvParseError,
    DuplicateKeyError,
    EmptyInput,
    EncodingError,
    IoError,
    KeyFormatError,
    ParseError,
    ProcessorNotFound,
    SchemaError,
    StageError,
    ValidationError,
)
from .registry import ProcessorRegistry, default_registry
from .utilities import compute_corpus_stats, reservoir_pick, stats_to_json

_CONFIG_ERRORS = (ParseError, ValidationError, KeyFormatError, ProcessorNotFound, DuplicateKeyError)
_DATA_ERRORS = (StageError, SchemaError, EncodingError, CsvParseError, EmptyInput)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_STAGE = 4


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, (IoError, OSError)):
        return EXIT_IO
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_STAGE
    return EXIT_UNEXPECTED


def _load_and_plan(
    args: argparse.Namespace, reg: ProcessorRegistry
) -> tuple[Optional[PipelineConfig], Optional[list[StagePlan]]]:
    """Config + validated plans, with flag overrides applied.

    On validation failure prints diagnostics to stderr and returns
    (None, None); the caller exits EXIT_CONFIG.
    """
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, executor=replace(cfg.executor, **overrides))

    diagnostics = validate_config(cfg, reg)
    if diagnostics:
        for diag in diagnostics:
            print(f"config error at {diag.field}: {diag.message}", file=sys.stderr)
        return None, None
    return cfg, build_pipeline(cfg, reg)


def _check_stage_index(value: Optional[int], flag: str, plan_count: int) -> bool:
    if value is None:
        return True
    if 0 <= value < plan_count:
        return True
    print(
        f"{flag} must be in [0, {plan_count - 1}], got {value}",
        file=sys.stderr,
    )
    return False


def cmd_run(args: argparse.Namespace) -> int:
    reg = default_registry()
    cfg, plans = _load_and_plan(args, reg)
    if plans is None:
        return EXIT_CONFIG

    if args.dry_run:
        listing = [
            {"index": p.index, "name": p.name, "kind": p.entry.kind, "mode": p.mode, "args": p.args}
            for p in plans
        ]
        print(_canonical(listing))
        return EXIT_OK

    if not _check_stage_index(args.upto, "--upto", len(plans)):
        return EXIT_CONFIG
    if args.limit is not None and args.limit < 0:
        print("--limit must be >= 0", file=sys.stderr)
        return EXIT_CONFIG

    if args.upto is not None or args.limit is not None:
        upto = args.upto if args.upto is not None else len(plans) - 1
        _, report = run_truncated(
            plans, cfg.executor, upto, args.limit, keep_intermediate=args.keep_intermediate
        )
    else:
        _, report = run_pipeline(plans, cfg.executor, keep_intermediate=args.keep_intermediate)
    print(_canonical(report.to_dict()))
    return EXIT_OK


def cmd_list_processors(args: argparse.Namespace) -> int:
    reg = default_registry()
    for key, kind, doc in reg.list_processors(args.category):
        print(f"{key}\t{kind}\t{doc}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    reg = default_registry()
    cfg, plans = _load_and_plan(args, reg)
    if plans is None:
        return EXIT_CONFIG
    if not _check_stage_index(args.at, "--at", len(plans)):
        return EXIT_CONFIG
    if args.n < 0:
        print("--n must be >= 0", file=sys.stderr)
        return EXIT_CONFIG

    shards, _ = run_truncated(plans, cfg.executor, args.at)
    picked = reservoir_pick(shards.iter_documents(), args.n, cfg.executor.seed)
    for doc in sorted(picked, key=lambda d: d.id):
        print(document_to_line(doc))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    reg = default_registry()
    cfg, plans = _load_and_plan(args, reg)
    if plans is None:
        return EXIT_CONFIG
    if not _check_stage_index(args.at, "--at", len(plans)):
        return EXIT_CONFIG

    upto = args.at if args.at is not None else len(plans) - 1
    shards, _ = run_truncated(plans, cfg.executor, upto)
    print(stats_to_json(compute_corpus_stats(shards)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpusforge",
        description="Config-driven ETL pipelines for LLM training corpora.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a pipeline config")
    run.add_argument("--config", required=True, help="pipeline config path (yaml or json)")
    run.add_argument("--workers", type=int, help="override executor.workers")
    run.add_argument("--seed", type=int, help="override executor.seed")
    run.add_argument("--dry-run", action="store_true", help="print the stage plan, touch nothing")
    run.add_argument("--upto", type=int, help="stop after this stage index")
    run.add_argument("--limit", type=int, help="cap ingested record count")
    run.add_argument(
        "--keep-intermediate", action="store_true", help="keep per-stage shard directories"
    )
    run.set_defaults(handler=cmd_run)

    lp = sub.add_parser("list-processors", help="print the processor catalog")
    lp.add_argument("--category", help="only this category")
    lp.set_defaults(handler=cmd_list_processors)

    sample = sub.add_parser("sample", help="run up to a stage and print sampled records")
    sample.add_argument("--config", required=True)
    sample.add_argument("--workers", type=int, help="override executor.workers")
    sample.add_argument("--seed", type=int, help="override executor.seed")
    sample.add_argument("--at", type=int, required=True, help="stage index to sample after")
    sample.add_argument("--n", type=int, required=True, help="sample size")
    sample.set_defaults(handler=cmd_sample)

    stats = sub.add_parser("stats", help="run up to a stage and print corpus statistics")
    stats.add_argument("--config", required=True)
    stats.add_argument("--workers", type=int, help="override executor.workers")
    stats.add_argument("--seed", type=int, help="override executor.seed")
    stats.add_argument("--at", type=int, help="stage index to measure after (default: last)")
    stats.set_defaults(handler=cmd_stats)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except CorpusforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
