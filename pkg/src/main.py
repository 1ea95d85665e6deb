#!/usr/bin/env python3
"""
Main entry point for the dynamic CQ engine.

This module handles command-line arguments, logging setup and the
subcommands: classify, run, bench, fuzz, demo and serve.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv

from . import __version__
from .analysis import classify
from .bench import BenchMode, run_bench
from .config import ConfigError, Settings, load_settings
from .engine import CoreNotQHierarchical, Engine
from .oracle import OracleRecompute, compare_stream, probe
from .query_model import ArityError, ParseError, Query, UpdateCommand
from .query_parser import format_query, parse_database, parse_query
from .workload import (
    GeneratorParams,
    Probe,
    format_probe_result,
    gen_random_qh,
    gen_scaling_workload,
    parse_stream,
    serialize_stream,
)

logger = logging.getLogger("src")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_NOT_MAINTAINABLE = 3

DEMO_QUERY = "Q(x,y,z,y2,z2) :- R(x,y,z), R(x,y,z2), E(x,y), E(x,y2), S(x,y,z)."

DEMO_SNAPSHOT = """\
E a e
E a f
E b d
E b g
E b h
S a e a
S a e b
S a f c
S b g b
S b p a
R a e a
R a e b
R a f c
R b g b
R b p a
R a e c
R b g a
R b g c
R b p b
R b p c
"""


class UsageError(Exception):
    """argparse rejected the command line."""

    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}", EXIT_USAGE)

    def exit(self, status: int = 0, message: Optional[str] = None) -> None:  # type: ignore[override]
        if message:
            print(message, file=sys.stderr, end="")
        raise UsageError(message or "", status)


def setup_logging(level: str) -> None:
    """Send package logs to stderr."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(levelname)s] %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def _sizes(text: str) -> List[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}") from None
    if not sizes or any(size < 1 for size in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    """Parse command line arguments."""
    parser = _Parser(
        prog="dyncq",
        description="Dynamic evaluation of conjunctive queries under single-fact updates",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  dyncq classify query.cq
  dyncq run query.cq updates.up --snapshot facts.db --verify
  dyncq bench query.cq --sizes 100,1000 --seed 7 --baseline
  dyncq fuzz --runs 1000 --seed 1
  dyncq demo
  dyncq serve                     # MCP tools on stdio

Environment Variables:
  DYNCQ_LOG_LEVEL        - log level on stderr (default: WARNING)
  DYNCQ_SEED             - default seed for fuzz and bench (default: 0)
  DYNCQ_FUZZ_RUNS        - default number of fuzz runs (default: 100)
  DYNCQ_MAX_VARS         - default fuzz query size (default: 6)
  DYNCQ_BENCH_SIZES      - default bench sizes (default: 100,1000,10000)
  DYNCQ_WARMUP_FRACTION  - update samples dropped by bench (default: 0.1)
        """,
    )
    parser.add_argument("--version", "-v", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    classify_cmd = commands.add_parser("classify", help="Classify a query")
    classify_cmd.add_argument("query", type=Path, help="Query file")

    run_cmd = commands.add_parser("run", help="Replay an update stream and print probe answers")
    run_cmd.add_argument("query", type=Path, help="Query file")
    run_cmd.add_argument("stream", type=Path, help="Update stream file")
    run_cmd.add_argument("--snapshot", type=Path, help="Initial database")
    mode = run_cmd.add_mutually_exclusive_group()
    mode.add_argument("--engine", dest="oracle", action="store_false", help="Use the dynamic engine (default)")
    mode.add_argument("--oracle", dest="oracle", action="store_true", help="Recompute every probe from scratch")
    run_cmd.add_argument("--verify", action="store_true", help="Cross-check every probe against the oracle")
    run_cmd.set_defaults(oracle=False)

    bench_cmd = commands.add_parser("bench", help="Benchmark on generated scaling workloads")
    bench_cmd.add_argument("query", type=Path, help="Query file")
    bench_cmd.add_argument("--sizes", type=_sizes, default=list(settings.bench_sizes), help="Comma-separated domain sizes")
    bench_cmd.add_argument("--seed", type=int, default=settings.seed)
    bench_cmd.add_argument("--baseline", action="store_true", help="Also measure the recompute-from-scratch oracle")

    fuzz_cmd = commands.add_parser("fuzz", help="Differential fuzzing against the oracle")
    fuzz_cmd.add_argument("--runs", type=int, default=settings.fuzz_runs)
    fuzz_cmd.add_argument("--seed", type=int, default=settings.seed)
    fuzz_cmd.add_argument("--max-vars", type=int, default=settings.max_vars)

    commands.add_parser("demo", help="Run the worked example end to end")
    commands.add_parser("serve", help="Run the MCP tool server on stdio")
    return parser


def _read_query(path: Path) -> Query:
    return parse_query(path.read_text(encoding="utf-8"))


def cmd_classify(args: argparse.Namespace) -> int:
    print(classify(_read_query(args.query)).report())
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    query = _read_query(args.query)
    stream = parse_stream(args.stream.read_text(encoding="utf-8"))
    snapshot = parse_database(args.snapshot.read_text(encoding="utf-8")) if args.snapshot else None

    evaluator = OracleRecompute(query) if args.oracle else Engine.create(query)
    checker = OracleRecompute(query) if args.verify and not args.oracle else None
    if snapshot is not None:
        evaluator.load(snapshot)
        if checker is not None:
            checker.load(snapshot)

    for index, command in enumerate(stream):
        if isinstance(command, Probe):
            value = probe(evaluator, command.kind)
            print(format_probe_result(command.kind, value))
            if checker is not None:
                expected = probe(checker, command.kind)
                if expected != value:
                    print(
                        f"verification failed at command {index + 1} ({command}): "
                        f"expected {format_probe_result(command.kind, expected)!r}",
                        file=sys.stderr,
                    )
                    return EXIT_MISMATCH
            continue
        evaluator.apply(command)
        if checker is not None:
            checker.apply(command)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    query = _read_query(args.query)
    workloads = [(size, gen_scaling_workload(query, size, args.seed)) for size in args.sizes]
    report = run_bench(query, workloads, BenchMode.ENGINE, settings.warmup_fraction)
    sys.stdout.write(report.to_csv())
    if args.baseline:
        baseline = run_bench(query, workloads, BenchMode.ORACLE, settings.warmup_fraction)
        for row in baseline.rows:
            print(row.model_copy(update={"phase": f"oracle_{row.phase}"}).to_csv())
    return EXIT_OK


def cmd_fuzz(args: argparse.Namespace) -> int:
    if args.runs < 1 or args.max_vars < 1:
        print("fuzz: --runs and --max-vars must be positive", file=sys.stderr)
        return EXIT_USAGE
    params = GeneratorParams(max_vars=args.max_vars)
    for run in range(args.runs):
        seed = args.seed + run
        query, stream = gen_random_qh(seed, params)
        mismatch = compare_stream(query, stream)
        if mismatch is not None:
            print(f"% counterexample for seed {seed}: {mismatch}")
            print(f"% query\n{format_query(query)}")
            print("% stream")
            sys.stdout.write(serialize_stream(stream))
            return EXIT_MISMATCH
        logger.debug("fuzz seed %d agrees on %s", seed, query)
    print(f"fuzz: {args.runs} runs agree with the oracle")
    return EXIT_OK


def cmd_demo() -> int:
    engine = Engine.create(parse_query(DEMO_QUERY))
    engine.load(parse_database(DEMO_SNAPSHOT))
    print(f"count {engine.count()}")
    for command in (UpdateCommand.insert("E", "b", "p"), UpdateCommand.delete("E", "b", "p")):
        engine.apply(command)
        print(f"count {engine.count()}")
    return EXIT_OK


def cmd_serve() -> int:
    # Import server lazily to avoid loading MCP for the batch commands
    from .server import create_server, start_server

    start_server(create_server())
    return EXIT_OK


def execute(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command line and return its exit code."""
    try:
        settings = load_settings()
    except ConfigError as error:
        print(f"configuration error: {error}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(settings.log_level)

    try:
        args = build_parser(settings).parse_args(argv)
    except UsageError as error:
        return error.code

    try:
        if args.command == "classify":
            return cmd_classify(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args, settings)
        if args.command == "fuzz":
            return cmd_fuzz(args)
        if args.command == "demo":
            return cmd_demo()
        return cmd_serve()
    except CoreNotQHierarchical as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_NOT_MAINTAINABLE
    except (ParseError, ArityError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    """Main entry point for console script."""
    # Load .env file if it exists (optional for development)
    load_dotenv(override=False)
    sys.exit(execute())


if __name__ == "__main__":
    main()
