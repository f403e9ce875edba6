"""Command-line interface.

    flatlog run PROGRAM --facts DIR --out DIR [--workers N]
            [--schedule seq|stream] [--head-threshold N] [--stats FILE]
            [--strict-inputs] [--snapshots]
    flatlog bench SUITE --scale S --seed K [--verify] [--workers N]
            [--schedule seq|stream]

Exit codes: 0 ok, 1 program error (parse/stratification), 2 input/output
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .bench import SUITES, run_suite
from .errors import InputError, InternalError, ProgramError
from .parser import parse
from .relio import read_snapshot, read_tsv, write_snapshot, write_tsv
from .runtime import Engine, Stats
from .storage import DEFAULT_FLUSH_LIMIT


def _build_arg_parser():
    top = argparse.ArgumentParser(prog="flatlog")
    sub = top.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a program over fact files")
    run.add_argument("program")
    run.add_argument("--facts", required=True, help="directory of <Relation>.tsv inputs")
    run.add_argument("--out", required=True, help="directory for <Relation>.tsv outputs")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--schedule", choices=["seq", "stream"], default="seq")
    run.add_argument("--head-threshold", type=int, default=DEFAULT_FLUSH_LIMIT)
    run.add_argument("--stats", help="write JSON-lines phase stats to this file")
    run.add_argument("--strict-inputs", action="store_true",
                     help="fail instead of warning when an input file is missing")
    run.add_argument("--snapshots", action="store_true",
                     help="prefer .snap inputs when present and write .snap outputs")

    bench = sub.add_parser("bench", help="run a synthetic benchmark suite")
    bench.add_argument("suite", choices=sorted(SUITES))
    bench.add_argument("--scale", default="tiny", help="tiny/small/medium or an integer")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--verify", action="store_true")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--schedule", choices=["seq", "stream"], default="seq")
    return top


def _load_inputs(engine, program, facts_dir, strict, snapshots):
    for name in program.inputs:
        snap_path = os.path.join(facts_dir, f"{name}.snap")
        tsv_path = os.path.join(facts_dir, f"{name}.tsv")
        if snapshots and os.path.exists(snap_path):
            rows = read_snapshot(snap_path)
        elif os.path.exists(tsv_path):
            rows = read_tsv(tsv_path)
        elif strict:
            raise InputError(f"missing fact file for input relation {name}: {tsv_path}")
        else:
            print(f"warning: no fact file for input relation {name}; treating as empty",
                  file=sys.stderr)
            rows = []
        engine.load_facts(name, rows)


def _cmd_run(args) -> int:
    try:
        with open(args.program, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"error: cannot read program: {exc}", file=sys.stderr)
        return 2

    program = parse(source)
    stats = Stats(path=args.stats) if args.stats else Stats(enabled=False)
    engine = Engine(
        program,
        workers=args.workers,
        schedule=args.schedule,
        head_threshold=args.head_threshold,
        stats=stats,
    )
    _load_inputs(engine, program, args.facts, args.strict_inputs, args.snapshots)
    started = time.perf_counter()
    summary = engine.solve()
    wall = time.perf_counter() - started

    os.makedirs(args.out, exist_ok=True)
    for name in program.outputs:
        rows = engine.relation_rows(name)
        write_tsv(os.path.join(args.out, f"{name}.tsv"), rows)
        if args.snapshots:
            write_snapshot(
                os.path.join(args.out, f"{name}.snap"), rows, program.arity(name)
            )
    stats.close()

    print(f"evaluated {args.program} in {wall:.3f}s")
    for s in summary.strata:
        kind = "recursive" if s.recursive else "single-pass"
        print(f"stratum {s.index} [{kind}] rules={','.join(s.rules)} iterations={s.iterations}")
    for name in sorted(summary.relations):
        print(f"{name}: {summary.relations[name]} tuples")
    return 0


def _cmd_bench(args) -> int:
    scale = args.scale
    if isinstance(scale, str) and scale.isdigit():
        scale = int(scale)
    report = run_suite(
        args.suite,
        scale,
        args.seed,
        workers=args.workers,
        schedule=args.schedule,
        verify=args.verify,
    )
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_bench(args)
    except ProgramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InternalError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
