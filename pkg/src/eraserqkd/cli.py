"""eraserqkd command line.

    eraserqkd run CONFIG.json
    eraserqkd sweep LAYOUT POINTS OUT.json
    eraserqkd oracle OUT.json
    eraserqkd selftest

Exit status: 0 success, 1 selftest/invariant failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, jsonio
from .photonic import Layout
from .protocol.session import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = harness.load_run_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        results = harness.run(cfg)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for res in results:
        print(res.summary())
    return EXIT_OK


def _write(path: str, obj) -> int:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        jsonio.write_json(path, obj)
    except OSError as exc:
        print(f"cannot write {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    if args.points < 2:
        print("sweep needs at least 2 points", file=sys.stderr)
        return EXIT_USAGE
    result = harness.sweep(args.layout, args.points)
    status = _write(args.out, result)
    if status == EXIT_OK:
        vis = " ".join(f"{d}={v:.3f}" for d, v in result["visibility"].items())
        print(f"{args.layout}: {args.points} points, visibility {vis}")
    return status


def _cmd_oracle(args: argparse.Namespace) -> int:
    table = harness.oracle_table()
    status = _write(args.out, table)
    if status == EXIT_OK:
        print("reproduce 25% (uniform eraser policy): " + ", ".join(table["reproduces_25_percent"]))
        for row in table["diverges_from_25_percent"]:
            print(f"diverges: {row['strategy']} with policy {row['policy']} -> QBER {row['qber']}")
    return status


def _cmd_selftest(args: argparse.Namespace) -> int:
    checks = harness.selftest()
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}" + (f": {c.detail}" if c.detail else ""))
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eraserqkd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a session from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="detection curves of a photonic layout over phi")
    p.add_argument("layout", choices=[layout.value for layout in Layout])
    p.add_argument("points", type=int)
    p.add_argument("out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle", help="exact QBER table for every attack")
    p.add_argument("out")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("selftest", help="run the invariant checks")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
