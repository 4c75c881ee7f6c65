"""Command line entry: manyheom-figures render --figure <id> --data <dir> --out <path>."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURES, SchemaError, render


def main(argv=None):
    parser = argparse.ArgumentParser(prog="manyheom-figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from persisted CSVs")
    p.add_argument("--figure", required=True, choices=sorted(FIGURES))
    p.add_argument("--data", required=True, help="run directory with the CSVs")
    p.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        out = render(args.figure, args.data, args.out)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
