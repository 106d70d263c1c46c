"""figplots <figure-id> --in DIR --out FILE.png"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figplots", description=__doc__)
    parser.add_argument("figure", choices=["fig2", "fig3", "fig4"])
    parser.add_argument("--in", dest="in_dir", type=Path, required=True,
                        help="directory holding the experiment CSVs")
    parser.add_argument("--out", dest="out_file", type=Path, required=True,
                        help="output PNG path")
    args = parser.parse_args(argv)
    try:
        out = render(FigureSpec(args.figure, args.in_dir, args.out_file))
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
