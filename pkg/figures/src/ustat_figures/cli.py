"""render: one figure per invocation from a simulation CSV.

Exit codes: 0 success, 2 bad input (unknown kind, unreadable file, header
mismatch), 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .render import FigureJob, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="render",
        description="Render a tail-curve, sweep or ratio plot from a hidim-ustat CSV.")
    p.add_argument("--kind", required=True, choices=("tail", "sweep", "ratios"),
                   help="figure family the CSV belongs to")
    p.add_argument("--in", dest="src", required=True, metavar="CSV",
                   help="input CSV path")
    p.add_argument("--out", required=True, metavar="IMAGE",
                   help="output image path (extension picks the format)")
    p.add_argument("--logx", action="store_true", help="logarithmic x axis")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = _build_parser().parse_args(argv)
    job = FigureJob(src=Path(ns.src), kind=ns.kind, out=Path(ns.out), logx=ns.logx)
    try:
        render(job)
    except SchemaError as exc:
        print(f"render: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"render: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # CLI boundary: fold anything else into exit 1
        print(f"render: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
