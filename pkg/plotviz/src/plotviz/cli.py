"""render: turn upstream CSV artifacts into PNG figures.

    render --kind density      --in out/trajectory.csv        --out density.png
    render --kind overlay      --in out/ensemble.csv out/limit_trajectory.csv --out overlay.png
    render --kind convergence  --in out/report.csv            --out gaps.png
    render --kind strips-compare --in out/report.csv          --out strips.png

Exit codes: 0 success, 2 schema or usage problems.
"""

from __future__ import annotations

import argparse
import sys

from .plots import RENDERERS
from .tables import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__.splitlines()[0])
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="input CSV artifact(s)")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--bins", type=int, default=16, help="overlay histogram bins")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)

    kwargs = {"title": args.title}
    if args.kind == "overlay":
        kwargs["bins"] = args.bins
    try:
        annotations = RENDERERS[args.kind](args.inputs, args.out, **kwargs)
    except SchemaError as e:
        print(f"error [schema]: {e}", file=sys.stderr)
        return 2
    for key, value in sorted(annotations.items()):
        print(f"{key} = {value}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
