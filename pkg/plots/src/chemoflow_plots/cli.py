"""chemoflow-plot <kind> <inputs...> -o <out> [--params FILE] [--fields a,b]"""

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="chemoflow-plot",
        description="Render report figures from chemoflow output files.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("inputs", nargs="+", help="input CSV/snapshot files")
    parser.add_argument("-o", "--output", required=True)
    parser.add_argument("--params", default="",
                        help="params.toml for the mass-bound overlay")
    parser.add_argument("--fields", default="",
                        help="comma list of snapshot fields (heatmap)")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)

    kwargs = {}
    if args.fields:
        kwargs["fields"] = tuple(args.fields.split(","))
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          output=args.output, params_path=args.params,
                          title=args.title, **kwargs)
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
