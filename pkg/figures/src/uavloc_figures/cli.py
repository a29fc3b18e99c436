"""Command line: figures <kind> --in <csv...> --out <image>."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import render_cdf, render_map, render_qcurve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render plots from uavloc CSV outputs")
    sub = parser.add_subparsers(dest="kind", required=True)

    p_cdf = sub.add_parser("cdf", help="localization-error CDF curves")
    p_q = sub.add_parser("qcurve", help="positive-Q learning curves")
    p_map = sub.add_parser("map", help="occupancy log-odds heatmap")
    for p in (p_cdf, p_q, p_map):
        p.add_argument("--in", dest="inputs", nargs="+", required=True,
                       help="input CSV file(s)")
        p.add_argument("--out", required=True, help="output image path")
    p_map.add_argument("--run", type=int, default=None, help="run_id to draw")
    p_map.add_argument("--episode", type=int, default=None, help="episode to draw")
    p_map.add_argument("--trajectory", default=None,
                       help="optional x,y[,uav_id] CSV to overlay")

    args = parser.parse_args(argv)
    try:
        if args.kind == "cdf":
            render_cdf(args.inputs, args.out)
        elif args.kind == "qcurve":
            render_qcurve(args.inputs, args.out)
        else:
            render_map(args.inputs, args.out, run_id=args.run,
                       episode=args.episode, trajectory_path=args.trajectory)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
