"""Command line entry point: ``windfront run|distance|ball|path|check``.

Exit codes: 0 success, 1 an invariant monitor tripped during ``run``,
2 invalid scenario or arguments, 3 engine error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import export
from .errors import ParseError, Unreachable, ValidationError, WindfrontError
from .navigation import ball_boundary, distance, fastest_path
from .runner import run_scenario
from .scenario import check_scenario, field_summary, load_scenario, build_metric

EXIT_OK, EXIT_MONITOR, EXIT_INVALID, EXIT_ENGINE = 0, 1, 2, 3


def _point(text):
    try:
        parts = [float(p) for p in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    return np.array(parts)


def _parser():
    p = argparse.ArgumentParser(prog="windfront", description="Wavefronts and fastest paths under wind.")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: WINDFRONT_THREADS or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="propagate the scenario front and write exports")
    r.add_argument("scenario")
    r.add_argument("-o", "--output", help="output directory (overrides [output].directory)")

    d = sub.add_parser("distance", help="generalised distance d(from, to)")
    d.add_argument("scenario")
    d.add_argument("--from", dest="src", type=_point, required=True, metavar="X,Y")
    d.add_argument("--to", dest="dst", type=_point, required=True, metavar="X,Y")
    d.add_argument("--no-polish", action="store_true", help="report the wavemap estimate only")

    b = sub.add_parser("ball", help="boundary of a forward or backward ball")
    b.add_argument("scenario")
    b.add_argument("--center", type=_point, required=True, metavar="X,Y")
    b.add_argument("--radius", type=float, required=True)
    b.add_argument("--side", choices=("fwd", "bwd"), default="fwd")

    q = sub.add_parser("path", help="fastest path between two points")
    q.add_argument("scenario")
    q.add_argument("--from", dest="src", type=_point, required=True, metavar="X,Y")
    q.add_argument("--to", dest="dst", type=_point, required=True, metavar="X,Y")

    c = sub.add_parser("check", help="validate a scenario without running it")
    c.add_argument("scenario")
    return p


def _emit(obj):
    sys.stdout.write(export.to_json(obj) + "\n")


def _query_opts(sc, args):
    return {"seeds": sc.run["seeds"], "dt": sc.run["dt"], "threads": args.threads}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.scenario)
        if args.command == "check":
            check_scenario(sc)
            _emit({"valid": True, "metric": sc.metric["kind"], "front": sc.front["shape"], "fields": field_summary(sc)})
            return EXIT_OK
        if args.command == "run":
            res = run_scenario(sc, args.output, threads=args.threads)
            _emit({"files": res.files, "report": res.report})
            return res.exit_code
        metric = build_metric(sc)
        opts = _query_opts(sc, args)
        if args.command == "distance":
            T = distance(metric, args.src, args.dst, polish=not args.no_polish, **opts)
            _emit({"from": args.src, "to": args.dst, "distance": T, "reachable": bool(np.isfinite(T))})
        elif args.command == "ball":
            side = "forward" if args.side == "fwd" else "backward"
            lines = ball_boundary(metric, args.center, args.radius, side, **opts)
            if isinstance(lines, np.ndarray):
                lines = [lines]
            _emit({"center": args.center, "radius": args.radius, "side": args.side, "polylines": [ln.tolist() for ln in lines]})
        else:
            try:
                res = fastest_path(metric, args.src, args.dst, **opts)
            except Unreachable as exc:
                _emit({"from": args.src, "to": args.dst, "status": "unreachable", "T": None, "message": str(exc)})
                return EXIT_OK
            _emit({"from": args.src, "to": args.dst, **res.as_dict()})
        return EXIT_OK
    except (ParseError, ValidationError) as exc:
        print(f"windfront: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"windfront: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except WindfrontError as exc:
        print(f"windfront: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
