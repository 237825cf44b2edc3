"""Command line: ``rotorwalk run | fit | render | validate``.

Exit codes: 0 success, 1 usage or spec error, 2 a proven invariant failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import SpecError, atomic_write, fit_exponent, load_spec, run_experiment, write_report
from .graphs import WorldLimitError

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed_range(text: str) -> list[int]:
    """``a..b`` inclusive, or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use a..b") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("seed range is empty")
    return list(range(lo, hi + 1))


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rotorwalk", description="Rotor walk experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, need_spec=True):
        sp.add_argument("--spec", required=need_spec, help="experiment spec (JSON)")
        sp.add_argument("--out", help="output directory (default: paths in the spec)")
        sp.add_argument("--seeds", type=_seed_range, help="override seeds, a..b inclusive")
        sp.add_argument("--budget", type=_positive, help="override the step budget")
        sp.add_argument("--world-limit", type=_positive, help="override the coordinate bound")

    common(sub.add_parser("run", help="run an experiment and write its reports"))
    common(sub.add_parser("render", help="write the excursion-coloured range image"))
    common(sub.add_parser("validate", help="check a spec without running it"))
    fit = sub.add_parser("fit", help="fit value ~ t^slope on a CSV")
    fit.add_argument("csv", help="CSV with a header row")
    fit.add_argument("--x", default="t", help="column for t (default t)")
    fit.add_argument("--y", default="range_size", help="column for the value (default range_size)")
    return p


def _spec(args):
    spec = load_spec(args.spec)
    changes = {}
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.budget is not None:
        changes["steps"] = args.budget
    if args.world_limit is not None:
        changes["world_limit"] = args.world_limit
    return replace(spec, **changes) if changes else spec


def _cmd_fit(args) -> int:
    try:
        with open(args.csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
        series = [(float(r[args.x]), float(r[args.y])) for r in rows]
        fit = fit_exponent(series)
    except OSError as exc:
        print(f"rotorwalk: cannot read {args.csv}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, ValueError) as exc:
        print(f"rotorwalk: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "fit":
        return _cmd_fit(args)
    try:
        spec = _spec(args)
        if args.command == "validate":
            print(f"ok {spec.experiment} {spec.digest()[:12]}")
            return EXIT_OK
        if args.out is not None:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        if args.command == "render":
            if spec.experiment != "excursions":
                raise SpecError("experiment", "render needs an excursions spec")
            spec = replace(spec, outputs={**spec.outputs, "ppm": spec.outputs.get("ppm", "range.ppm")})
            report = run_experiment(spec)
            if report.ppm is None:
                raise SpecError("graph.kind", "render needs a lattice")
            dest = Path(args.out) / f"{spec.name}.ppm" if args.out else Path(spec.outputs["ppm"])
            atomic_write(dest, report.ppm)
            print(dest)
        else:
            report = run_experiment(spec)
            for path in write_report(report, args.out):
                print(path)
    except SpecError as exc:
        print(f"rotorwalk: invalid spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorldLimitError as exc:
        print(f"rotorwalk: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rotorwalk: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if report.violations:
        for v in report.violations[:20]:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
