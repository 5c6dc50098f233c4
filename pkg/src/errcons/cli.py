"""Command-line interface: ``errcons analyze | simulate | bounds``.

Exit status: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import consistency, ingest, report
from .core import GridSpec
from .errors import DataError, ErrconsError, InvariantViolation, SpecError, UndefinedKappaError
from .nullsim import run_simulation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("errcons")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _quantile_pair(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    return lo, hi


def _acc_pair(text):
    try:
        p, q = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'p,q', got {text!r}") from None
    return p, q


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_grid_flags(p, *, with_n):
    p.add_argument("--preset", choices=["paper-160", "paper-1280"], help="fill grid settings with published defaults")
    if with_n:
        p.add_argument("--n", type=int, help="trials per simulated experiment")
    p.add_argument("--axis", type=int, help="grid points per accuracy axis (default 4200)")
    p.add_argument("--reps", type=int, help="repetitions per grid cell (default 5)")
    p.add_argument("--seed", type=_u64, help="simulation seed (default 0)")
    p.add_argument("--quantiles", type=_quantile_pair, help="quantile pair lo,hi (default 0.025,0.975)")
    p.add_argument("--tail-fraction", type=float, help="fraction of axis points in each tail (default 0.33)")
    p.add_argument("--tail-width", type=float, help="width of each accuracy tail (default 0.15)")


def _grid_spec(args, n=None) -> GridSpec:
    overrides = {}
    for flag, key in (("axis", "axis_points"), ("reps", "reps_per_cell"), ("seed", "seed"),
                      ("quantiles", "quantile_pair"), ("tail_fraction", "tail_fraction"),
                      ("tail_width", "tail_width")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    n = n if n is not None else getattr(args, "n", None)
    if n is not None:
        overrides["n_trials"] = n
    if args.preset:
        preset_n = GridSpec.preset(args.preset).n_trials
        if n is not None and preset_n != n:
            raise SpecError(f"preset {args.preset} is for n={preset_n} trials, requested n={n}")
        return GridSpec.preset(args.preset, **overrides)
    return GridSpec(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="errcons", description="Error consistency analysis for binary-outcome observers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="pairwise error consistency for response files")
    a.add_argument("--input", nargs="+", required=True, type=Path, help="CSV file(s) with per-trial responses")
    a.add_argument("--profile", choices=sorted(ingest.PROFILES), default="canonical")
    a.add_argument("--mapping", type=Path, help="JSON column-mapping file (overrides --profile)")
    a.add_argument("--compare", choices=[ingest.STRICT, ingest.CASE_INSENSITIVE], default=ingest.STRICT,
                   help="category comparison mode when deriving correctness")
    a.add_argument("--groups", type=Path, help="JSON object mapping observer id to group label")
    a.add_argument("--policy", choices=[ingest.REQUIRE_COMPLETE, ingest.INTERSECT], default=ingest.REQUIRE_COMPLETE)
    band = a.add_mutually_exclusive_group()
    band.add_argument("--band-table", type=Path, help="percentile table from 'errcons simulate'")
    band.add_argument("--no-band", action="store_true", help="do not attach null bands (default)")
    band.add_argument("--simulate", action="store_true", help="simulate a percentile table for the data's n")
    _add_grid_flags(a, with_n=False)
    a.add_argument("--band-stat", choices=["kappa", "cobs"], default="kappa")
    a.add_argument("--confusion", action="store_true", help="also write per-observer confusion matrices")
    a.add_argument("--out", type=Path, required=True, help="output directory")

    s = sub.add_parser("simulate", help="simulate null-hypothesis percentile bands")
    _add_grid_flags(s, with_n=True)
    s.add_argument("--out", type=Path, required=True, help="output table file")

    b = sub.add_parser("bounds", help="analytical bounds of c_obs and kappa")
    b.add_argument("--cexp", nargs="+", type=float, default=[], metavar="V")
    b.add_argument("--acc", nargs="+", type=_acc_pair, default=[], metavar="P,Q")
    return parser


def cmd_analyze(args) -> int:
    profile = ingest.ColumnMapping.load(args.mapping) if args.mapping else ingest.PROFILES[args.profile]
    rows = ingest.merge_rows(ingest.parse_responses(path, profile) for path in args.input)
    outcomes, align_report = ingest.align_detailed(rows, args.policy, args.compare)
    matrix = consistency.pairwise_matrix(outcomes)
    groups = ingest.load_groups(args.groups) if args.groups else {o: "all" for o in outcomes.observers}

    grid_flags = any(getattr(args, f) is not None for f in ("preset", "axis", "reps", "seed", "quantiles",
                                                            "tail_fraction", "tail_width"))
    if grid_flags and not args.simulate:
        raise UsageError("grid options require --simulate")
    table = None
    if args.band_table:
        table = report.read_table(args.band_table)
    elif args.simulate:
        table = run_simulation(_grid_spec(args, n=outcomes.n))

    points = report.scatter_report(matrix, groups, table, args.band_stat)
    summary = report.group_summary(points)
    for g, s in summary.items():
        if s.insufficient:
            print(f"warning: group {g!r} has fewer than two defined kappa values; no CI", file=sys.stderr)

    mats = {o: report.confusion(rows, o).to_dict() for o in outcomes.observers} if args.confusion else None

    args.out.mkdir(parents=True, exist_ok=True)
    report.write_scatter_csv(points, args.out / "scatter.csv")
    report.write_summary_json(summary, args.out / "summary.json")
    report.write_accuracy_csv(report.accuracy_table(outcomes), args.out / "accuracy.csv")
    (args.out / "alignment.json").write_text(report.dump_json(align_report.to_dict()), encoding="utf-8")
    if mats is not None:
        (args.out / "confusion.json").write_text(report.dump_json(mats), encoding="utf-8")
    print(f"{len(outcomes.observers)} observers, {outcomes.n} trials, {len(points)} pairs -> {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _grid_spec(args)
    start = time.perf_counter()
    table = run_simulation(spec)
    elapsed = time.perf_counter() - start
    if args.out.parent and not args.out.parent.exists():
        args.out.parent.mkdir(parents=True)
    report.write_table(table, args.out)
    corr = "n/a" if table.kappa_cexp_corr is None else f"{table.kappa_cexp_corr:.6g}"
    print(
        f"samples={table.samples} dropped_degenerate={table.degenerate} "
        f"corr(kappa,c_exp)={corr} wall={elapsed:.2f}s -> {args.out}"
    )
    return EXIT_OK


def _bounds_row(label, c_exp, cobs):
    try:
        kb = consistency.bounds_kappa(c_exp)
        kl, kh = report.fmt(kb.lo), report.fmt(kb.hi)
    except UndefinedKappaError:
        kl = kh = "undefined"
    return " ".join([label, report.fmt(c_exp), report.fmt(cobs.lo), report.fmt(cobs.hi), kl, kh])


def cmd_bounds(args) -> int:
    if not args.cexp and not args.acc:
        raise UsageError("give at least one --cexp value or --acc pair")
    print("input c_exp cobs_lo cobs_hi kappa_lo kappa_hi")
    failed = False
    for v in args.cexp:
        try:
            print(_bounds_row(report.fmt(v), v, consistency.bounds_cobs(v)))
        except DataError as exc:
            print(f"error: {v}: {exc}", file=sys.stderr)
            failed = True
    for p, q in args.acc:
        label = f"{report.fmt(p)},{report.fmt(q)}"
        try:
            c = consistency.expected_overlap(p, q)
            cb = consistency.bounds_cobs_from_accuracies(p, q)
            if c == 1.0:
                kl = kh = "undefined"
            else:
                kl = report.fmt(consistency.kappa(cb.lo, c))
                kh = report.fmt(consistency.kappa(cb.hi, c))
            print(" ".join([label, report.fmt(c), report.fmt(cb.lo), report.fmt(cb.hi), kl, kh]))
        except DataError as exc:
            print(f"error: {label}: {exc}", file=sys.stderr)
            failed = True
    return EXIT_DATA if failed else EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"errcons {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"errcons {args.command}: invalid simulation settings: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"errcons {args.command}: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (DataError, OSError) as exc:
        print(f"errcons {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ErrconsError as exc:
        print(f"errcons {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
