"""Plot-ready analysis outputs (CSV for tables, JSON for nested summaries).

Report files format floats to six significant digits so that identical
inputs give byte-identical files. Percentile-table files are caches and
keep full precision.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .consistency import PairwiseMatrix, bounds_cobs, bounds_kappa, group_mean_ci
from .core import (
    UNDEFINED,
    AlignedOutcomes,
    BinQuantiles,
    GridSpec,
    Interval,
    Kappa,
    ObserverId,
    PercentileTable,
)
from .errors import DataError, InsufficientDataError, InvariantViolation, TableMismatchError, UnknownObserverError
from .ingest import RawTrialRow
from .nullsim import band_lookup

PAIR_SEP = "–"
TABLE_MAGIC = "# errcons percentile table v1"
_FEASIBILITY_TOL = 1e-9


def fmt(x) -> str:
    """Six significant digits, shortest form; '' for None."""
    if x is None:
        return ""
    if x is UNDEFINED:
        return "undefined"
    x = float(x)
    s = format(x, ".6g")
    return "0" if s == "-0" else s


def group_label(a: str, b: str) -> str:
    return PAIR_SEP.join(sorted((a, b)))


@dataclass(frozen=True)
class ScatterPoint:
    pair: tuple[ObserverId, ObserverId]
    group: str
    n: int
    c_exp: float
    c_obs: float
    kappa: Kappa
    band: Interval | None = None


def scatter_report(matrix: PairwiseMatrix, groups: Mapping[ObserverId, str],
                   table: PercentileTable | None = None, band_stat: str = "kappa") -> list[ScatterPoint]:
    """One point per unordered observer pair, self pairs excluded.

    With a table, each point carries the null band of its c_exp bin for
    ``band_stat`` ("kappa" or "cobs").
    """
    missing = [o for o in matrix.observers if o not in groups]
    if missing:
        raise DataError(f"no group label for observer(s): {', '.join(missing)}")
    if table is not None and table.n != matrix.n:
        raise TableMismatchError(
            f"percentile table was simulated for n={table.n} trials but the data has n={matrix.n}"
        )
    points = []
    for res in matrix.unique_pairs():
        a, b = res.pair
        _check_feasible(res)
        band = band_lookup(table, res.c_exp_exact, band_stat) if table is not None else None
        points.append(ScatterPoint((a, b), group_label(groups[a], groups[b]), res.n, res.c_exp, res.c_obs,
                                   res.kappa, band))
    return points


def _check_feasible(res):
    cb = bounds_cobs(res.c_exp)
    if not cb.contains(res.c_obs, _FEASIBILITY_TOL):
        raise InvariantViolation(f"pair {res.pair}: c_obs {res.c_obs} outside {cb}")
    if res.kappa is not UNDEFINED:
        kb = bounds_kappa(res.c_exp)
        if not kb.contains(res.kappa, _FEASIBILITY_TOL):
            raise InvariantViolation(f"pair {res.pair}: kappa {res.kappa} outside {kb}")


@dataclass(frozen=True)
class GroupSummary:
    mean_kappa: float | None
    ci: Interval | None
    count: int
    excluded_undefined: int

    @property
    def insufficient(self) -> bool:
        return self.ci is None

    def to_dict(self):
        return {
            "mean_kappa": self.mean_kappa,
            "ci_lo": None if self.ci is None else self.ci.lo,
            "ci_hi": None if self.ci is None else self.ci.hi,
            "count": self.count,
            "excluded_undefined": self.excluded_undefined,
        }


def group_summary(points: Sequence[ScatterPoint], level: float = 0.95) -> dict[str, GroupSummary]:
    """Mean kappa and normal CI per group label.

    Groups with fewer than two defined kappas are returned with ``ci=None``.
    """
    by_group: dict[str, list] = {}
    for p in points:
        by_group.setdefault(p.group, []).append(p.kappa)
    out = {}
    for g in sorted(by_group):
        values = [k for k in by_group[g] if k is not UNDEFINED]
        excluded = len(by_group[g]) - len(values)
        if len(values) < 2:
            mean = values[0] if values else None
            out[g] = GroupSummary(mean, None, len(values), excluded)
            continue
        mean, ci = group_mean_ci(values, level)
        out[g] = GroupSummary(mean, ci, len(values), excluded)
    return out


@dataclass(frozen=True)
class ConfusionMatrix:
    categories: tuple[str, ...]
    counts: np.ndarray  # rows: expected, columns: response
    normalization: str = "none"

    def normalized(self) -> np.ndarray:
        """Row-normalised copy; all-zero rows stay zero."""
        c = self.counts.astype(float)
        totals = c.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(totals > 0, c / np.where(totals == 0, 1, totals), 0.0)
        return out

    @property
    def values(self) -> np.ndarray:
        return self.normalized() if self.normalization == "row" else self.counts

    def to_dict(self):
        vals = self.values
        return {
            "categories": list(self.categories),
            "normalization": self.normalization,
            "matrix": [[fmt(x) if self.normalization == "row" else int(x) for x in row] for row in vals],
        }


def confusion(rows: Sequence[RawTrialRow], observer: ObserverId, normalization: str = "none",
              categories: Sequence[str] | None = None) -> ConfusionMatrix:
    if normalization not in ("none", "row"):
        raise ValueError(f"unknown normalization {normalization!r}")
    mine = [r for r in rows if r.observer_id == observer]
    if not mine:
        raise UnknownObserverError(f"no rows for observer {observer!r}")
    bad = [r for r in mine if r.expected is None or r.response is None]
    if bad:
        raise DataError(f"{bad[0].source}:{bad[0].line}: confusion matrix needs expected and response categories")
    pairs = [(r.expected.strip(), r.response.strip()) for r in mine]
    if categories is None:
        categories = sorted({c for p in pairs for c in p})
    index = {c: k for k, c in enumerate(categories)}
    counts = np.zeros((len(categories), len(categories)), dtype=np.int64)
    for exp, resp in pairs:
        if exp not in index or resp not in index:
            raise DataError(f"category {exp if exp not in index else resp!r} not in the category list")
        counts[index[exp], index[resp]] += 1
    counts.setflags(write=False)
    return ConfusionMatrix(tuple(categories), counts, normalization)


@dataclass(frozen=True)
class AccuracyRow:
    observer: ObserverId
    correct: int
    n: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n


def accuracy_table(outcomes: AlignedOutcomes) -> list[AccuracyRow]:
    return [
        AccuracyRow(o, int(np.count_nonzero(outcomes.outcomes[r])), outcomes.n)
        for r, o in enumerate(outcomes.observers)
    ]


# --- writers -----------------------------------------------------------------

SCATTER_HEADER = ["observer_a", "observer_b", "group", "n", "c_exp", "c_obs", "kappa", "band_lo", "band_hi"]


def scatter_csv(points: Sequence[ScatterPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCATTER_HEADER)
    for p in points:
        lo, hi = (p.band.lo, p.band.hi) if p.band is not None else (None, None)
        w.writerow([p.pair[0], p.pair[1], p.group, p.n, fmt(p.c_exp), fmt(p.c_obs), fmt(p.kappa), fmt(lo), fmt(hi)])
    return buf.getvalue()


def _round_json(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    return obj


def summary_json(summary: Mapping[str, GroupSummary]) -> str:
    data = {g: s.to_dict() for g, s in summary.items()}
    return json.dumps(_round_json(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def accuracy_csv(rows: Sequence[AccuracyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["observer", "correct", "n", "accuracy"])
    for r in rows:
        w.writerow([r.observer, r.correct, r.n, fmt(r.accuracy)])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(_round_json(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_scatter_csv(points, path):
    _write(path, scatter_csv(points))


def write_summary_json(summary, path):
    _write(path, summary_json(summary))


def write_accuracy_csv(rows, path):
    _write(path, accuracy_csv(rows))


# --- percentile tables -------------------------------------------------------

TABLE_HEADER = ["bin_lo", "bin_hi", "stat", "count", "dropped", "q_lo", "q_hi"]


def _full(x):
    return "" if x is None else repr(float(x))


def table_text(table: PercentileTable) -> str:
    buf = io.StringIO()
    meta = {
        "spec": table.spec.to_dict(),
        "n": table.n,
        "bins": table.nbins,
        "min_population": table.min_population,
        "samples": table.samples,
        "degenerate": table.degenerate,
        "kappa_cexp_corr": table.kappa_cexp_corr,
    }
    buf.write(TABLE_MAGIC + "\n")
    for key in sorted(meta):
        buf.write(f"# {key}: {json.dumps(meta[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    digits = max(2, len(str(table.nbins)))
    for k in range(table.nbins):
        lo, hi = Fraction(k, table.nbins), Fraction(k + 1, table.nbins)
        for stat in ("cobs", "kappa"):
            q = table.stat(stat)[k]
            w.writerow([f"{float(lo):.{digits}f}", f"{float(hi):.{digits}f}", stat, q.count, q.dropped,
                        _full(q.q_lo), _full(q.q_hi)])
    return buf.getvalue()


def write_table(table: PercentileTable, path) -> None:
    _write(path, table_text(table))


def parse_table(text: str, source: str = "<table>") -> PercentileTable:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TABLE_MAGIC:
        raise DataError(f"{source}: not a percentile table file")
    meta = {}
    body_start = 1
    for k, line in enumerate(lines[1:], start=1):
        if not line.startswith("# "):
            body_start = k
            break
        key, _, value = line[2:].partition(": ")
        try:
            meta[key] = json.loads(value)
        except json.JSONDecodeError:
            raise DataError(f"{source}:{k + 1}: malformed header line") from None
    try:
        spec = GridSpec.from_dict(meta["spec"])
        nbins = int(meta["bins"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{source}: incomplete table header ({exc})") from None
    reader = csv.reader(lines[body_start:])
    header = next(reader, None)
    if header != TABLE_HEADER:
        raise DataError(f"{source}: unexpected column header {header}")
    stats = {"cobs": [None] * nbins, "kappa": [None] * nbins}
    for line_no, row in enumerate(reader, start=body_start + 2):
        try:
            lo, _, stat, count, dropped, q_lo, q_hi = row
            k = round(float(lo) * nbins)
            stats[stat][k] = BinQuantiles(int(count), int(dropped), float(q_lo) if q_lo else None,
                                          float(q_hi) if q_hi else None)
        except (ValueError, KeyError, IndexError) as exc:
            raise DataError(f"{source}:{line_no}: malformed table row ({exc})") from None
    if any(b is None for v in stats.values() for b in v):
        raise DataError(f"{source}: table is missing bins")
    try:
        return PercentileTable(
            n=int(meta["n"]),
            spec=spec,
            cobs=tuple(stats["cobs"]),
            kappa=tuple(stats["kappa"]),
            min_population=int(meta["min_population"]),
            samples=int(meta["samples"]),
            degenerate=int(meta["degenerate"]),
            kappa_cexp_corr=meta.get("kappa_cexp_corr"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{source}: inconsistent table header ({exc})") from None


def read_table(path) -> PercentileTable:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read(), str(path))
