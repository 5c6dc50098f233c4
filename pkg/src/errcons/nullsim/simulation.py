"""Monte Carlo null distribution of c_obs and kappa for independent observers.

Two independent binomial observers are simulated on every cell of an
accuracy grid. Their estimated accuracies give ``c_exp``; samples are binned
by that estimate and each bin's type-7 quantiles of ``c_obs`` and kappa form
the percentile band.

Quantiles are exact but never hold all samples in memory. A first pass
histograms ``c_obs`` by exact count and kappa into fine buckets; a second
pass regenerates the (counter-based, hence reproducible) samples and keeps
only the kappa values in buckets that contain a wanted order statistic.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..consistency import expected_overlap, kappa
from ..core import UNDEFINED, BinQuantiles, GridSpec, Interval, Kappa, PercentileTable, bin_index
from ..errors import DomainError, EmptyInputError, InvariantViolation, SpecError
from . import backend as _backend
from ._tables import binomial_cdf_table, hypergeom_mode_table

log = logging.getLogger(__name__)

NBINS = 100
MIN_POPULATION = 1000
NBUCKETS = 4096
BLOCK_SAMPLES = 1 << 20


def build_grid(spec: GridSpec) -> np.ndarray:
    """Accuracy values along one grid axis, sorted ascending.

    ``spec.tail_points`` values are spaced evenly over each tail (ends
    included) and the rest evenly over the open middle interval. Grids with
    fewer than 10 points are uniform on [0, 1].
    """
    a = spec.axis_points
    if a == 1:
        return np.array([0.5])
    if a < 10:
        return np.linspace(0.0, 1.0, a)
    t, w = spec.tail_points, spec.tail_width
    lower = np.linspace(0.0, w, t) if t else np.empty(0)
    upper = np.linspace(1.0 - w, 1.0, t) if t else np.empty(0)
    if t:
        middle = np.linspace(w, 1.0 - w, spec.middle_points + 2)[1:-1]
    else:
        middle = np.linspace(0.0, 1.0, spec.middle_points)
    return np.concatenate([lower, middle, upper])


def quantile_type7(sorted_values, p: float) -> float:
    """Linear-interpolation sample quantile (R's default, type 7).

    ``sorted_values`` must be ascending.
    """
    m = len(sorted_values)
    if m == 0:
        raise EmptyInputError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p!r} outside [0, 1]")
    j, g = _type7_position(m, p)
    return _interpolate(float(sorted_values[j]), float(sorted_values[min(j + 1, m - 1)]), g)


def _type7_position(m, p):
    h = (m - 1) * p
    j = min(int(math.floor(h)), m - 1)
    return j, h - j


def _interpolate(lo, hi, g):
    if g == 0.0:
        return lo
    return lo + g * (hi - lo)


@dataclass(frozen=True)
class CounterStream:
    """Identifies one independent random substream: (seed, cell, repetition)."""

    seed: int
    cell: int = 0
    rep: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64 or not 0 <= self.cell < 2**64 or not 0 <= self.rep < 2**32:
            raise ValueError("stream coordinates out of range")

    def generator(self) -> np.random.Generator:
        # per-trial path: numpy's Philox4x64 keyed by all three coordinates
        key = self.seed | (self.cell % 2**32) << 64 | self.rep << 96
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SimulatedSample:
    p_i_true: float
    p_j_true: float
    p_i_hat: float
    p_j_hat: float
    c_exp_hat: float
    c_obs_hat: float
    kappa_hat: Kappa


def _check_probability(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"accuracy {p!r} outside [0, 1]")
    return p


def _draw_counts(p_i, p_j, n, seed, cell, rep0, reps, kern):
    cdf = binomial_cdf_table([p_i, p_j], n)
    return kern.draw(cdf, hypergeom_mode_table(n), n, seed, [0], [1], [cell], reps, rep0)


def _draw_trials(p_i, p_j, n, rng, size, batch=2000):
    k_i = np.empty(size, dtype=np.int64)
    k_j = np.empty(size, dtype=np.int64)
    e = np.empty(size, dtype=np.int64)
    for start in range(0, size, batch):
        stop = min(size, start + batch)
        a = rng.random((stop - start, n)) < p_i
        b = rng.random((stop - start, n)) < p_j
        k_i[start:stop] = a.sum(axis=1)
        k_j[start:stop] = b.sum(axis=1)
        e[start:stop] = (a == b).sum(axis=1)
    return k_i, k_j, e


def simulate_pair(p_i: float, p_j: float, n: int, stream: CounterStream, method: str = "counts",
                  backend=None) -> SimulatedSample:
    """One simulated experiment of ``n`` trials for two independent observers.

    ``method="counts"`` samples correct counts and their overlap directly
    (binomial, then hypergeometric); ``method="trials"`` draws every trial.
    Chance agreement is computed from the estimated accuracies.
    """
    p_i = _check_probability(p_i)
    p_j = _check_probability(p_j)
    if n < 1:
        raise DomainError(f"trial count must be positive, got {n}")
    if method == "counts":
        k_i, k_j, e = _draw_counts(p_i, p_j, n, stream.seed, stream.cell, stream.rep, 1, _backend.get(backend))
    elif method == "trials":
        k_i, k_j, e = _draw_trials(p_i, p_j, n, stream.generator(), 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    k_i, k_j, e = int(k_i[0]), int(k_j[0]), int(e[0])
    ph_i, ph_j = k_i / n, k_j / n
    c_exp = expected_overlap(ph_i, ph_j)
    c_obs = e / n
    degenerate = k_i == k_j and k_i in (0, n)
    return SimulatedSample(p_i, p_j, ph_i, ph_j, c_exp, c_obs, UNDEFINED if degenerate else kappa(c_obs, c_exp))


@dataclass(frozen=True)
class SampleBatch:
    """Many simulated experiments as count arrays."""

    n: int
    k_i: np.ndarray
    k_j: np.ndarray
    e: np.ndarray

    @property
    def size(self) -> int:
        return self.e.size

    @property
    def agreement_numerator(self) -> np.ndarray:
        n = self.n
        return self.k_i * self.k_j + (n - self.k_i) * (n - self.k_j)

    @property
    def c_exp(self) -> np.ndarray:
        return self.agreement_numerator / float(self.n * self.n)

    @property
    def c_obs(self) -> np.ndarray:
        return self.e / float(self.n)

    @property
    def degenerate(self) -> np.ndarray:
        return self.agreement_numerator == self.n * self.n

    def bins(self, nbins: int = NBINS) -> np.ndarray:
        return np.minimum((nbins * self.agreement_numerator) // (self.n * self.n), nbins - 1)

    def kappa_defined(self) -> tuple[np.ndarray, np.ndarray]:
        """``(kappa, mask)``: kappa for the non-degenerate samples selected by ``mask``."""
        mask = ~self.degenerate
        num = self.agreement_numerator[mask]
        n = self.n
        return (n * self.e[mask] - num) / (n * n - num).astype(np.float64), mask


def simulate_many(p_i: float, p_j: float, n: int, size: int, seed: int, method: str = "counts",
                  backend=None, cell: int = 0) -> SampleBatch:
    """``size`` independent experiments for one accuracy pair."""
    p_i = _check_probability(p_i)
    p_j = _check_probability(p_j)
    if method == "counts":
        k_i, k_j, e = _draw_counts(p_i, p_j, n, seed, cell, 0, size, _backend.get(backend))
    elif method == "trials":
        k_i, k_j, e = _draw_trials(p_i, p_j, n, CounterStream(seed, cell).generator(), size)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SampleBatch(n, k_i, k_j, e)


def grid_samples(spec: GridSpec, backend=None) -> SampleBatch:
    """Every sample of a (small) grid simulation, in (cell, rep) order."""
    kern = _backend.get(backend)
    axis = build_grid(spec)
    a = axis.size
    cdf = binomial_cdf_table(axis, spec.n_trials)
    ii = np.repeat(np.arange(a), a)
    jj = np.tile(np.arange(a), a)
    k_i, k_j, e = kern.draw(cdf, hypergeom_mode_table(spec.n_trials), spec.n_trials, spec.seed,
                            ii, jj, (ii * a + jj).astype(np.uint64), spec.reps_per_cell)
    return SampleBatch(spec.n_trials, k_i, k_j, e)


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get("ERRCONS_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _row_blocks(a, reps, block_samples):
    rows = max(1, block_samples // (a * reps))
    return [(r0, min(a, r0 + rows)) for r0 in range(0, a, rows)]


def _map(fn, items, workers):
    if workers == 1 or len(items) == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rank_index(cum, ranks):
    """Index of the histogram cell holding each 0-based rank."""
    return np.searchsorted(cum, ranks, side="right")


def _cobs_quantiles(hist_row, n, qpair, min_population):
    m = int(hist_row.sum())
    if m < min_population:
        return BinQuantiles(m, 0, None, None)
    cum = np.cumsum(hist_row)
    out = []
    for p in qpair:
        j, g = _type7_position(m, p)
        lo_e, hi_e = _rank_index(cum, [j, min(j + 1, m - 1)])
        out.append(_interpolate(int(lo_e) / n, int(hi_e) / n, g))
    return BinQuantiles(m, 0, out[0], out[1])


def _kappa_targets(kappa_hist, qpair, min_population):
    """Wanted-bucket mask plus, per populated bin, the ranks and buckets to read."""
    nbins, nbuckets = kappa_hist.shape
    wanted = np.zeros((nbins, nbuckets), dtype=np.uint8)
    plans = {}
    for b in range(nbins):
        m = int(kappa_hist[b].sum())
        if m < min_population:
            continue
        cum = np.cumsum(kappa_hist[b])
        plan = []
        for p in qpair:
            j, g = _type7_position(m, p)
            ranks = (j, min(j + 1, m - 1))
            buckets = _rank_index(cum, list(ranks))
            for bk in buckets:
                wanted[b, bk] = 1
            plan.append((g, ranks, tuple(int(x) for x in buckets)))
        plans[b] = (cum, plan)
    return wanted, plans


def run_simulation(spec: GridSpec, *, workers=None, backend=None, nbins: int = NBINS,
                   min_population: int = MIN_POPULATION, nbuckets: int = NBUCKETS,
                   block_samples: int = BLOCK_SAMPLES) -> PercentileTable:
    """Simulate the null grid and reduce it to a binned percentile table.

    The result depends only on ``spec`` (and the binning arguments), never
    on ``workers`` or on which backend ran the samples.
    """
    if nbins < 1 or nbuckets < 2 or min_population < 1:
        raise SpecError("nbins, nbuckets and min_population must be positive")
    kern = _backend.get(backend)
    workers = resolve_workers(workers)
    n = spec.n_trials
    axis = build_grid(spec)
    a = axis.size
    cdf = binomial_cdf_table(axis, n)
    mode_table = hypergeom_mode_table(n)
    reps = spec.reps_per_cell
    blocks = _row_blocks(a, reps, block_samples)
    log.info("simulating %d samples on %d blocks with %d workers (%s)", spec.total_samples, len(blocks),
             workers, kern.NAME)

    def first(block):
        return kern.histogram_rows(cdf, mode_table, n, spec.seed, block[0], block[1], reps, nbins, nbuckets)

    cobs_hist = np.zeros((nbins, n + 1), dtype=np.int64)
    kappa_hist = np.zeros((nbins, nbuckets), dtype=np.int64)
    degenerate = np.zeros(nbins, dtype=np.int64)
    row_sums = []
    for ch, kh, dg, sums in _map(first, blocks, workers):
        cobs_hist += ch
        kappa_hist += kh
        degenerate += dg
        row_sums.append(sums)
    row_sums = np.concatenate(row_sums)

    cobs = [_cobs_quantiles(cobs_hist[b], n, spec.quantile_pair, min_population) for b in range(nbins)]

    wanted, plans = _kappa_targets(kappa_hist, spec.quantile_pair, min_population)
    collected = {}
    if plans:
        def second(block):
            return kern.collect_rows(cdf, mode_table, n, spec.seed, block[0], block[1], reps, nbins, nbuckets,
                                     wanted)

        parts = _map(second, blocks, workers)
        bins_all = np.concatenate([p[0] for p in parts])
        vals_all = np.concatenate([p[1] for p in parts])
        order = np.lexsort((vals_all, bins_all))
        bins_all, vals_all = bins_all[order], vals_all[order]
        collected = {b: vals_all[bins_all == b] for b in plans}

    kap = []
    for b in range(nbins):
        m = int(kappa_hist[b].sum())
        if b not in plans:
            kap.append(BinQuantiles(m, int(degenerate[b]), None, None))
            continue
        kap.append(_kappa_bin_quantiles(b, m, int(degenerate[b]), plans[b], kappa_hist[b], collected[b], nbuckets))

    total_defined = int(kappa_hist.sum())
    corr = _correlation(total_defined, row_sums)
    return PercentileTable(
        n=n,
        spec=spec,
        cobs=tuple(cobs),
        kappa=tuple(kap),
        min_population=min_population,
        samples=int(cobs_hist.sum()),
        degenerate=int(degenerate.sum()),
        kappa_cexp_corr=corr,
    )


def _kappa_bin_quantiles(b, m, dropped, plan_entry, hist_row, values, nbuckets):
    cum, plan = plan_entry
    half = nbuckets * 0.5
    buckets_of = np.clip(((values + 1.0) * half).astype(np.int64), 0, nbuckets - 1)
    out = []
    for g, ranks, buckets in plan:
        xs = []
        for rank, bk in zip(ranks, buckets):
            start = int(cum[bk - 1]) if bk > 0 else 0
            in_bucket = values[buckets_of == bk]  # already sorted
            if in_bucket.size != hist_row[bk]:
                raise InvariantViolation(f"bin {b}: second pass found {in_bucket.size} values, expected {hist_row[bk]}")
            xs.append(float(in_bucket[rank - start]))
        out.append(_interpolate(xs[0], xs[1], g))
    return BinQuantiles(m, dropped, out[0], out[1])


def _correlation(count, row_sums):
    if count < 2:
        return None
    sk, sc, skk, scc, skc = (math.fsum(row_sums[:, f]) for f in range(5))
    num = count * skc - sk * sc
    den = math.sqrt(max(0.0, count * skk - sk * sk)) * math.sqrt(max(0.0, count * scc - sc * sc))
    if den == 0.0:
        return None
    return num / den


def band_lookup(table: PercentileTable, c_exp, stat: str = "kappa") -> Interval | None:
    """Quantile band of the bin containing ``c_exp``; None for an empty bin.

    ``c_exp`` may be a float or an exact ``fractions.Fraction``.
    """
    k = bin_index(c_exp, table.nbins)
    q = table.stat(stat)[k]
    if q.empty:
        return None
    return Interval(q.q_lo, q.q_hi)


def cache_key(spec: GridSpec, nbins: int = NBINS, min_population: int = MIN_POPULATION) -> str:
    payload = json.dumps({"spec": spec.to_dict(), "nbins": nbins, "min_population": min_population},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def cached_table(spec: GridSpec, cache_dir, *, nbins: int = NBINS, min_population: int = MIN_POPULATION,
                 **kwargs) -> PercentileTable:
    """Load the table for ``spec`` from ``cache_dir`` or simulate and store it."""
    from ..report import read_table, write_table

    path = Path(cache_dir) / f"table-n{spec.n_trials}-{cache_key(spec, nbins, min_population)}.csv"
    if path.exists():
        table = read_table(path)
        if table.spec == spec and table.nbins == nbins and table.min_population == min_population:
            return table
        log.warning("cache entry %s does not match the request; recomputing", path)
    table = run_simulation(spec, nbins=nbins, min_population=min_population, **kwargs)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_table(table, path)
    return table
