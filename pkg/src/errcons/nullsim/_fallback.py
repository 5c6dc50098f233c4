"""Pure numpy sampling backend.

Mirrors ``_kernel.pyx`` operation for operation; the two must stay
bit-identical (checked in tests/test_kernel.py).

Per sample (cell ``c`` = grid row ``i``, column ``j``; repetition ``r``):

1. three uniforms from Philox blocks 0 and 1 of counter ``(., r, c)``;
2. correct counts ``k_i``, ``k_j`` by inverse-CDF search in the binomial
   tables of axis points ``i`` and ``j``;
3. the both-correct count by inverse-CDF search of Hypergeometric(n, k_i,
   k_j), walking outward from the mode (up step, then down step);
4. ``e = n - k_i - k_j + 2 * both``.
"""
import numpy as np

from ._philox import sample_uniforms

NAME = "numpy"
SUM_FIELDS = 5  # kappa, c_exp, kappa^2, c_exp^2, kappa*c_exp


def binom_inverse(cdf_rows, u):
    """Smallest k with ``u < cdf_rows[k]`` (row per sample)."""
    m = u.shape[0]
    lo = np.zeros(m, dtype=np.int64)
    hi = np.full(m, cdf_rows.shape[1] - 1, dtype=np.int64)
    idx = np.arange(m)
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) >> 1
        go_left = active & (u < cdf_rows[idx, mid])
        go_right = active & ~go_left
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_right, mid + 1, lo)


def hypergeom_inverse(n, k, d, u, mode_table):
    k = np.asarray(k, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    u = np.array(u, dtype=np.float64, copy=True)
    lo = np.maximum(0, k + d - n)
    hi = np.minimum(k, d)
    m = np.clip(((k + 1) * (d + 1)) // (n + 2), lo, hi)
    p = mode_table[k, d]
    u = u - p
    result = m.copy()
    done = u < 0
    up = m.copy()
    dn = m.copy()
    pu = p.copy()
    pd = p.copy()
    rest = n - k - d
    while not done.all():
        moved = np.zeros_like(done)

        s = ~done & (up < hi)
        if s.any():
            x = up[s]
            num = ((k[s] - x) * (d[s] - x)).astype(np.float64)
            den = ((x + 1) * (rest[s] + x + 1)).astype(np.float64)
            pu[s] = pu[s] * num / den
            up[s] = x + 1
            u[s] = u[s] - pu[s]
            hit = s.copy()
            hit[s] = u[s] < 0
            result[hit] = up[hit]
            done |= hit
            moved |= s

        s = ~done & (dn > lo)
        if s.any():
            x = dn[s]
            num = (x * (rest[s] + x)).astype(np.float64)
            den = ((k[s] - x + 1) * (d[s] - x + 1)).astype(np.float64)
            pd[s] = pd[s] * num / den
            dn[s] = x - 1
            u[s] = u[s] - pd[s]
            hit = s.copy()
            hit[s] = u[s] < 0
            result[hit] = dn[hit]
            done |= hit
            moved |= s

        # support exhausted with rounding residue left over
        stuck = ~done & ~moved
        result[stuck] = m[stuck]
        done |= stuck
    return result


def draw(cdf, mode_table, n, seed, ii, jj, cell_ids, reps, rep0=0):
    """Raw ``(k_i, k_j, e)`` for every (cell, rep); sample ``c * reps + r``."""
    ii = np.asarray(ii, dtype=np.int64)
    jj = np.asarray(jj, dtype=np.int64)
    cell_ids = np.asarray(cell_ids, dtype=np.uint64)
    r = np.arange(rep0, rep0 + reps, dtype=np.uint64)
    u_i, u_j, u_h = sample_uniforms(seed, cell_ids[:, None], r[None, :])
    rows_i = np.repeat(ii, reps)
    rows_j = np.repeat(jj, reps)
    k_i = binom_inverse(cdf[rows_i], u_i.ravel())
    k_j = binom_inverse(cdf[rows_j], u_j.ravel())
    both = hypergeom_inverse(n, k_i, k_j, u_h.ravel(), mode_table)
    e = n - k_i - k_j + 2 * both
    return k_i, k_j, e


def sample_stats(n, k_i, k_j, e, nbins, nbuckets):
    """Bin index, degeneracy flag, kappa, c_exp and kappa bucket per sample."""
    n2 = n * n
    num = k_i * k_j + (n - k_i) * (n - k_j)
    b = np.minimum((nbins * num) // n2, nbins - 1)
    degenerate = num == n2
    ok = ~degenerate
    kap = (n * e[ok] - num[ok]).astype(np.float64) / (n2 - num[ok]).astype(np.float64)
    cexp = num[ok].astype(np.float64) / float(n2)
    bucket = ((kap + 1.0) * (nbuckets * 0.5)).astype(np.int64)
    np.clip(bucket, 0, nbuckets - 1, out=bucket)
    return b, degenerate, kap, cexp, bucket


def _seqsum(x):
    # left-to-right, matching the compiled loop
    return float(np.add.accumulate(x)[-1]) if x.size else 0.0


def histogram_rows(cdf, mode_table, n, seed, r0, r1, reps, nbins, nbuckets):
    a = cdf.shape[0]
    cobs_hist = np.zeros((nbins, n + 1), dtype=np.int64)
    kappa_hist = np.zeros((nbins, nbuckets), dtype=np.int64)
    degenerate = np.zeros(nbins, dtype=np.int64)
    sums = np.zeros((r1 - r0, SUM_FIELDS), dtype=np.float64)
    jj = np.arange(a, dtype=np.int64)
    for row in range(r0, r1):
        ii = np.full(a, row, dtype=np.int64)
        cells = row * a + jj
        k_i, k_j, e = draw(cdf, mode_table, n, seed, ii, jj, cells, reps)
        b, deg, kap, cexp, bucket = sample_stats(n, k_i, k_j, e, nbins, nbuckets)
        np.add.at(cobs_hist, (b, e), 1)
        degenerate += np.bincount(b[deg], minlength=nbins)
        bk = b[~deg]
        np.add.at(kappa_hist, (bk, bucket), 1)
        sums[row - r0] = (
            _seqsum(kap),
            _seqsum(cexp),
            _seqsum(kap * kap),
            _seqsum(cexp * cexp),
            _seqsum(kap * cexp),
        )
    return cobs_hist, kappa_hist, degenerate, sums


def collect_rows(cdf, mode_table, n, seed, r0, r1, reps, nbins, nbuckets, wanted):
    """Kappa values (with their bins) that fall in ``wanted[bin, bucket]``."""
    a = cdf.shape[0]
    jj = np.arange(a, dtype=np.int64)
    out_b, out_v = [], []
    for row in range(r0, r1):
        ii = np.full(a, row, dtype=np.int64)
        k_i, k_j, e = draw(cdf, mode_table, n, seed, ii, jj, row * a + jj, reps)
        b, deg, kap, _, bucket = sample_stats(n, k_i, k_j, e, nbins, nbuckets)
        bk = b[~deg]
        sel = wanted[bk, bucket].astype(bool)
        out_b.append(bk[sel])
        out_v.append(kap[sel])
    if not out_b:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64)
    return np.concatenate(out_b), np.concatenate(out_v)
