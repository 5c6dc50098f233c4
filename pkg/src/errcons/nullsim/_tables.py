"""Lookup tables shared by the compiled kernel and the numpy fallback.

Both backends read the same arrays, which is what lets them produce
bit-identical samples.
"""
from functools import lru_cache

import numpy as np
from scipy import special, stats


def binomial_cdf_table(probs, n: int) -> np.ndarray:
    """Row ``r`` holds ``P(X <= k)`` for ``X ~ Binomial(n, probs[r])``, k = 0..n.

    The last column is forced to exactly 1 so inverse-CDF search always
    terminates inside the support.
    """
    p = np.asarray(probs, dtype=np.float64).reshape(-1, 1)
    k = np.arange(n + 1, dtype=np.float64).reshape(1, -1)
    pmf = stats.binom.pmf(k, n, p)
    cdf = np.cumsum(pmf, axis=1)
    np.minimum(cdf, 1.0, out=cdf)
    np.maximum.accumulate(cdf, axis=1, out=cdf)
    cdf[:, -1] = 1.0
    return np.ascontiguousarray(cdf)


def hypergeom_mode(n: int, k, d):
    """Mode of the overlap count for ``k`` and ``d`` successes among ``n`` trials."""
    lo = np.maximum(0, k + d - n)
    hi = np.minimum(k, d)
    m = ((k + 1) * (d + 1)) // (n + 2)
    return np.clip(m, lo, hi)


def _log_choose(a, b):
    return special.gammaln(a + 1.0) - special.gammaln(b + 1.0) - special.gammaln(a - b + 1.0)


@lru_cache(maxsize=4)
def hypergeom_mode_table(n: int) -> np.ndarray:
    """``table[k, d]`` is the probability of the mode of Hypergeometric(n, k, d).

    Sampling walks outward from the mode using exact pmf ratios, so only
    this one probability per ``(k, d)`` needs transcendental functions.
    """
    k = np.arange(n + 1, dtype=np.int64).reshape(-1, 1)
    d = np.arange(n + 1, dtype=np.int64).reshape(1, -1)
    m = hypergeom_mode(n, k, d)
    # log-gamma form; scipy.stats.hypergeom.pmf agrees to ~1e-11 but is ~80x slower at n = 1280
    table = np.exp(_log_choose(k, m) + _log_choose(n - k, d - m) - _log_choose(n, d))
    table = np.ascontiguousarray(table, dtype=np.float64)
    table.setflags(write=False)
    return table
