"""Philox4x32-10 counter-based generator, vectorised over counters.

Each sample draws from its own counter block ``(block, rep, cell_lo,
cell_hi)`` under the key ``(seed_lo, seed_hi)``, so any sample can be
regenerated independently of every other one.
"""
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
ROUNDS = 10


def split_seed(seed: int) -> tuple[int, int]:
    return seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF


def philox4x32(c0, c1, c2, c3, k0: int, k1: int):
    """Apply Philox4x32-10 to arrays of counter words.

    Counter words may be any integer arrays (broadcast together) holding
    values below 2**32. Returns four uint64 arrays of 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in np.broadcast_arrays(c0, c1, c2, c3))
    for r in range(ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = (p1 >> _SHIFT) ^ c1 ^ np.uint64(k0)
        n2 = (p0 >> _SHIFT) ^ c3 ^ np.uint64(k1)
        c1 = p1 & _MASK
        c3 = p0 & _MASK
        c0, c2 = n0, n2
    return c0, c1, c2, c3


def to_unit(hi, lo):
    """53-bit uniform double in [0, 1) from two 32-bit words."""
    a = (np.asarray(hi, dtype=np.uint64) >> np.uint64(5)).astype(np.float64)
    b = (np.asarray(lo, dtype=np.uint64) >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0)


def sample_uniforms(seed: int, cell_ids, reps):
    """The three uniforms consumed by one count-level sample.

    ``cell_ids`` and ``reps`` broadcast together; returns ``(u_i, u_j, u_h)``.
    """
    k0, k1 = split_seed(seed)
    cell_ids = np.asarray(cell_ids, dtype=np.uint64)
    reps = np.asarray(reps, dtype=np.uint64)
    lo = cell_ids & _MASK
    hi = cell_ids >> _SHIFT
    w0, w1, w2, w3 = philox4x32(0, reps, lo, hi, k0, k1)
    v0, v1, _, _ = philox4x32(1, reps, lo, hi, k0, k1)
    return to_unit(w0, w1), to_unit(w2, w3), to_unit(v0, v1)
