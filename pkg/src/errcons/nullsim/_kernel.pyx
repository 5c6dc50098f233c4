# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernel.

Same algorithm and floating-point operation order as ``_fallback.py``;
all heavy loops run without the GIL so row blocks can be processed on
several threads.
"""
import numpy as np

from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc, realloc

NAME = "cython"
SUM_FIELDS = 5


cdef inline void _philox(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                         uint32_t k0, uint32_t k1, uint32_t* out) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t n0, n2
    cdef int r
    for r in range(10):
        if r:
            k0 = k0 + <uint32_t>0x9E3779B9U
            k1 = k1 + <uint32_t>0xBB67AE85U
        p0 = <uint64_t>0xD2511F53U * <uint64_t>c0
        p1 = <uint64_t>0xCD9E8D57U * <uint64_t>c2
        n0 = (<uint32_t>(p1 >> 32)) ^ c1 ^ k0
        n2 = (<uint32_t>(p0 >> 32)) ^ c3 ^ k1
        c1 = <uint32_t>p1
        c3 = <uint32_t>p0
        c0 = n0
        c2 = n2
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef inline double _unit(uint32_t hi, uint32_t lo) noexcept nogil:
    return (<double>(hi >> 5) * 67108864.0 + <double>(lo >> 6)) * (1.0 / 9007199254740992.0)


cdef inline int64_t _binom_inv(const double* row, int64_t n, double u) noexcept nogil:
    cdef int64_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if u < row[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline int64_t _hyper_inv(const double* mode_table, int64_t n, int64_t k, int64_t d,
                               double u) noexcept nogil:
    cdef int64_t lo = k + d - n
    cdef int64_t hi = k if k < d else d
    cdef int64_t m, up, dn, rest = n - k - d
    cdef double p, pu, pd
    cdef bint moved
    if lo < 0:
        lo = 0
    m = ((k + 1) * (d + 1)) // (n + 2)
    if m < lo:
        m = lo
    if m > hi:
        m = hi
    p = mode_table[k * (n + 1) + d]
    u = u - p
    if u < 0:
        return m
    up = m
    dn = m
    pu = p
    pd = p
    while True:
        moved = False
        if up < hi:
            pu = pu * <double>((k - up) * (d - up)) / <double>((up + 1) * (rest + up + 1))
            up += 1
            u = u - pu
            if u < 0:
                return up
            moved = True
        if dn > lo:
            pd = pd * <double>(dn * (rest + dn)) / <double>((k - dn + 1) * (d - dn + 1))
            dn -= 1
            u = u - pd
            if u < 0:
                return dn
            moved = True
        if not moved:
            return m


cdef inline void _sample(const double* cdf, const double* mode_table, int64_t n,
                         uint32_t s0, uint32_t s1, int64_t i, int64_t j, uint64_t cell,
                         uint32_t rep, int64_t* ki, int64_t* kj, int64_t* e) noexcept nogil:
    cdef uint32_t w[4]
    cdef uint32_t v[4]
    cdef uint32_t lo = <uint32_t>cell
    cdef uint32_t hi = <uint32_t>(cell >> 32)
    cdef int64_t both
    _philox(0, rep, lo, hi, s0, s1, w)
    _philox(1, rep, lo, hi, s0, s1, v)
    ki[0] = _binom_inv(cdf + i * (n + 1), n, _unit(w[0], w[1]))
    kj[0] = _binom_inv(cdf + j * (n + 1), n, _unit(w[2], w[3]))
    both = _hyper_inv(mode_table, n, ki[0], kj[0], _unit(v[0], v[1]))
    e[0] = n - ki[0] - kj[0] + 2 * both


def _check_tables(cdf, mode_table, n):
    if cdf.shape[1] != n + 1 or mode_table.shape != (n + 1, n + 1):
        raise ValueError("table shapes do not match n")


def draw(cdf, mode_table, int64_t n, uint64_t seed, ii, jj, cell_ids, int64_t reps, int64_t rep0=0):
    cdef const double[:, ::1] cdf_v = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[:, ::1] mt_v = np.ascontiguousarray(mode_table, dtype=np.float64)
    _check_tables(np.asarray(cdf), np.asarray(mode_table), n)
    cdef int64_t[::1] ii_v = np.ascontiguousarray(ii, dtype=np.int64)
    cdef int64_t[::1] jj_v = np.ascontiguousarray(jj, dtype=np.int64)
    cdef uint64_t[::1] cell_v = np.ascontiguousarray(cell_ids, dtype=np.uint64)
    cdef int64_t ncell = ii_v.shape[0]
    out_i = np.empty(ncell * reps, dtype=np.int64)
    out_j = np.empty(ncell * reps, dtype=np.int64)
    out_e = np.empty(ncell * reps, dtype=np.int64)
    cdef int64_t[::1] oi = out_i, oj = out_j, oe = out_e
    cdef uint32_t s0 = <uint32_t>seed, s1 = <uint32_t>(seed >> 32)
    cdef int64_t c, r, t
    if jj_v.shape[0] != ncell or cell_v.shape[0] != ncell:
        raise ValueError("ii, jj and cell_ids must have equal length")
    with nogil:
        for c in range(ncell):
            for r in range(reps):
                t = c * reps + r
                _sample(&cdf_v[0, 0], &mt_v[0, 0], n, s0, s1, ii_v[c], jj_v[c], cell_v[c],
                        <uint32_t>(rep0 + r), &oi[t], &oj[t], &oe[t])
    return out_i, out_j, out_e


def histogram_rows(cdf, mode_table, int64_t n, uint64_t seed, int64_t r0, int64_t r1,
                   int64_t reps, int64_t nbins, int64_t nbuckets):
    cdef const double[:, ::1] cdf_v = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[:, ::1] mt_v = np.ascontiguousarray(mode_table, dtype=np.float64)
    _check_tables(np.asarray(cdf), np.asarray(mode_table), n)
    cdef int64_t a = cdf_v.shape[0]
    cobs_hist = np.zeros((nbins, n + 1), dtype=np.int64)
    kappa_hist = np.zeros((nbins, nbuckets), dtype=np.int64)
    degenerate = np.zeros(nbins, dtype=np.int64)
    sums = np.zeros((r1 - r0, SUM_FIELDS), dtype=np.float64)
    cdef int64_t[:, ::1] ch = cobs_hist, kh = kappa_hist
    cdef int64_t[::1] dg = degenerate
    cdef double[:, ::1] sm = sums
    cdef uint32_t s0 = <uint32_t>seed, s1 = <uint32_t>(seed >> 32)
    cdef int64_t row, j, r, ki, kj, e, num, b, bucket
    cdef int64_t n2 = n * n
    cdef double kap, cexp, half = nbuckets * 0.5
    cdef double sk, sc, skk, scc, skc
    with nogil:
        for row in range(r0, r1):
            sk = 0.0
            sc = 0.0
            skk = 0.0
            scc = 0.0
            skc = 0.0
            for j in range(a):
                for r in range(reps):
                    _sample(&cdf_v[0, 0], &mt_v[0, 0], n, s0, s1, row, j, <uint64_t>(row * a + j),
                            <uint32_t>r, &ki, &kj, &e)
                    num = ki * kj + (n - ki) * (n - kj)
                    b = (nbins * num) // n2
                    if b > nbins - 1:
                        b = nbins - 1
                    ch[b, e] += 1
                    if num == n2:
                        dg[b] += 1
                        continue
                    kap = <double>(n * e - num) / <double>(n2 - num)
                    cexp = <double>num / <double>n2
                    bucket = <int64_t>((kap + 1.0) * half)
                    if bucket < 0:
                        bucket = 0
                    elif bucket > nbuckets - 1:
                        bucket = nbuckets - 1
                    kh[b, bucket] += 1
                    sk = sk + kap
                    sc = sc + cexp
                    skk = skk + kap * kap
                    scc = scc + cexp * cexp
                    skc = skc + kap * cexp
            sm[row - r0, 0] = sk
            sm[row - r0, 1] = sc
            sm[row - r0, 2] = skk
            sm[row - r0, 3] = scc
            sm[row - r0, 4] = skc
    return cobs_hist, kappa_hist, degenerate, sums


def collect_rows(cdf, mode_table, int64_t n, uint64_t seed, int64_t r0, int64_t r1,
                 int64_t reps, int64_t nbins, int64_t nbuckets, wanted):
    cdef const double[:, ::1] cdf_v = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[:, ::1] mt_v = np.ascontiguousarray(mode_table, dtype=np.float64)
    _check_tables(np.asarray(cdf), np.asarray(mode_table), n)
    cdef const unsigned char[:, ::1] want = np.ascontiguousarray(wanted, dtype=np.uint8)
    cdef int64_t a = cdf_v.shape[0]
    cdef uint32_t s0 = <uint32_t>seed, s1 = <uint32_t>(seed >> 32)
    cdef int64_t row, j, r, ki, kj, e, num, b, bucket
    cdef int64_t n2 = n * n
    cdef double kap, half = nbuckets * 0.5
    cdef int64_t size = 0, cap = 1024
    cdef int64_t* bins_buf = <int64_t*>malloc(cap * sizeof(int64_t))
    cdef double* vals_buf = <double*>malloc(cap * sizeof(double))
    cdef int64_t* nb
    cdef double* nv
    cdef bint failed = False
    if bins_buf == NULL or vals_buf == NULL:
        free(bins_buf)
        free(vals_buf)
        raise MemoryError()
    with nogil:
        for row in range(r0, r1):
            if failed:
                break
            for j in range(a):
                if failed:
                    break
                for r in range(reps):
                    _sample(&cdf_v[0, 0], &mt_v[0, 0], n, s0, s1, row, j, <uint64_t>(row * a + j),
                            <uint32_t>r, &ki, &kj, &e)
                    num = ki * kj + (n - ki) * (n - kj)
                    if num == n2:
                        continue
                    b = (nbins * num) // n2
                    if b > nbins - 1:
                        b = nbins - 1
                    kap = <double>(n * e - num) / <double>(n2 - num)
                    bucket = <int64_t>((kap + 1.0) * half)
                    if bucket < 0:
                        bucket = 0
                    elif bucket > nbuckets - 1:
                        bucket = nbuckets - 1
                    if not want[b, bucket]:
                        continue
                    if size == cap:
                        cap *= 2
                        nb = <int64_t*>realloc(bins_buf, cap * sizeof(int64_t))
                        if nb == NULL:
                            failed = True
                            break
                        bins_buf = nb
                        nv = <double*>realloc(vals_buf, cap * sizeof(double))
                        if nv == NULL:
                            failed = True
                            break
                        vals_buf = nv
                    bins_buf[size] = b
                    vals_buf[size] = kap
                    size += 1
    if failed:
        free(bins_buf)
        free(vals_buf)
        raise MemoryError()
    out_b = np.empty(size, dtype=np.int64)
    out_v = np.empty(size, dtype=np.float64)
    cdef int64_t[::1] ob = out_b
    cdef double[::1] ov = out_v
    cdef int64_t t
    for t in range(size):
        ob[t] = bins_buf[t]
        ov[t] = vals_buf[t]
    free(bins_buf)
    free(vals_buf)
    return out_b, out_v
