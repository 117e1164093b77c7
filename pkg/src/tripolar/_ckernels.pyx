# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every function here has a drop-in twin in :mod:`tripolar._pykernels`; the two
must agree bit-for-bit on integer outputs and to rounding on float outputs.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, log1p, exp2, isinf, tanh, atanh, INFINITY
from libc.stdint cimport int8_t, int64_t, uint8_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cdef double INV_LN2 = 1.4426950408889634
cdef double CORR_LIMIT = 64.0
cdef double HALF_LN2 = 0.34657359027997264
cdef enum:
    ERASED = -1


cdef inline double _boxplus(double a, double b, bint minsum) noexcept nogil:
    # check-node update for base-2 LLRs: 2 atanh(tanh(a/2) tanh(b/2)) in log form
    cdef double aa = fabs(a)
    cdef double bb = fabs(b)
    cdef double m = aa if aa < bb else bb
    cdef double r, d, x
    if minsum or (isinf(aa) and isinf(bb)):
        r = m
    else:
        # log2(1 + 2^-s) - log2(1 + 2^-d) with s = d + 2m, folded into one log1p;
        # corrections below 2^-64 are dropped in both backends
        d = fabs(aa - bb)
        r = m
        if m < 1.0:
            # the folded form cancels for small inputs; tanh form keeps relative accuracy
            r = 2.0 * atanh(tanh(aa * HALF_LN2) * tanh(bb * HALF_LN2)) * INV_LN2
        elif d < CORR_LIMIT:
            x = exp2(-d)
            r += log1p(x * (exp2(-2.0 * m) - 1.0) / (1.0 + x)) * INV_LN2
        if r < 0.0:
            r = 0.0
    if (a < 0.0) != (b < 0.0):
        return -r
    return r


cdef inline double _clip(double v, double cap) noexcept nogil:
    if isinf(v):
        return v
    if v > cap:
        return cap
    if v < -cap:
        return -cap
    return v


cdef void _butterfly(double* x, Py_ssize_t N, double cap) noexcept nogil:
    cdef Py_ssize_t s = N, h, o, i
    cdef double a, c
    while s >= 2:
        h = s // 2
        o = 0
        while o < N:
            for i in range(h):
                a = x[o + i]
                c = x[o + h + i]
                x[o + i] = _boxplus(a, c, False)
                x[o + h + i] = _clip(a + c, cap)
            o += s
        s = h


def genie_llr_butterfly(double[:, ::1] llr, double cap):
    """All-zero genie-aided SC: overwrite each row with the N synthetic-channel LLRs."""
    cdef Py_ssize_t B = llr.shape[0], N = llr.shape[1], b
    if N == 0:
        return
    for b in prange(B, nogil=True, schedule="static"):
        _butterfly(&llr[b, 0], N, cap)



cdef void _tilt(double* g, Py_ssize_t N) noexcept nogil:
    cdef Py_ssize_t s = N, h, o, i
    cdef double a, c, m
    while s >= 2:
        h = s // 2
        o = 0
        while o < N:
            for i in range(h):
                a = g[o + i]
                c = g[o + h + i]
                m = a if a > c else c
                g[o + i] = m + log1p(exp2(-fabs(a - c))) * INV_LN2 - 1.0
                g[o + h + i] = a + c
            o += s
        s = h


def tilt_butterfly(double[:, ::1] g):
    """Per-channel log2 likelihood ratios of the tree-shaped proposals.

    Leaves hold log2 of the per-position ratio (uniform noise / nominal noise).
    A minus step averages the two halves, a plus step multiplies them.
    """
    cdef Py_ssize_t B = g.shape[0], N = g.shape[1], b
    if N == 0:
        return
    for b in prange(B, nogil=True, schedule="static"):
        _tilt(&g[b, 0], N)

cdef void _sc_llr(const double* L, Py_ssize_t n_len, const uint8_t* frozen,
                  uint8_t* u, uint8_t* x, double* work, double cap,
                  bint minsum) noexcept nogil:
    cdef Py_ssize_t h, i
    if n_len == 1:
        if frozen[0] or not (L[0] < 0.0):
            u[0] = 0
        else:
            u[0] = 1
        x[0] = u[0]
        return
    h = n_len // 2
    for i in range(h):
        work[i] = _boxplus(L[i], L[i + h], minsum)
    _sc_llr(work, h, frozen, u, x, work + h, cap, minsum)
    for i in range(h):
        if x[i]:
            work[i] = _clip(L[i + h] - L[i], cap)
        else:
            work[i] = _clip(L[i + h] + L[i], cap)
    _sc_llr(work, h, frozen + h, u + h, x + h, work + h, cap, minsum)
    for i in range(h):
        x[i] ^= x[i + h]


def sc_decode_llr_batch(double[:, ::1] llr, const uint8_t[::1] frozen,
                        double cap, bint minsum=False):
    """SC decoding of each row; returns (u_hat, x_hat) as uint8 arrays."""
    cdef Py_ssize_t B = llr.shape[0], N = llr.shape[1], b
    u_arr = np.zeros((B, N), dtype=np.uint8)
    x_arr = np.zeros((B, N), dtype=np.uint8)
    work_arr = np.empty((B, max(N, 1)), dtype=np.float64)
    cdef uint8_t[:, ::1] u = u_arr
    cdef uint8_t[:, ::1] x = x_arr
    cdef double[:, ::1] work = work_arr
    if N == 0:
        return u_arr, x_arr
    for b in prange(B, nogil=True, schedule="static"):
        _sc_llr(&llr[b, 0], N, &frozen[0], &u[b, 0], &x[b, 0], &work[b, 0], cap, minsum)
    return u_arr, x_arr


cdef void _sc_erasure(const int8_t* y, Py_ssize_t n_len, const uint8_t* frozen,
                      uint8_t* u, uint8_t* und, uint8_t* x, int8_t* work) noexcept nogil:
    cdef Py_ssize_t h, i
    cdef int8_t a, c
    if n_len == 1:
        und[0] = 0
        if frozen[0]:
            u[0] = 0
        elif y[0] == ERASED:
            u[0] = 0
            und[0] = 1
        else:
            u[0] = <uint8_t>y[0]
        x[0] = u[0]
        return
    h = n_len // 2
    for i in range(h):
        a = y[i]
        c = y[i + h]
        if a == ERASED or c == ERASED:
            work[i] = ERASED
        else:
            work[i] = a ^ c
    _sc_erasure(work, h, frozen, u, und, x, work + h)
    for i in range(h):
        c = y[i + h]
        if c != ERASED:
            work[i] = c
        elif y[i] != ERASED:
            work[i] = y[i] ^ <int8_t>x[i]
        else:
            work[i] = ERASED
    _sc_erasure(work, h, frozen + h, u + h, und + h, x + h, work + h)
    for i in range(h):
        x[i] ^= x[i + h]


def sc_decode_erasure_batch(const int8_t[:, ::1] y, const uint8_t[::1] frozen):
    """Ternary SC decoding of each row; returns (u_hat, undecided, x_hat)."""
    cdef Py_ssize_t B = y.shape[0], N = y.shape[1], b
    u_arr = np.zeros((B, N), dtype=np.uint8)
    und_arr = np.zeros((B, N), dtype=np.uint8)
    x_arr = np.zeros((B, N), dtype=np.uint8)
    work_arr = np.empty((B, max(N, 1)), dtype=np.int8)
    cdef uint8_t[:, ::1] u = u_arr
    cdef uint8_t[:, ::1] und = und_arr
    cdef uint8_t[:, ::1] x = x_arr
    cdef int8_t[:, ::1] work = work_arr
    if N == 0:
        return u_arr, und_arr, x_arr
    for b in prange(B, nogil=True, schedule="static"):
        _sc_erasure(&y[b, 0], N, &frozen[0], &u[b, 0], &und[b, 0], &x[b, 0], &work[b, 0])
    return u_arr, und_arr, x_arr


def decreasing_closure(const uint8_t[::1] member, int n):
    """Down-closure under the strong order, one pass in (degree desc, mask desc) order."""
    cdef Py_ssize_t N = member.shape[0]
    cdef int64_t m, up
    cdef int d, i
    cdef uint8_t hit
    out_arr = np.array(member, dtype=np.uint8, copy=True)
    cdef uint8_t[::1] out = out_arr
    with nogil:
        for d in range(n, -1, -1):
            for m in range(N - 1, -1, -1):
                if __builtin_popcountll(<unsigned long long>m) != d or out[m]:
                    continue
                hit = 0
                for i in range(n):
                    if not (m >> i) & 1:
                        if out[m | (<int64_t>1 << i)]:
                            hit = 1
                            break
                    elif i + 1 < n and not (m >> (i + 1)) & 1:
                        up = m ^ (<int64_t>1 << i) ^ (<int64_t>1 << (i + 1))
                        if out[up]:
                            hit = 1
                            break
                out[m] = hit
    return out_arr


def pair_scan(const int64_t[::1] cands, const uint8_t[::1] member):
    """First (i, j), i <= j, with cands[i] | cands[j] outside ``member``; (-1, -1) if none."""
    cdef Py_ssize_t m = cands.shape[0], i, j
    cdef int64_t a
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for i in range(m):
            a = cands[i]
            for j in range(i, m):
                if not member[a | cands[j]]:
                    bi = i
                    bj = j
                    break
            if bi >= 0:
                break
    return bi, bj


def triple_scan(const uint64_t[:, ::1] rows):
    """First odd pair overlap (a, b, -1) or odd triple overlap (a, b, c); None if all even."""
    cdef Py_ssize_t m = rows.shape[0], W = rows.shape[1], a, b, c, w
    cdef int par
    cdef Py_ssize_t ra = -1, rb = -1, rc = -1
    tmp_arr = np.empty(max(W, 1), dtype=np.uint64)
    cdef uint64_t[::1] tmp = tmp_arr
    with nogil:
        for a in range(m):
            for b in range(a + 1, m):
                par = 0
                for w in range(W):
                    tmp[w] = rows[a, w] & rows[b, w]
                    par ^= __builtin_popcountll(tmp[w]) & 1
                if par:
                    ra = a
                    rb = b
                    break
                for c in range(b + 1, m):
                    par = 0
                    for w in range(W):
                        par ^= __builtin_popcountll(tmp[w] & rows[c, w]) & 1
                    if par:
                        ra = a
                        rb = b
                        rc = c
                        break
                if ra >= 0:
                    break
            if ra >= 0:
                break
    if ra < 0:
        return None
    return (ra, rb, rc)


def fnv1a64(const uint8_t[::1] data, uint64_t state=0xcbf29ce484222325):
    cdef Py_ssize_t i, L = data.shape[0]
    cdef uint64_t h = state
    with nogil:
        for i in range(L):
            h ^= data[i]
            h *= <uint64_t>0x100000001b3
    return h


def rref_inplace(uint64_t[:, ::1] M, const int64_t[::1] col_order):
    """Gauss-Jordan elimination of packed rows, pivoting on columns in ``col_order``.

    Returns the pivot column of each of the first ``rank`` rows.
    """
    cdef Py_ssize_t m = M.shape[0], W = M.shape[1], L = col_order.shape[0]
    cdef Py_ssize_t rank = 0, t, r, i, w, wc
    cdef int64_t c
    cdef uint64_t bit, tmp
    piv_arr = np.empty(min(m, L), dtype=np.int64)
    cdef int64_t[::1] piv = piv_arr
    with nogil:
        for t in range(L):
            if rank == m:
                break
            c = col_order[t]
            wc = c >> 6
            bit = (<uint64_t>1) << (c & 63)
            r = rank
            while r < m and not (M[r, wc] & bit):
                r += 1
            if r == m:
                continue
            if r != rank:
                for w in range(W):
                    tmp = M[r, w]
                    M[r, w] = M[rank, w]
                    M[rank, w] = tmp
            for i in range(m):
                if i != rank and (M[i, wc] & bit):
                    for w in range(W):
                        M[i, w] ^= M[rank, w]
            piv[rank] = c
            rank += 1
    return piv_arr[:rank].copy()
