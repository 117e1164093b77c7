"""Pure numpy fallbacks for the compiled kernels in ``_ckernels.pyx``.

Same names, same signatures, same results.  Used when the extension is not
built or when ``TRIPOLAR_PURE_PYTHON=1``.
"""

import numpy as np

ERASED = -1
_INV_LN2 = 1.4426950408889634
CORR_LIMIT = 64.0
_HALF_LN2 = 0.34657359027997264


def _boxplus(a, b, minsum=False):
    aa = np.abs(a)
    bb = np.abs(b)
    m = np.minimum(aa, bb)
    if minsum:
        r = m
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.abs(aa - bb)
            x = np.exp2(-d)
            corr = np.log1p(x * (np.exp2(-2.0 * m) - 1.0) / (1.0 + x)) * _INV_LN2
            r = m + np.where(d < CORR_LIMIT, corr, 0.0)
            # the folded form cancels for small inputs; tanh form keeps relative accuracy
            small = 2.0 * np.arctanh(np.tanh(aa * _HALF_LN2) * np.tanh(bb * _HALF_LN2)) * _INV_LN2
            r = np.where(m < 1.0, small, r)
        both_inf = np.isinf(aa) & np.isinf(bb)
        r = np.where(both_inf, m, np.maximum(r, 0.0))
    neg = (a < 0.0) != (b < 0.0)
    return np.where(neg, -r, r)


def _clip(v, cap):
    fin = np.isfinite(v)
    return np.where(fin, np.clip(v, -cap, cap), v)


def genie_llr_butterfly(llr, cap):
    B, N = llr.shape
    s = N
    while s >= 2:
        h = s // 2
        view = llr.reshape(B, N // s, 2, h)
        a = view[:, :, 0, :].copy()
        c = view[:, :, 1, :]
        view[:, :, 0, :] = _boxplus(a, c)
        view[:, :, 1, :] = _clip(a + c, cap)
        s = h



def tilt_butterfly(g):
    B, N = g.shape
    s = N
    while s >= 2:
        h = s // 2
        view = g.reshape(B, N // s, 2, h)
        a = view[:, :, 0, :].copy()
        c = view[:, :, 1, :]
        view[:, :, 0, :] = np.maximum(a, c) + np.log1p(np.exp2(-np.abs(a - c))) * _INV_LN2 - 1.0
        view[:, :, 1, :] = a + c
        s = h

def _sc_llr(L, frozen, cap, minsum):
    # L: (B, n_len); returns (u, x) with the same shape
    B, n_len = L.shape
    if n_len == 1:
        if frozen[0]:
            u = np.zeros((B, 1), dtype=np.uint8)
        else:
            u = (L < 0.0).astype(np.uint8)
        return u, u.copy()
    h = n_len // 2
    left = _boxplus(L[:, :h], L[:, h:], minsum)
    u1, x1 = _sc_llr(left, frozen[:h], cap, minsum)
    right = _clip(L[:, h:] + np.where(x1 == 1, -L[:, :h], L[:, :h]), cap)
    u2, x2 = _sc_llr(right, frozen[h:], cap, minsum)
    return np.concatenate([u1, u2], axis=1), np.concatenate([x1 ^ x2, x2], axis=1)


def sc_decode_llr_batch(llr, frozen, cap, minsum=False):
    llr = np.asarray(llr, dtype=np.float64)
    B, N = llr.shape
    if N == 0:
        return np.zeros((B, 0), np.uint8), np.zeros((B, 0), np.uint8)
    u, x = _sc_llr(llr, np.asarray(frozen, dtype=np.uint8), cap, minsum)
    return np.ascontiguousarray(u), np.ascontiguousarray(x)


def _sc_erasure(y, frozen):
    B, n_len = y.shape
    if n_len == 1:
        if frozen[0]:
            z = np.zeros((B, 1), dtype=np.uint8)
            return z, z.copy(), z.copy()
        und = (y == ERASED).astype(np.uint8)
        u = np.where(und == 1, 0, y).astype(np.uint8)
        return u, und, u.copy()
    h = n_len // 2
    a, c = y[:, :h], y[:, h:]
    left = np.where((a == ERASED) | (c == ERASED), ERASED, a ^ c).astype(np.int8)
    u1, d1, x1 = _sc_erasure(left, frozen[:h])
    via_a = np.where(a == ERASED, ERASED, a ^ x1.astype(np.int8))
    right = np.where(c != ERASED, c, via_a).astype(np.int8)
    u2, d2, x2 = _sc_erasure(right, frozen[h:])
    return (
        np.concatenate([u1, u2], axis=1),
        np.concatenate([d1, d2], axis=1),
        np.concatenate([x1 ^ x2, x2], axis=1),
    )


def sc_decode_erasure_batch(y, frozen):
    y = np.asarray(y, dtype=np.int8)
    B, N = y.shape
    if N == 0:
        z = np.zeros((B, 0), np.uint8)
        return z, z.copy(), z.copy()
    u, und, x = _sc_erasure(y, np.asarray(frozen, dtype=np.uint8))
    return np.ascontiguousarray(u), np.ascontiguousarray(und), np.ascontiguousarray(x)


def decreasing_closure(member, n):
    out = np.array(member, dtype=np.uint8, copy=True)
    N = out.shape[0]
    idx = np.arange(N, dtype=np.int64)
    lacking = [idx[(idx >> i) & 1 == 0] for i in range(n)]
    shiftable = [
        idx[((idx >> i) & 1 == 1) & ((idx >> (i + 1)) & 1 == 0)] for i in range(n - 1)
    ]
    # fixed point of "member if some upper cover is a member"
    while True:
        before = int(out.sum())
        for i in range(n):
            m = lacking[i]
            out[m] |= out[m | (1 << i)]
            if i + 1 < n:
                m = shiftable[i]
                out[m] |= out[m ^ (1 << i) ^ (1 << (i + 1))]
        if int(out.sum()) == before:
            return out


def pair_scan(cands, member):
    cands = np.asarray(cands, dtype=np.int64)
    member = np.asarray(member, dtype=np.uint8)
    for i in range(cands.shape[0]):
        bad = np.flatnonzero(member[cands[i] | cands[i:]] == 0)
        if bad.size:
            return i, i + int(bad[0])
    return -1, -1


def triple_scan(rows):
    rows = np.asarray(rows, dtype=np.uint64)
    m = rows.shape[0]
    for a in range(m):
        for b in range(a + 1, m):
            t = rows[a] & rows[b]
            if int(np.bitwise_count(t).sum()) & 1:
                return (a, b, -1)
            if b + 1 < m:
                par = np.bitwise_count(rows[b + 1:] & t).sum(axis=1) & 1
                hit = np.flatnonzero(par)
                if hit.size:
                    return (a, b, b + 1 + int(hit[0]))
    return None


def fnv1a64(data, state=0xCBF29CE484222325):
    h = state
    for byte in bytes(data):
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def rref_inplace(M, col_order):
    m = M.shape[0]
    rank = 0
    piv = []
    for c in np.asarray(col_order, dtype=np.int64):
        if rank == m:
            break
        wc = int(c) >> 6
        bit = np.uint64(1 << (int(c) & 63))
        hits = np.flatnonzero(M[rank:, wc] & bit)
        if hits.size == 0:
            continue
        r = rank + int(hits[0])
        if r != rank:
            M[[rank, r]] = M[[r, rank]]
        sel = (M[:, wc] & bit) != 0
        sel[rank] = False
        M[sel] ^= M[rank]
        piv.append(int(c))
        rank += 1
    return np.array(piv, dtype=np.int64)
