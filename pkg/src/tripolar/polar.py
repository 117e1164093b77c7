"""Polar encoder, successive cancellation decoders and code construction.

Conventions: ``x = F^{(x)n} u`` with ``F = [[1, 1], [0, 1]]`` in natural
(non bit-reversed) order, so ``x_i = sum of u_j over j whose bits contain i``.
Information bit ``a`` is carried by the monomial ``monomial_from_channel_index(a)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channels import LLR_CAP
from .monomials import (
    MonomialSet,
    decreasing_closure,
    is_decreasing,
    maximal_elements,
)

ERASED = -1


def _check_len(N):
    n = int(N).bit_length() - 1
    if N < 1 or (1 << n) != N:
        raise ValueError(f"length must be a power of two, got {N}")
    return n


def encode(u):
    """Apply ``F^{(x)n}`` over GF(2) to the last axis of ``u``."""
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    n = _check_len(N)
    lead = x.shape[:-1]
    flat = x.reshape(-1, N)
    for t in range(n):
        h = 1 << t
        view = flat.reshape(flat.shape[0], N // (2 * h), 2, h)
        view[:, :, 0, :] ^= view[:, :, 1, :]
    return flat.reshape(*lead, N)


@dataclass(frozen=True, eq=False)
class PolarCode:
    """Polar code given by its information set as a decreasing monomial set.

    Attributes
    ----------
    n : int
    info_set : MonomialSet
    threshold_log2_eps : float
        log2 of the largest Z over information channels of the design table.
    table_ref : dict
        Description of the reliability table the code came from.
    """

    n: int
    info_set: MonomialSet
    threshold_log2_eps: float = -math.inf
    table_ref: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.info_set.n != self.n:
            raise ValueError("info set lives in a different ring")
        if not is_decreasing(self.info_set):
            raise ValueError("information set must be decreasing")

    @property
    def N(self):
        return 1 << self.n

    @property
    def K(self):
        return len(self.info_set)

    @property
    def rate(self):
        return self.K / self.N

    @property
    def info_indices(self):
        return self.info_set.channel_indices()

    @property
    def frozen(self):
        """uint8 mask over channel indices, 1 where the bit is frozen to 0."""
        fr = np.ones(self.N, dtype=np.uint8)
        fr[self.info_indices] = 0
        return fr

    def descriptor(self):
        return {
            "n": self.n,
            "info_set": [int(m) for m in self.info_set.masks],
            "threshold_log2_eps": _json_float(self.threshold_log2_eps),
            "table_ref": self.table_ref,
        }

    def to_json(self):
        return json.dumps(self.descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, obj):
        n = int(obj["n"])
        return cls(n, MonomialSet(n, obj["info_set"]),
                   _float_from_json(obj["threshold_log2_eps"]), dict(obj.get("table_ref", {})))

    @classmethod
    def from_json(cls, text):
        return cls.from_descriptor(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, PolarCode):
            return NotImplemented
        return (self.n == other.n and self.info_set == other.info_set
                and self.threshold_log2_eps == other.threshold_log2_eps)

    def __hash__(self):
        return hash((self.n, self.info_set))


def _json_float(v):
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return float(v)


def _float_from_json(v):
    return float(v)


def _as_batch(arr, N, dtype):
    a = np.ascontiguousarray(arr, dtype=dtype)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.shape[-1] != N:
        raise ValueError(f"expected length {N}, got {a.shape[-1]}")
    return np.ascontiguousarray(a), single


def sc_decode_erasure_batch(y, code):
    """Ternary SC decoding of rows of ``y`` (0, 1 or -1 for erasure).

    Returns ``(u_hat, undecided, x_hat)`` as uint8 arrays of shape (B, N);
    undecided bits are set to 0 in ``u_hat``.
    """
    y, _ = _as_batch(y, code.N, np.int8)
    if ((y < -1) | (y > 1)).any():
        raise ValueError("erasure-channel symbols must be 0, 1 or -1")
    return kernels.sc_decode_erasure_batch(y, code.frozen)


def sc_decode_erasure(y, code):
    """Decode one received word with erasures.

    Returns
    -------
    u_hat : ndarray of uint8
    undecided : ndarray of int64
        Information indices whose synthetic channel was erased.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("expected a single word; use sc_decode_erasure_batch")
    u, und, _ = sc_decode_erasure_batch(y, code)
    return u[0], np.flatnonzero(und[0]).astype(np.int64)


def sc_decode_llr_batch(llr, code, minsum=False):
    """SC decoding of rows of base-2 channel LLRs; returns ``(u_hat, x_hat)``."""
    llr, _ = _as_batch(llr, code.N, np.float64)
    if np.isnan(llr).any():
        raise ValueError("NaN in channel LLRs")
    return kernels.sc_decode_llr_batch(llr, code.frozen, LLR_CAP, bool(minsum))


def sc_decode_llr(llr, code, minsum=False):
    llr = np.asarray(llr)
    if llr.ndim != 1:
        raise ValueError("expected a single word; use sc_decode_llr_batch")
    return sc_decode_llr_batch(llr, code, minsum)[0][0]


# construction ------------------------------------------------------------------

def _worst_key(table, mask, n):
    a = ((1 << n) - 1) ^ mask
    return (table.log2_z[a], bin(mask).count("1"), mask)


def trim_to_size(s, K, table):
    """Drop maximal elements with the worst Z until ``|s| = K``; keeps ``s`` decreasing."""
    member = np.array(s.member, copy=True)
    size = int(member.sum())
    while size > K:
        cur = MonomialSet.from_member(member, decreasing_verified=True)
        tops = maximal_elements(cur)
        worst = max((int(m) for m in tops.masks), key=lambda m: _worst_key(table, m, s.n))
        member[worst] = 0
        size -= 1
    return MonomialSet.from_member(member, decreasing_verified=True)


def info_set_from_prefix(table, K, order=None):
    """Decreasing set from the ``K`` most reliable channels (closure, then trim)."""
    if order is None:
        order = table.order()
    N = table.N
    member = np.zeros(N, dtype=np.uint8)
    member[(N - 1) ^ order[:K]] = 1
    closed = decreasing_closure(MonomialSet.from_member(member))
    if len(closed) > K:
        closed = trim_to_size(closed, K, table)
    return closed


def threshold_of(table, info_set):
    if len(info_set) == 0:
        return -math.inf
    idx = info_set.channel_indices()
    return float(table.log2_z[idx].max())


def table_ref(table):
    return {"method": table.method, "p": table.p, "n": table.n,
            "samples": int(table.samples), "seed": int(table.seed)}


def construct_code(table, K=None, rate=None, eps=None):
    """Polar code from a reliability table.

    Exactly one of ``K`` (dimension), ``rate`` (K = round(rate * N)) or
    ``eps`` (all channels with Z <= eps) must be given.
    """
    given = [v is not None for v in (K, rate, eps)]
    if sum(given) != 1:
        raise ValueError("give exactly one of K, rate, eps")
    N = table.N
    if rate is not None:
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"rate must be in [0, 1], got {rate}")
        K = int(round(rate * N))
    elif eps is not None:
        if eps < 0:
            raise ValueError("eps must be non-negative")
        lim = math.log2(eps) if eps > 0 else -math.inf
        K = int((table.log2_z <= lim).sum())
    K = int(K)
    if not 0 <= K <= N:
        raise ValueError(f"dimension {K} infeasible for N={N}")
    info = info_set_from_prefix(table, K)
    return PolarCode(table.n, info, threshold_of(table, info), table_ref(table))
