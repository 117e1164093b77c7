"""Monomials of F2[x_0..x_{n-1}]/(x_i^2 - x_i) and decreasing monomial sets.

A monomial is stored as an exponent bitmask: bit ``t`` set means ``x_t``
divides it.  Evaluation points are indexed ``u = sum_t u_t 2^t`` and ``x_t``
reads bit ``t`` of ``u``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

MAX_VARIABLES = 24


def _check_n(n):
    if not 0 <= n <= MAX_VARIABLES:
        raise ValueError(f"variable count must be in [0, {MAX_VARIABLES}], got {n}")


def _popcount(x):
    return int(x).bit_count()


@dataclass(frozen=True, order=True)
class Monomial:
    mask: int
    n: int

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask} out of range for n={self.n}")

    @property
    def degree(self):
        return _popcount(self.mask)

    @property
    def variables(self):
        return [t for t in range(self.n) if self.mask >> t & 1]

    @classmethod
    def from_variables(cls, variables, n):
        mask = 0
        for t in variables:
            mask |= 1 << t
        return cls(mask, n)

    @classmethod
    def one(cls, n):
        return cls(0, n)

    @classmethod
    def full(cls, n):
        return cls((1 << n) - 1, n)

    def __str__(self):
        if self.mask == 0:
            return "1"
        return "".join(f"x{t}" for t in self.variables)


def _same_n(f, g):
    if f.n != g.n:
        raise ValueError(f"monomials live in different rings: n={f.n} vs n={g.n}")


def monomial_from_channel_index(a, n):
    """Monomial attached to synthetic channel ``a``: exponent bit t is 1 - (bit t of a)."""
    _check_n(n)
    if not 0 <= a < (1 << n):
        raise ValueError(f"channel index {a} out of range [0, {1 << n})")
    return Monomial(((1 << n) - 1) ^ a, n)


def channel_index_of_monomial(m):
    return ((1 << m.n) - 1) ^ m.mask


def _strong_leq_masks(f, g, n):
    # f precedes g iff every suffix x_t..x_{n-1} holds no more of f's variables than g's
    for t in range(n):
        if _popcount(f >> t) > _popcount(g >> t):
            return False
    return True


def strong_leq(f, g):
    """Strong order f <= g (sorted-index domination, extended across degrees by divisibility)."""
    _same_n(f, g)
    return _strong_leq_masks(f.mask, g.mask, f.n)


def weak_leq(f, g):
    """Divisibility order: f divides g."""
    _same_n(f, g)
    return f.mask & g.mask == f.mask


def complement(m):
    return Monomial(((1 << m.n) - 1) ^ m.mask, m.n)


def product(f, g):
    _same_n(f, g)
    return Monomial(f.mask | g.mask, f.n)


def evaluate(m):
    """Evaluation vector of ``m`` over all 2^n points, as a uint8 array."""
    u = np.arange(1 << m.n, dtype=np.int64)
    return ((u & m.mask) == m.mask).astype(np.uint8)


def evaluation_matrix(masks, n):
    """Rows ev(m) for each mask, shape (len(masks), 2^n), uint8."""
    masks = np.asarray(masks, dtype=np.int64).reshape(-1, 1)
    u = np.arange(1 << n, dtype=np.int64)[None, :]
    return ((u & masks) == masks).astype(np.uint8)


class MonomialSet:
    """Immutable set of monomials in ``n`` variables.

    Members are kept as a sorted int64 array of masks plus a dense membership
    array of length 2^n.
    """

    __slots__ = ("n", "masks", "member", "_decreasing")

    def __init__(self, n, masks=(), *, decreasing_verified=False):
        _check_n(n)
        arr = np.unique(np.asarray(list(masks) if not isinstance(masks, np.ndarray) else masks,
                                   dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= (1 << n)):
            raise ValueError(f"mask out of range for n={n}")
        member = np.zeros(1 << n, dtype=np.uint8)
        member[arr] = 1
        arr.setflags(write=False)
        member.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "masks", arr)
        object.__setattr__(self, "member", member)
        object.__setattr__(self, "_decreasing", bool(decreasing_verified))

    def __setattr__(self, name, value):
        raise AttributeError("MonomialSet is immutable")

    @classmethod
    def from_member(cls, member, *, decreasing_verified=False):
        member = np.asarray(member)
        n = int(member.shape[0]).bit_length() - 1
        if member.shape[0] != 1 << n:
            raise ValueError("membership array length must be a power of two")
        return cls(n, np.flatnonzero(member), decreasing_verified=decreasing_verified)

    @classmethod
    def from_monomials(cls, monomials, n):
        monomials = list(monomials)
        for m in monomials:
            if m.n != n:
                raise ValueError(f"monomial {m} has n={m.n}, expected {n}")
        return cls(n, [m.mask for m in monomials])

    @classmethod
    def full(cls, n):
        return cls(n, np.arange(1 << n), decreasing_verified=True)

    @classmethod
    def empty(cls, n):
        return cls(n, (), decreasing_verified=True)

    @property
    def decreasing_verified(self):
        return self._decreasing

    def __len__(self):
        return int(self.masks.shape[0])

    def __iter__(self):
        for m in self.masks:
            yield Monomial(int(m), self.n)

    def __contains__(self, item):
        if isinstance(item, Monomial):
            if item.n != self.n:
                return False
            item = item.mask
        return 0 <= int(item) < (1 << self.n) and bool(self.member[int(item)])

    def __eq__(self, other):
        if not isinstance(other, MonomialSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.masks, other.masks)

    def __hash__(self):
        return hash((self.n, self.masks.tobytes()))

    def __repr__(self):
        shown = ", ".join(str(m) for m in list(self)[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"MonomialSet(n={self.n}, {{{shown}{more}}})"

    def channel_indices(self):
        """Synthetic-channel indices of the members, sorted ascending."""
        return np.sort(((1 << self.n) - 1) ^ self.masks)

    def to_json(self):
        return json.dumps({"n": self.n, "masks": [int(m) for m in self.masks]})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else text
        return cls(int(obj["n"]), obj["masks"])


def decreasing_closure(s):
    """Smallest decreasing superset of ``s``."""
    if s.decreasing_verified:
        return s
    closed = kernels.decreasing_closure(np.ascontiguousarray(s.member), s.n)
    return MonomialSet.from_member(closed, decreasing_verified=True)


def is_decreasing(s):
    if s.decreasing_verified:
        return True
    closed = kernels.decreasing_closure(np.ascontiguousarray(s.member), s.n)
    ok = bool(np.array_equal(closed, s.member))
    if ok:
        object.__setattr__(s, "_decreasing", True)
    return ok


def require_decreasing(s):
    if not is_decreasing(s):
        raise ValueError("monomial set is not decreasing")


def dual_set(s):
    """Monomial set of the dual code: all monomials whose complement is not in ``s``."""
    require_decreasing(s)
    full = (1 << s.n) - 1
    member = 1 - s.member[full ^ np.arange(1 << s.n)]
    return MonomialSet.from_member(member, decreasing_verified=True)


def maximal_elements(s, order="strong"):
    """Antichain of maximal members under the strong order (or divisibility with ``order="weak"``)."""
    masks = s.masks
    if masks.size == 0:
        return MonomialSet.empty(s.n)
    if order == "weak" and not is_decreasing(s):
        ms = [int(m) for m in masks]
        return MonomialSet(s.n, [g for g in ms if not any(h != g and g & h == g for h in ms)])
    if order == "weak":
        # a decreasing set is also divisor-closed, so single-variable covers suffice
        keep = np.ones(masks.shape[0], dtype=bool)
        for t in range(s.n):
            bit = 1 << t
            ext = (masks & bit) == 0
            keep[ext & (s.member[masks | bit] == 1)] = False
        return MonomialSet(s.n, masks[keep])
    if order != "strong":
        raise ValueError(f"unknown order {order!r}")
    if is_decreasing(s):
        # in a decreasing set g is maximal iff none of its upper covers is present
        keep = np.ones(masks.shape[0], dtype=bool)
        for t in range(s.n):
            bit = 1 << t
            ext = (masks & bit) == 0
            keep[ext & (s.member[masks | bit] == 1)] = False
            if t + 1 < s.n:
                nxt = 1 << (t + 1)
                sh = ((masks & bit) != 0) & ((masks & nxt) == 0)
                keep[sh & (s.member[masks ^ bit ^ nxt] == 1)] = False
        return MonomialSet(s.n, masks[keep])
    out = []
    ms = [int(m) for m in masks]
    for g in ms:
        if not any(h != g and _strong_leq_masks(g, h, s.n) for h in ms):
            out.append(g)
    return MonomialSet(s.n, out)


def rm_order_key(masks):
    """Sort key (degree, mask): a linear extension of the strong order."""
    masks = np.asarray(masks, dtype=np.int64)
    return np.bitwise_count(masks).astype(np.int64), masks
