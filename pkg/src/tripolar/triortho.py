"""Triply-even duals of polar codes and the tri-orthogonal codes built from them.

For a decreasing set ``I`` the dual code ``C(I)^perp = C(J)`` with
``J = dual_set(I)`` is triply even exactly when every product ``f*g`` of
members of ``J`` lies in ``I``.  Because ``I`` is down-closed under
divisibility and products only grow under it, checking the pairs of
divisibility-maximal members of ``J`` is enough.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channels import ChannelSpec, capacity
from .gf2 import BitMatrix, nullspace, pack_rows, rref
from .monomials import (
    MonomialSet,
    decreasing_closure,
    dual_set,
    evaluation_matrix,
    maximal_elements,
    require_decreasing,
)
from .polar import PolarCode, table_ref, threshold_of


class PunctureError(ValueError):
    """Punctured columns of the dual generator are linearly dependent."""


class VerificationError(RuntimeError):
    pass


def _pairs_before(m, i, j):
    # pairs (r, s), r <= s, visited by a row-major upper-triangle scan up to (i, j)
    return i * m - i * (i - 1) // 2 + (j - i + 1)


def triply_even_violation(I, full_scan=False):
    """First pair ``(f, g)`` of dual-set members with ``f*g`` outside ``I``, or None.

    Returns ``(pair_or_None, pairs_checked)``.
    """
    require_decreasing(I)
    J = dual_set(I)
    cands = J if full_scan else maximal_elements(J, order="weak")
    masks = np.ascontiguousarray(cands.masks, dtype=np.int64)
    member = np.ascontiguousarray(I.member)
    i, j = kernels.pair_scan(masks, member)
    m = masks.shape[0]
    if i < 0:
        return None, m * (m + 1) // 2
    return (int(masks[i]), int(masks[j])), _pairs_before(m, i, j)


def check_triply_even_dual(I):
    """True iff ``C(I)^perp`` is triply even (pairwise products of the dual set lie in ``I``)."""
    return triply_even_violation(I)[0] is None


def check_triply_even_dual_full(I):
    """Same predicate as :func:`check_triply_even_dual` via the full pairwise scan."""
    return triply_even_violation(I, full_scan=True)[0] is None


@dataclass
class SearchReport:
    channel: ChannelSpec | None
    n: int
    I_size: int
    dual_dim: int
    threshold_log2_eps: float
    capacity_ok: bool
    pairs_checked: int
    elapsed: float
    evaluations: int = 0
    method: str = "binary"

    def as_dict(self):
        d = dict(self.__dict__)
        d["channel"] = None if self.channel is None else {"kind": self.channel.kind,
                                                          "p": self.channel.p}
        return d


def _prefix_set(table, order, s):
    N = table.N
    member = np.zeros(N, dtype=np.uint8)
    member[(N - 1) ^ order[:s]] = 1
    return decreasing_closure(MonomialSet.from_member(member))


def smallest_triply_even_code(table, method="binary", channel=None):
    """Smallest reliability-prefix polar code whose dual is triply even.

    Channels are taken by ascending Z (ties by monomial degree, then mask); each
    prefix is replaced by its decreasing closure before the check.  Closures of
    nested prefixes are nested and the predicate is monotone, so a binary search
    over the prefix length finds the same answer as the linear scan.

    Parameters
    ----------
    table : ReliabilityTable
    method : {"binary", "linear"}
    channel : ChannelSpec, optional
        Channel used for the capacity flag; defaults to ``table.channel``.
    """
    t0 = time.perf_counter()
    order = table.order()
    N = table.N
    pairs = 0
    evals = 0
    cache = {}

    def pred(s):
        nonlocal pairs, evals
        if s not in cache:
            I = _prefix_set(table, order, s)
            bad, cnt = triply_even_violation(I)
            pairs += cnt
            evals += 1
            cache[s] = (bad is None, I)
        return cache[s]

    if method == "binary":
        lo, hi = 0, N
        while lo < hi:
            mid = (lo + hi) // 2
            if pred(mid)[0]:
                hi = mid
            else:
                lo = mid + 1
        s = lo
    elif method == "linear":
        s = next(s for s in range(N + 1) if pred(s)[0])
    else:
        raise ValueError(f"unknown search method {method!r}")
    ok, I = pred(s)
    assert ok
    ch = channel if channel is not None else table.channel
    code = PolarCode(table.n, I, threshold_of(table, I), table_ref(table))
    cap_ok = len(I) / N <= capacity(ch) if ch is not None else True
    report = SearchReport(ch, table.n, len(I), N - len(I), code.threshold_log2_eps,
                          bool(cap_ok), int(pairs), time.perf_counter() - t0, evals, method)
    return code, report


# matrices -------------------------------------------------------------------

def dual_generator(code, chunk=256):
    """Rows ev(m) for m in the dual set of the code's information set, packed."""
    J = dual_set(code.info_set)
    N = code.N
    masks = J.masks
    W = max(1, (N + 63) // 64)
    out = np.zeros((masks.shape[0], W), dtype=np.uint64)
    for s in range(0, masks.shape[0], chunk):
        out[s:s + chunk] = pack_rows(evaluation_matrix(masks[s:s + chunk], code.n))
    return BitMatrix(out, N)


def puncture_systematic(dual_gen, punctures):
    """Systematic form ``[[1_k, H1], [0, H0]]`` with respect to the punctured columns.

    Returns ``(H1, H0)`` with the punctured columns removed.  Rows of ``H1`` are
    checked to have odd weight and rows of ``H0`` even weight.
    """
    P = [int(p) for p in punctures]
    k = len(P)
    if len(set(P)) != k:
        raise ValueError("punctures must be distinct")
    if any(not 0 <= p < dual_gen.ncols for p in P):
        raise ValueError("puncture position out of range")
    # eliminate on the punctured columns only, then reduce the remainder
    work = dual_gen.words.copy()
    piv = kernels.rref_inplace(work, np.array(P, dtype=np.int64))
    if len(piv) < k or list(piv) != P:
        raise PunctureError("punctured columns are not an information set for the dual code")
    top = BitMatrix(work[:k].copy(), dual_gen.ncols)
    rest, _ = rref(BitMatrix(work[k:].copy(), dual_gen.ncols))
    H1 = top.delete_columns(P)
    H0 = rest.delete_columns(P)
    if (H1.row_weights() % 2 != 1).any() or (H0.row_weights() % 2 != 0).any():
        raise ValueError("row parities do not split as odd/even; dual code is not even")
    return H1, H0


def complement_space(H):
    """Rows spanning the orthogonal complement of the row space of ``H``."""
    return nullspace(H)


@dataclass
class TriorthoReport:
    passed: bool
    mode: str
    counterexample: tuple | None = None
    pairs_checked: int = 0
    triples_checked: int = 0

    def __bool__(self):
        return self.passed


def _pair_check(words):
    m = words.shape[0]
    for a in range(m - 1):
        par = np.bitwise_count(words[a] & words[a + 1:]).sum(axis=1) & 1
        hit = np.flatnonzero(par)
        if hit.size:
            return (a, a + 1 + int(hit[0]))
    return None


def _sampled_check(words, trials, seed):
    # random codewords u, v, w of the row space; with tri-orthogonal rows
    # |u*v| = sum_a x_a y_a |h_a| and |u*v*w| = sum_a x_a y_a z_a |h_a| (mod 2)
    m = words.shape[0]
    rng = np.random.default_rng(seed)
    par = (np.bitwise_count(words).sum(axis=1) & 1).astype(np.uint8)
    for t in range(trials):
        co = rng.integers(0, 2, size=(3, m), dtype=np.uint8)
        vec = [np.bitwise_xor.reduce(words[c.astype(bool)], axis=0) if c.any()
               else np.zeros(words.shape[1], dtype=np.uint64) for c in co]
        for (i, j) in ((0, 1), (0, 2), (1, 2)):
            got = int(np.bitwise_count(vec[i] & vec[j]).sum()) & 1
            want = int((co[i] & co[j] & par).sum()) & 1
            if got != want:
                return ("pair", t)
        got = int(np.bitwise_count(vec[0] & vec[1] & vec[2]).sum()) & 1
        want = int((co[0] & co[1] & co[2] & par).sum()) & 1
        if got != want:
            return ("triple", t)
    return None


EXHAUSTIVE_BUDGET = 2e9


def verify_triorthogonal(H, mode="exhaustive", trials=256, seed=0, budget=EXHAUSTIVE_BUDGET):
    """Check that all pairwise and triple row overlaps of ``H`` are even.

    Modes
    -----
    exhaustive
        Every pair and triple of rows.
    sampled
        ``trials`` random triples of codewords of the row space, compared with
        the parities a tri-orthogonal basis would give.  A violating row triple
        is missed by one trial with probability at most 7/8.
    auto
        Exhaustive when ``m^3 / 6 * words`` is within ``budget``, otherwise all
        row pairs exhaustively plus the sampled triple test.
    """
    words = np.ascontiguousarray(H.words)
    m = words.shape[0]
    if mode == "auto":
        cost = m ** 3 / 6.0 * words.shape[1]
        mode = "exhaustive" if cost <= budget else "pairs+sampled"
    npairs = m * (m - 1) // 2
    ntrip = m * (m - 1) * (m - 2) // 6
    if mode == "exhaustive":
        res = kernels.triple_scan(words)
        if res is None:
            return TriorthoReport(True, mode, None, npairs, ntrip)
        a, b, c = res
        ce = (int(a), int(b)) if c < 0 else (int(a), int(b), int(c))
        return TriorthoReport(False, mode, ce)
    if mode in ("sampled", "pairs+sampled"):
        if mode == "pairs+sampled":
            bad = _pair_check(words)
            if bad is not None:
                return TriorthoReport(False, mode, bad, npairs, 0)
        bad = _sampled_check(words, trials, seed)
        if bad is not None:
            return TriorthoReport(False, mode, bad, npairs if mode != "sampled" else 0, trials)
        return TriorthoReport(True, mode, None, npairs if mode != "sampled" else 0, trials)
    raise ValueError(f"unknown mode {mode!r}")


# CSS code ---------------------------------------------------------------------

TRIO_MAGIC = "TRIO1"


@dataclass(eq=False)
class TriorthogonalCode:
    """Punctured polar dual in systematic form.

    ``H1`` rows (odd weight) represent logical operators, ``H0`` rows (even
    weight) X stabilizers, and ``G`` spans the complement of ``[H1; H0]``
    (Z stabilizers).  All matrices have ``N - k`` columns.
    """

    N: int
    k: int
    punctures: list
    H1: BitMatrix
    H0: BitMatrix
    G: BitMatrix
    source: PolarCode | None = None
    verification: TriorthoReport | None = field(default=None)

    @property
    def block_len(self):
        return self.N - self.k

    @property
    def H(self):
        return self.H1.vstack(self.H0)

    @property
    def digest(self):
        h = 0xCBF29CE484222325
        for M in (self.H1, self.H0, self.G):
            data = np.frombuffer(M.packbytes(), dtype=np.uint8)
            h = kernels.fnv1a64(np.ascontiguousarray(data), h)
        return f"{int(h):016x}"

    def header(self):
        return {
            "format": TRIO_MAGIC,
            "N": self.N,
            "k": self.k,
            "block_len": self.block_len,
            "punctures": [int(p) for p in self.punctures],
            "source": None if self.source is None else self.source.descriptor(),
            "shapes": {name: list(getattr(self, name).shape) for name in ("H1", "H0", "G")},
            "digest": self.digest,
        }

    def to_bytes(self):
        head = json.dumps(self.header(), sort_keys=True).encode() + b"\n"
        return head + self.H1.packbytes() + self.H0.packbytes() + self.G.packbytes()

    @classmethod
    def from_bytes(cls, data):
        nl = data.index(b"\n")
        head = json.loads(data[:nl])
        if head.get("format") != TRIO_MAGIC:
            raise ValueError("not a tri-orthogonal code file")
        off = nl + 1
        mats = {}
        for name in ("H1", "H0", "G"):
            r, c = head["shapes"][name]
            size = r * ((c + 7) // 8)
            mats[name] = BitMatrix.frombytes(data[off:off + size], r, c)
            off += size
        if off != len(data):
            raise ValueError("trailing bytes after matrix sections")
        src = head.get("source")
        code = cls(head["N"], head["k"], head["punctures"], mats["H1"], mats["H0"], mats["G"],
                   PolarCode.from_descriptor(src) if src else None)
        if code.digest != head["digest"]:
            raise ValueError("digest mismatch")
        return code

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def default_k(dual_dim):
    return max(1, int(math.floor(0.01 * dual_dim)))


def choose_punctures(rule, N, k, seed=0, explicit=None, attempt=0):
    if rule == "first_k":
        return list(range(k))
    if rule == "explicit":
        if explicit is None or len(explicit) != k:
            raise ValueError("explicit rule needs exactly k positions")
        return [int(p) for p in explicit]
    if rule == "seeded_random":
        rng = np.random.default_rng([seed, attempt])
        return sorted(int(p) for p in rng.choice(N, size=k, replace=False))
    raise ValueError(f"unknown puncture rule {rule!r}")


def build_css(code, k=None, rule="seeded_random", seed=0, punctures=None,
              max_retries=64, verify_mode="auto"):
    """Puncture a polar code with triply-even dual into a tri-orthogonal code.

    Parameters
    ----------
    code : PolarCode
    k : int, optional
        Number of punctures; default ``max(1, floor(0.01 * dual_dim))``.
    rule : {"seeded_random", "first_k", "explicit"}
    seed : int
        Seed for ``seeded_random``; retry ``r`` uses the stream ``(seed, r)``.
    punctures : list of int
        Positions for the ``explicit`` rule.
    verify_mode : str
        Passed to :func:`verify_triorthogonal`.
    """
    if not check_triply_even_dual(code.info_set):
        raise ValueError("dual of the code is not triply even")
    Dg = dual_generator(code)
    dual_dim = Dg.nrows
    if k is None:
        k = len(punctures) if rule == "explicit" and punctures is not None else default_k(dual_dim)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > dual_dim:
        raise ValueError(f"k={k} exceeds dual dimension {dual_dim}")
    tries = max_retries if rule == "seeded_random" else 1
    last = None
    for attempt in range(tries):
        P = choose_punctures(rule, code.N, k, seed, punctures, attempt)
        try:
            H1, H0 = puncture_systematic(Dg, P)
            break
        except PunctureError as exc:
            last = exc
    else:
        raise PunctureError(f"no valid puncture set after {tries} attempt(s)") from last
    H = H1.vstack(H0)
    G = complement_space(H)
    rep = verify_triorthogonal(H, mode=verify_mode, seed=seed)
    if not rep.passed:
        raise VerificationError(f"tri-orthogonality check failed: {rep.counterexample}")
    return TriorthogonalCode(code.N, k, P, H1, H0, G, code, rep)
