"""Binary erasure and binary symmetric channels and their synthetic channels.

Reliabilities are Bhattacharyya parameters ``Z = sum_y sqrt(W(y|0) W(y|1))``
kept as ``log2 Z`` so that values like 2^-90 stay ordered.  Synthetic channel
``a`` of a length-2^n polar transform applies the minus (bit 0) or plus
(bit 1) transform for each bit of ``a`` from most to least significant.
"""

from __future__ import annotations

import io
import logging
import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

ERASURE = "erasure"
BSC = "binary_symmetric"
_ALIASES = {"erasure": ERASURE, "bec": ERASURE, "binary_symmetric": BSC, "bsc": BSC,
            "dephasing": BSC}

LLR_CAP = 4096.0
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelSpec:
    kind: str
    p: float

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        p = float(self.p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {p}")
        if kind == BSC and p > 0.5:
            raise ValueError(f"binary symmetric crossover must be <= 1/2, got {p}")
        object.__setattr__(self, "p", p)

    @property
    def short(self):
        return "bec" if self.kind == ERASURE else "bsc"

    def __str__(self):
        return f"{self.short.upper()}({self.p:g})"


def bec(p):
    return ChannelSpec(ERASURE, p)


def bsc(p):
    return ChannelSpec(BSC, p)


def h2(p):
    """Binary entropy in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def bhattacharyya(ch):
    """Unhalved Bhattacharyya parameter: 0 for a perfect channel, 1 for a useless one."""
    if ch.kind == ERASURE:
        return ch.p
    return 2.0 * math.sqrt(ch.p * (1.0 - ch.p))


def capacity(ch):
    if ch.kind == ERASURE:
        return 1.0 - ch.p
    return 1.0 - h2(ch.p)


def compose_erasure(p, q):
    """Erasure probability of two erasure channels in series."""
    for v in (p, q):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"probability out of range: {v}")
    return p + q * (1.0 - p)


def compose_bsc(a, b):
    """Crossover probability of two binary symmetric channels in series."""
    for v in (a, b):
        if not 0.0 <= v <= 0.5:
            raise ValueError(f"crossover out of range [0, 1/2]: {v}")
    return a + b - 2.0 * a * b


def degrade_erasure_to_bsc(p):
    """BSC(p/2): an erasure channel replaced by a coin flip on erasure."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    return bsc(p / 2.0)


def markov_puncture_bound(eps, eps0):
    """Probability bound ``eps / eps0`` that a random puncture pattern gives error above ``eps0``."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if eps0 < eps:
        raise ValueError(f"eps0={eps0} below eps={eps}: bound would exceed 1")
    return eps / eps0


def channel_llr(ch, y):
    """Base-2 channel LLRs for received symbols.

    ``y`` holds 0/1 for a BSC and 0/1/-1 (erasure) for a BEC.
    """
    y = np.asarray(y)
    if ch.kind == ERASURE:
        out = np.where(y == 0, np.inf, -np.inf)
        return np.where(y < 0, 0.0, out)
    if ch.p == 0.0:
        mag = np.inf
    elif ch.p == 0.5:
        mag = 0.0
    else:
        mag = math.log2((1.0 - ch.p) / ch.p)
    return np.where(y == 0, mag, -mag)


# reliability tables -------------------------------------------------------

EXACT_BEC = "exact_bec"
MONTE_CARLO_BSC = "monte_carlo_bsc"
MONTE_CARLO_BSC_PLAIN = "monte_carlo_bsc_plain"
_MC_METHODS = (MONTE_CARLO_BSC, MONTE_CARLO_BSC_PLAIN)
UNIFORM = "uniform"
_METHOD_CODES = {EXACT_BEC: 0, MONTE_CARLO_BSC: 1, UNIFORM: 2, MONTE_CARLO_BSC_PLAIN: 3}
_METHOD_NAMES = {v: k for k, v in _METHOD_CODES.items()}

PRT1_MAGIC = b"PRT1"
_PRT1_HEAD = struct.Struct("<4sBBxxQqd")


class TableFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReliabilityTable:
    """Per-synthetic-channel ``log2 Z`` for one channel and block exponent.

    Attributes
    ----------
    n : int
    log2_z : ndarray, shape (2**n,)
    method : str
        ``"exact_bec"``, ``"monte_carlo_bsc"`` (importance sampled),
        ``"monte_carlo_bsc_plain"`` or ``"uniform"``.
    p : float
        Design channel parameter.
    samples, seed : int
        Monte Carlo settings, 0 for exact tables.
    log2_stderr : ndarray or None
        log2 of the standard error of each Monte Carlo estimate.
    """

    n: int
    log2_z: np.ndarray
    method: str
    p: float
    samples: int = 0
    seed: int = 0
    log2_stderr: np.ndarray | None = field(default=None)

    def __post_init__(self):
        z = np.ascontiguousarray(self.log2_z, dtype=np.float64)
        if z.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} entries, got {z.shape}")
        if np.isnan(z).any() or (z > 0).any():
            raise ValueError("log2 Z values must be <= 0 and not NaN")
        if self.method not in _METHOD_CODES:
            raise ValueError(f"unknown method {self.method!r}")
        z.setflags(write=False)
        object.__setattr__(self, "log2_z", z)
        if self.log2_stderr is not None:
            s = np.ascontiguousarray(self.log2_stderr, dtype=np.float64)
            s.setflags(write=False)
            object.__setattr__(self, "log2_stderr", s)

    @property
    def N(self):
        return 1 << self.n

    @property
    def channel(self):
        return bsc(self.p) if self.method in _MC_METHODS else bec(self.p)

    @property
    def z(self):
        return np.exp2(self.log2_z)

    @property
    def stderr(self):
        if self.log2_stderr is None:
            return np.zeros(self.N)
        return np.exp2(self.log2_stderr)

    def __eq__(self, other):
        if not isinstance(other, ReliabilityTable):
            return NotImplemented
        same_err = (self.log2_stderr is None) == (other.log2_stderr is None)
        if same_err and self.log2_stderr is not None:
            same_err = self.log2_stderr.tobytes() == other.log2_stderr.tobytes()
        return (self.n == other.n and self.method == other.method
                and self.p == other.p and self.samples == other.samples
                and self.seed == other.seed and same_err
                and self.log2_z.tobytes() == other.log2_z.tobytes())

    def order(self):
        """Channel indices by ascending Z, ties by (monomial degree, monomial mask)."""
        full = self.N - 1
        masks = full ^ np.arange(self.N, dtype=np.int64)
        deg = np.bitwise_count(masks)
        return np.lexsort((masks, deg, self.log2_z))

    # binary format
    def to_bytes(self):
        head = _PRT1_HEAD.pack(PRT1_MAGIC, self.n, _METHOD_CODES[self.method],
                               int(self.samples), int(self.seed), float(self.p))
        body = self.log2_z.astype("<f8").tobytes()
        if self.method in _MC_METHODS:
            err = self.log2_stderr if self.log2_stderr is not None else np.full(self.N, -np.inf)
            body += np.asarray(err, dtype="<f8").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _PRT1_HEAD.size:
            raise TableFormatError("truncated header")
        magic, n, code, samples, seed, p = _PRT1_HEAD.unpack_from(data)
        if magic != PRT1_MAGIC:
            raise TableFormatError(f"bad magic {magic!r}")
        if code not in _METHOD_NAMES or n > 30:
            raise TableFormatError("bad header fields")
        method = _METHOD_NAMES[code]
        N = 1 << n
        blocks = 2 if method in _MC_METHODS else 1
        if len(data) != _PRT1_HEAD.size + 8 * N * blocks:
            raise TableFormatError("payload size does not match header")
        off = _PRT1_HEAD.size
        z = np.frombuffer(data, dtype="<f8", count=N, offset=off).astype(np.float64)
        err = None
        if blocks == 2:
            err = np.frombuffer(data, dtype="<f8", count=N, offset=off + 8 * N).astype(np.float64)
        try:
            return cls(n, z, method, p, samples, seed, err)
        except ValueError as exc:
            raise TableFormatError(str(exc)) from exc

    def save(self, path):
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(self.to_bytes())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())

    # CSV
    def to_csv(self):
        buf = io.StringIO()
        buf.write("index,log2_z,stderr\n")
        err = self.stderr
        for a in range(self.N):
            buf.write(f"{a},{float(self.log2_z[a])!r},{float(err[a])!r}\n")
        return buf.getvalue()


def bec_reliabilities(p, n):
    """Exact ``log2 Z`` of all synthetic channels of BEC(p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if not 0 <= n <= 24:
        raise ValueError(f"n must be in [0, 24], got {n}")
    with np.errstate(divide="ignore"):
        lz = np.array([math.log2(p) if p > 0 else -np.inf])
    for _ in range(n):
        # log2(2z - z^2) = l + 1 + log2(1 - z/2); log2(z^2) = 2l
        with np.errstate(divide="ignore"):
            minus = lz + 1.0 + np.log1p(-np.exp2(lz - 1.0)) / _LN2
        minus = np.minimum(minus, 0.0)
        plus = 2.0 * lz
        lz = np.stack([minus, plus], axis=1).reshape(-1)
    return ReliabilityTable(n, lz, EXACT_BEC, float(p))


def uniform_table(n, log2_z=-1.0):
    """All channels equally reliable; the search order falls back to (degree, mask)."""
    return ReliabilityTable(n, np.full(1 << n, float(log2_z)), UNIFORM, float(2.0 ** log2_z))


# Monte Carlo ----------------------------------------------------------------

BLOCK_BATCHES = 16


def batch_size(n):
    """Trials per RNG batch; a fixed function of n so results do not depend on workers."""
    return max(1, (1 << 20) >> n)


def _log2_sech_sample(llr):
    # E[2^(-lam/2) | |lam|] for a symmetric channel; always in (0, 1]
    a = np.abs(llr)
    with np.errstate(over="ignore", invalid="ignore"):
        out = 1.0 - a / 2.0 - np.log1p(np.exp2(-a)) / _LN2
    return np.where(np.isinf(a), -np.inf, out)


def _merge(acc, m, s1, s2):
    if acc is None:
        return m, s1, s2
    M, S1, S2 = acc
    newM = np.maximum(M, m)
    finite = np.isfinite(newM)
    with np.errstate(invalid="ignore"):
        fa = np.where(finite & np.isfinite(M), np.exp2(M - newM), 0.0)
        fb = np.where(finite & np.isfinite(m), np.exp2(m - newM), 0.0)
    return newM, S1 * fa + s1 * fb, S2 * fa * fa + s2 * fb * fb


DEFENSIVE = 0.5


def tilted_positions(comp, bits, n):
    """Positions made uniformly random by the proposal aimed at channel ``comp``.

    The proposal walks the decoding tree from the root (bit 0 of the channel
    index) to the leaves.  At a plus step both subtrees are kept; at a minus
    step one subtree is chosen by a random bit, independently for every node.
    ``bits[..., 2**t + prefix]`` is the choice at level ``t`` for the subtree
    reached through the lower position bits ``prefix``.

    Parameters
    ----------
    comp : ndarray of int, shape (B,)
    bits : ndarray of 0/1, shape (B, 2**n)
    n : int

    Returns
    -------
    ndarray of bool, shape (B, 2**n)
    """
    N = 1 << n
    idx = np.arange(N, dtype=np.int64)
    comp = np.asarray(comp, dtype=np.int64)
    out = np.ones((comp.shape[0], N), dtype=bool)
    for t in range(n):
        node = (1 << t) + (idx & ((1 << t) - 1))
        match = bits[:, node] == ((idx >> t) & 1)[None, :]
        plus = ((comp >> t) & 1).astype(bool)[:, None]
        out &= plus | match
    return out


def _tree_proposal(rng, p, n, count, K):
    """Draw noise from the tree-shaped importance mixture.

    With probability ``DEFENSIVE`` a trial uses the nominal BSC(p).  Otherwise
    a channel is picked uniformly and the positions returned by
    :func:`tilted_positions` are made uniformly random: the zero-variance tilt
    along plus steps and half of it along minus steps.  Returns the flips and
    ``log2`` of the mixture-to-nominal likelihood ratio of each trial.
    """
    N = 1 << n
    comp = rng.integers(0, N, count)
    nominal = rng.random(count) < DEFENSIVE
    bits = rng.integers(0, 2, (count, N), dtype=np.int64)
    tilted = tilted_positions(comp, bits, n) & ~nominal[:, None]
    u = rng.random((count, N))
    flips = np.where(tilted, u < 0.5, u < p)
    g = np.where(flips, -1.0 - math.log2(p), -1.0 - math.log2(1.0 - p))
    g = np.ascontiguousarray(g, dtype=np.float64)
    K.tilt_butterfly(g)
    gm = g.max(axis=1)
    mean = gm + np.log2(np.exp2(g - gm[:, None]).mean(axis=1))
    ratio = np.logaddexp2(math.log2(DEFENSIVE), math.log2(1.0 - DEFENSIVE) + mean)
    return flips, ratio


def _batch_stats(p, n, seed, b, count, backend, importance):
    N = 1 << n
    rng = np.random.default_rng([seed, b])
    K = kernels.get_backend(backend)
    if importance and 0.0 < p < 0.5:
        flips, log2_ratio = _tree_proposal(rng, p, n, count, K)
    else:
        flips = rng.random((count, N)) < p
        log2_ratio = np.zeros(count)
    llr = np.ascontiguousarray(channel_llr(bsc(p), flips.astype(np.uint8)), dtype=np.float64)
    K.genie_llr_butterfly(llr, LLR_CAP)
    c = _log2_sech_sample(llr) - log2_ratio[:, None]
    m = c.max(axis=0)
    with np.errstate(invalid="ignore"):
        d = np.where(np.isfinite(m), c - m, -np.inf)
    e = np.exp2(d)
    return m, e.sum(axis=0), (e * e).sum(axis=0)


def _block_stats(args):
    p, n, seed, batches, backend, importance = args
    acc = None
    for b, count in batches:
        acc = _merge(acc, *_batch_stats(p, n, seed, b, count, backend, importance))
    return acc


def mc_bsc_reliabilities(p, n, samples, seed, workers=1, backend=None, importance=True):
    """Monte Carlo ``log2 Z`` of all synthetic channels of BSC(p).

    Each trial sends the all-zero word, runs the genie-aided SC recursion and
    records, per synthetic channel, ``E[2^(-lam/2) | |lam|]``, an unbiased
    Bhattacharyya sample.  With ``importance`` (the default) the noise is drawn
    from a mixture that also covers the rare patterns dominating the most
    reliable channels, and each sample is reweighted by its likelihood ratio;
    without it, reliable channels are underestimated and their standard errors
    are too small.

    Trials are drawn in batches whose RNG streams are keyed by ``(seed,
    batch)``, and partial sums are merged in batch order, so the table is
    identical for any ``workers``.

    Parameters
    ----------
    p : float
        Crossover probability in [0, 1/2].
    n : int
    samples : int
        Number of trials, at least 1.
    seed : int
    workers : int
        Processes used for the batches.
    backend : str, optional
        Kernel backend, default the active one.
    importance : bool
        Use the importance mixture.

    Returns
    -------
    ReliabilityTable
        With ``log2_stderr`` set.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"crossover must be in [0, 1/2], got {p}")
    if not 0 <= n <= 24:
        raise ValueError(f"n must be in [0, 24], got {n}")
    backend = backend or kernels.BACKEND
    B = batch_size(n)
    batches = [(b, min(B, samples - b * B)) for b in range((samples + B - 1) // B)]
    blocks = [batches[i:i + BLOCK_BATCHES] for i in range(0, len(batches), BLOCK_BATCHES)]
    jobs = [(p, n, seed, blk, backend, importance) for blk in blocks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_stats, jobs))
    else:
        parts = [_block_stats(j) for j in jobs]
    acc = None
    for part in parts:
        acc = _merge(acc, *part)
    M, S1, S2 = acc
    S = float(samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        log2_z = np.where(np.isfinite(M), M + np.log2(S1) - math.log2(S), -np.inf)
        if samples > 1:
            var_num = np.maximum(S2 - S1 * S1 / S, 0.0)
            log2_err = np.where(np.isfinite(M),
                                M + 0.5 * (np.log2(var_num) - math.log2((S - 1.0) * S)),
                                -np.inf)
        else:
            log2_err = np.full(1 << n, np.inf)
    log2_z = np.minimum(log2_z, 0.0)
    method = MONTE_CARLO_BSC if importance else MONTE_CARLO_BSC_PLAIN
    return ReliabilityTable(n, log2_z, method, float(p), int(samples), int(seed), log2_err)


# cache ------------------------------------------------------------------------

def default_cache_dir():
    env = os.environ.get("POLAR_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "tripolar"


class ReliabilityCache:
    """On-disk PRT1 tables keyed by (kind, p, n, samples, seed)."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def path_for(self, kind, p, n, samples=0, seed=0):
        ch = ChannelSpec(kind, p)
        if ch.kind == ERASURE:
            samples, seed = 0, 0
        name = f"{ch.short}_p{float(p).hex()}_n{n}_s{samples}_seed{seed}.prt1"
        return self.root / name

    @staticmethod
    def _matches(table, kind, p, n, samples, seed):
        ch = ChannelSpec(kind, p)
        if ch.kind == ERASURE:
            return table.method == EXACT_BEC and table.n == n and table.p == float(p)
        return (table.method == MONTE_CARLO_BSC and table.n == n and table.p == float(p)
                and table.samples == samples and table.seed == seed)

    def get(self, kind, p, n, samples=0, seed=0, workers=1):
        path = self.path_for(kind, p, n, samples, seed)
        if path.exists():
            try:
                table = ReliabilityTable.load(path)
                if self._matches(table, kind, p, n, samples, seed):
                    return table
                log.warning("cached table %s does not match its key; rebuilding", path)
            except TableFormatError as exc:
                log.warning("cached table %s is corrupt (%s); rebuilding", path, exc)
        table = build_table(kind, p, n, samples, seed, workers)
        self.root.mkdir(parents=True, exist_ok=True)
        table.save(path)
        return table


def build_table(kind, p, n, samples=0, seed=0, workers=1):
    ch = ChannelSpec(kind, p)
    if ch.kind == ERASURE:
        return bec_reliabilities(ch.p, n)
    return mc_bsc_reliabilities(ch.p, n, samples, seed, workers=workers)
