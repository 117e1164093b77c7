"""Classical simulation of the error-correction step of distillation.

The quantum protocol fails only if classical decoding of the polar code fails,
so noise is simulated on the all-zero word of the full length-N code: punctured
positions are erasures (or LLR 0 under dephasing), all others go through the
noise channel.  The decoded word is re-encoded and its punctured positions are
the logical bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import channels as ch
from .channels import ChannelSpec, channel_llr, compose_bsc, compose_erasure
from .polar import PolarCode, sc_decode_erasure_batch, sc_decode_llr_batch

_LN2 = math.log(2.0)


def effective_channel(noise, q):
    """Noise channel composed with puncturing at rate ``q``.

    Erasure noise gives BEC(p + q - pq).  Dephasing noise (a BSC) composed with
    puncture erasures degraded to BSC(q/2) gives BSC(p + q/2 - pq).
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"puncture rate must be in [0, 1], got {q}")
    if noise.kind == ch.ERASURE:
        return ch.bec(compose_erasure(noise.p, q))
    return ch.bsc(compose_bsc(noise.p, q / 2.0))


def llr_figure_point(code_or_log2_eps):
    """``log2((1 - eps) / eps)`` for the code threshold ``eps``, from its log2."""
    l = code_or_log2_eps.threshold_log2_eps if isinstance(code_or_log2_eps, PolarCode) \
        else float(code_or_log2_eps)
    if l == -math.inf:
        return math.inf
    if l >= 0.0:
        raise ValueError("threshold eps must be below 1")
    return math.log1p(-(2.0 ** l)) / _LN2 - l


@dataclass(frozen=True)
class Rate:
    """Proportion with a Wilson 95% interval."""

    mean: float
    lo: float
    hi: float
    count: int
    total: int

    @classmethod
    def from_counts(cls, count, total):
        count, total = int(count), int(total)
        if total == 0:
            return cls(math.nan, 0.0, 1.0, 0, 0)
        ci = binomtest(count, total).proportion_ci(confidence_level=0.95, method="wilson")
        return cls(count / total, float(ci.low), float(ci.high), count, total)


@dataclass
class NoiseRun:
    code: object
    noise: ChannelSpec
    trials: int = 10_000
    seed: int = 0
    stop_failures: int | None = 100

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class ErrorRateEstimate:
    N: int
    k: int
    p: float
    q: float
    trials: int
    bit_error: Rate
    word_error: Rate
    info_bit_error: Rate
    undecided_rate: float
    union_bound_log2: float
    seed: int
    early_stopped: bool = False
    channel_failures: np.ndarray = field(default=None, repr=False)
    info_indices: np.ndarray = field(default=None, repr=False)

    def row(self):
        return {
            "N": self.N, "k": self.k, "p": self.p, "q": self.q, "trials": self.trials,
            "bit_error": self.bit_error.mean, "ci_lo": self.bit_error.lo,
            "ci_hi": self.bit_error.hi, "word_error": self.word_error.mean,
            "union_bound_log2": self.union_bound_log2, "seed": self.seed,
        }

    def channel_failure_rates(self):
        return self.channel_failures / max(self.trials, 1)


def sim_batch_size(n):
    return max(1, (1 << 18) >> n)


def union_bound_log2(table, code):
    """log2 of the sum of Z over the information channels of ``code``."""
    if table is None:
        return math.nan
    lz = table.log2_z[code.info_indices]
    if lz.size == 0:
        return -math.inf
    m = lz.max()
    if m == -math.inf:
        return -math.inf
    return float(m + np.log2(np.exp2(lz - m).sum()))


def _design_table(code):
    ref = code.table_ref or {}
    if ref.get("method") == ch.EXACT_BEC and "p" in ref:
        return ch.bec_reliabilities(float(ref["p"]), code.n)
    return None


def _support_mask(N, punctures):
    # dep[j, i] = 1 when x_punct[i] depends on u_j, i.e. j contains punctures[i]
    j = np.arange(N, dtype=np.int64)[:, None]
    p = np.asarray(punctures, dtype=np.int64)[None, :]
    return (j & p) == p


def simulate_code(code, noise, punctures=(), trials=10_000, seed=0, stop_failures=100,
                  table=None):
    """Monte Carlo error rates of the polar ``code`` with given punctured positions.

    Parameters
    ----------
    code : PolarCode
    noise : ChannelSpec
        Erasure noise is decoded with the ternary SC decoder, binary symmetric
        noise with the LLR SC decoder.
    punctures : sequence of int
        Positions forced to erasure (LLR 0).  With none, logical bits are
        undefined and only ``info_bit_error`` and channel failures are useful.
    table : ReliabilityTable, optional
        Design table for the union bound; recomputed for exact BEC designs.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    N = code.N
    P = np.asarray(sorted(int(p) for p in punctures), dtype=np.int64)
    if P.size and (P.min() < 0 or P.max() >= N):
        raise ValueError("puncture position out of range")
    k = int(P.size)
    info = code.info_indices
    dep = _support_mask(N, P) if k else None
    B = sim_batch_size(code.n)
    bad_bits = bad_words = bad_info = undecided_bits = 0
    fails = np.zeros(info.shape[0], dtype=np.int64)
    done = 0
    b = 0
    stopped = False
    while done < trials:
        cnt = min(B, trials - done)
        rng = np.random.default_rng([seed, b])
        u01 = rng.random((cnt, N))
        if noise.kind == ch.ERASURE:
            y = np.where(u01 < noise.p, -1, 0).astype(np.int8)
            if k:
                y[:, P] = -1
            u, und, x = sc_decode_erasure_batch(y, code)
            wrong_u = u.astype(bool) | und.astype(bool)
            if k:
                xl = x[:, P].astype(bool)
                und_l = (und.astype(np.int64) @ dep.astype(np.int64)) > 0
                bad_l = xl | und_l
                undecided_bits += int(und_l.sum())
        else:
            flips = (u01 < noise.p).astype(np.uint8)
            llr = np.ascontiguousarray(channel_llr(noise, flips), dtype=np.float64)
            if k:
                llr[:, P] = 0.0
            u, x = sc_decode_llr_batch(llr, code)
            wrong_u = u.astype(bool)
            if k:
                bad_l = x[:, P].astype(bool)
        wi = wrong_u[:, info]
        fails += wi.sum(axis=0)
        bad_info += int(wi.sum())
        if k:
            bad_bits += int(bad_l.sum())
            bad_words += int(bad_l.any(axis=1).sum())
        else:
            bad_words += int(wi.any(axis=1).sum())
        done += cnt
        b += 1
        if stop_failures is not None and bad_words >= stop_failures and done < trials:
            stopped = True
            break
    q = k / N
    if table is None:
        table = _design_table(code)
    kk = max(k, 1)
    return ErrorRateEstimate(
        N=N, k=k, p=noise.p, q=q, trials=done,
        bit_error=Rate.from_counts(bad_bits, done * k) if k else Rate.from_counts(0, 0),
        word_error=Rate.from_counts(bad_words, done),
        info_bit_error=Rate.from_counts(bad_info, done * max(info.shape[0], 1)),
        undecided_rate=undecided_bits / (done * kk) if k else 0.0,
        union_bound_log2=union_bound_log2(table, code),
        seed=seed, early_stopped=stopped, channel_failures=fails, info_indices=info,
    )


def simulate(run, table=None):
    """Error rates of a tri-orthogonal code's decoder under ``run.noise``."""
    code = run.code
    src = code.source
    if src is None:
        raise ValueError("tri-orthogonal code carries no source polar code")
    return simulate_code(src, run.noise, code.punctures, run.trials, run.seed,
                         run.stop_failures, table)
