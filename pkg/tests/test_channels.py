import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from tripolar import channels as C
from tripolar.monomials import Monomial, channel_index_of_monomial, strong_leq


# channel specs and scalar lemmas ---------------------------------------------------

def test_spec_validation():
    assert C.ChannelSpec("bec", 0.1).kind == C.ERASURE
    assert C.ChannelSpec("dephasing", 0.1).kind == C.BSC
    assert C.bsc(0.2).short == "bsc"
    for bad in [("bec", -0.1), ("bec", 1.1), ("bsc", 0.6), ("awgn", 0.1)]:
        with pytest.raises(ValueError):
            C.ChannelSpec(*bad)


def test_bhattacharyya_examples():
    assert C.bhattacharyya(C.bec(0.3)) == 0.3
    assert C.bhattacharyya(C.bsc(0.1)) == pytest.approx(2 * math.sqrt(0.09))
    assert C.bhattacharyya(C.bec(0.0)) == 0.0
    assert C.bhattacharyya(C.bsc(0.5)) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [0.0, 0.05, 0.3, 0.5])
def test_bhattacharyya_by_summation(p):
    # BEC outputs {0, 1, erasure}; BSC outputs {0, 1}
    bec = [(1 - p, 0.0), (0.0, 1 - p), (p, p)]
    assert C.bhattacharyya(C.bec(p)) == pytest.approx(sum(math.sqrt(a * b) for a, b in bec))
    bsc = [(1 - p, p), (p, 1 - p)]
    assert C.bhattacharyya(C.bsc(p)) == pytest.approx(sum(math.sqrt(a * b) for a, b in bsc))


def test_capacity_examples():
    assert C.capacity(C.bec(0.01)) == pytest.approx(0.99)
    assert C.capacity(C.bsc(0.5)) == 0.0
    assert C.capacity(C.bsc(0.0)) == 1.0
    assert C.capacity(C.bsc(0.11)) == pytest.approx(1 - C.h2(0.11))


def test_composition_examples():
    assert C.compose_erasure(0.01, 0.5) == pytest.approx(0.505)
    assert C.compose_erasure(0.3, 0.0) == 0.3
    assert C.compose_erasure(1.0, 0.4) == 1.0
    assert C.compose_bsc(0.5, 0.2) == pytest.approx(0.5)
    assert C.compose_bsc(0.3, 0.0) == 0.3
    assert C.compose_bsc(0.1, 0.1) == pytest.approx(0.18)
    with pytest.raises(ValueError):
        C.compose_bsc(0.6, 0.1)


@given(st.floats(0, 1), st.floats(0, 1))
def test_compose_erasure_properties(p, q):
    r = C.compose_erasure(p, q)
    assert r == pytest.approx(C.compose_erasure(q, p))
    assert 0.0 <= r <= 1.0 + 1e-15
    # erasure survives both channels: 1 - r = (1-p)(1-q)
    assert 1 - r == pytest.approx((1 - p) * (1 - q), abs=1e-12)


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_compose_bsc_properties(a, b):
    r = C.compose_bsc(a, b)
    assert r == pytest.approx(C.compose_bsc(b, a))
    assert -1e-15 <= r <= 0.5 + 1e-15
    # crossover of the cascade: exactly one of the two flips
    assert r == pytest.approx(a * (1 - b) + b * (1 - a), abs=1e-12)


def test_degrade_examples():
    assert C.degrade_erasure_to_bsc(0.02) == C.bsc(0.01)
    assert C.degrade_erasure_to_bsc(0.0) == C.bsc(0.0)


@given(st.floats(1e-9, 1.0))
def test_degradation_direction_on_base_channels(p):
    assert C.bhattacharyya(C.bec(p)) <= C.bhattacharyya(C.degrade_erasure_to_bsc(p)) + 1e-15


def test_markov_bound_examples():
    assert C.markov_puncture_bound(2.0 ** -90, 2.0 ** -80) == 2.0 ** -10
    assert C.markov_puncture_bound(0.3, 0.3) == 1.0
    assert C.markov_puncture_bound(1e-6, 1e-4) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        C.markov_puncture_bound(1e-3, 1e-4)


def test_channel_llr():
    np.testing.assert_array_equal(C.channel_llr(C.bec(0.2), [-1, 0, 1]), [0.0, np.inf, -np.inf])
    llr = C.channel_llr(C.bsc(0.2), [0, 1])
    np.testing.assert_allclose(llr, [2.0, -2.0])
    assert C.channel_llr(C.bsc(0.0), [0])[0] == np.inf
    assert C.channel_llr(C.bsc(0.5), [1])[0] == 0.0


# exact BEC tables ------------------------------------------------------------------

def test_bec_table_examples():
    t = C.bec_reliabilities(0.5, 1)
    np.testing.assert_allclose(t.z, [0.75, 0.25])
    assert not C.bec_reliabilities(0.0, 5).z.any()
    assert t.method == C.EXACT_BEC and t.samples == 0


@pytest.mark.parametrize("n", range(0, 11))
@pytest.mark.parametrize("p", [0.01, 0.2, 0.5, 0.9])
def test_bec_mean_is_preserved(n, p):
    assert C.bec_reliabilities(p, n).z.mean() == pytest.approx(p, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("p", [0.1, 0.5])
def test_bec_recursion_matches_exhaustive_patterns(n, p):
    np.testing.assert_allclose(C.bec_reliabilities(p, n).z,
                               O.bec_erasure_probability_exact(p, n), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_bec_recursion_matches_sampled_patterns(n):
    # rank criterion on random erasure patterns; each channel within 4 binomial sigmas
    p, trials = 0.3, 400
    rng = np.random.default_rng(n)
    hits = np.zeros(1 << n)
    for _ in range(trials):
        hits += O.bec_undetermined(n, rng.random(1 << n) < p)
    z = C.bec_reliabilities(p, n).z
    sigma = np.sqrt(z * (1 - z) / trials)
    assert (np.abs(hits / trials - z) <= 4 * sigma + 1e-12).all()


@pytest.mark.parametrize("n", range(1, 9))
def test_bec_table_monotone_in_strong_order(n):
    lz = C.bec_reliabilities(0.2, n).log2_z
    for f, g in itertools.product(range(1 << n), repeat=2):
        F, G = Monomial(f, n), Monomial(g, n)
        if strong_leq(F, G):
            assert lz[channel_index_of_monomial(F)] <= lz[channel_index_of_monomial(G)]


def test_bec_log_domain_does_not_underflow():
    t = C.bec_reliabilities(0.01, 20)
    assert np.isfinite(t.log2_z).all()
    assert t.log2_z.min() < -2000
    # no ties forced by underflow among the reliable half
    reliable = np.sort(t.log2_z)[: 1 << 10]
    assert np.unique(reliable).size > 100


# Monte Carlo BSC tables --------------------------------------------------------------

@pytest.mark.parametrize("q", [0.001, 0.02, 0.3])
def test_exhaustive_oracles_agree(q):
    for n in (1, 2, 3):
        np.testing.assert_allclose(O.bsc_z_exhaustive(q, n), O.bsc_z_density_evolution(q, n),
                                   rtol=1e-12)


@pytest.mark.parametrize("n", range(1, 7))
def test_mc_matches_exact_within_three_sigma(n):
    q = 0.11
    exact = O.bsc_z_exhaustive(q, n) if n <= 3 else O.bsc_z_density_evolution(q, n)
    t = C.mc_bsc_reliabilities(q, n, 20000, seed=4)
    assert (np.abs(t.z - exact) <= 3 * t.stderr).all()


@pytest.mark.parametrize("q", [0.001, 0.02, 0.11])
def test_mc_standard_errors_are_calibrated(q):
    # channels with Z near 1 are excluded: estimates above 1 are clamped to keep log2 Z <= 0
    exact = O.bsc_z_density_evolution(q, 5)
    keep = exact < 0.9
    tables = [C.mc_bsc_reliabilities(q, 5, 5000, seed=s) for s in range(16)]
    z = np.array([((t.z - exact) / t.stderr)[keep] for t in tables])
    # channels within one run are correlated, so test the per-run averages
    per_run = z.mean(axis=1)
    t_stat = per_run.mean() / (per_run.std(ddof=1) / np.sqrt(per_run.size))
    assert abs(t_stat) < 4
    assert 0.75 < z.std() < 1.3


def test_plain_mc_underestimates_rare_channels():
    # without importance sampling the best channel at low noise is badly off
    exact = O.bsc_z_density_evolution(0.02, 6)
    plain = C.mc_bsc_reliabilities(0.02, 6, 5000, seed=1, importance=False)
    assert plain.method == C.MONTE_CARLO_BSC_PLAIN
    gap = np.abs(plain.z - exact)
    assert (gap > 10 * plain.stderr).any()


def test_mc_noiseless_and_determinism():
    t = C.mc_bsc_reliabilities(0.0, 5, 100, seed=1)
    assert not t.z.any()
    a = C.mc_bsc_reliabilities(0.05, 6, 3000, seed=9)
    b = C.mc_bsc_reliabilities(0.05, 6, 3000, seed=9)
    assert a == b and a.to_bytes() == b.to_bytes()
    assert a != C.mc_bsc_reliabilities(0.05, 6, 3000, seed=10)


def test_mc_independent_of_workers_and_backend():
    base = C.mc_bsc_reliabilities(0.05, 9, 5000, seed=2)
    assert base == C.mc_bsc_reliabilities(0.05, 9, 5000, seed=2, workers=2)
    py = C.mc_bsc_reliabilities(0.05, 9, 5000, seed=2, backend="python")
    np.testing.assert_allclose(py.log2_z, base.log2_z, rtol=0, atol=1e-9)


def test_mc_rejects_bad_input():
    with pytest.raises(ValueError):
        C.mc_bsc_reliabilities(0.1, 3, 0, seed=1)
    with pytest.raises(ValueError):
        C.mc_bsc_reliabilities(0.7, 3, 10, seed=1)


@pytest.mark.parametrize("n", range(1, 7))
def test_degradation_inequality_on_synthetic_channels(n):
    p = 0.1
    bec = C.bec_reliabilities(p, n).z
    bsc = C.mc_bsc_reliabilities(p / 2, n, 20000, seed=n)
    assert (bec <= bsc.z + 3 * bsc.stderr).all()


# tables on disk -----------------------------------------------------------------------

def _tables():
    return [C.bec_reliabilities(0.02, 6), C.mc_bsc_reliabilities(0.01, 5, 200, seed=3),
            C.uniform_table(4)]


@pytest.mark.parametrize("i", range(3))
def test_prt1_roundtrip(tmp_path, i):
    t = _tables()[i]
    data = t.to_bytes()
    assert data[:4] == b"PRT1"
    assert C.ReliabilityTable.from_bytes(data) == t
    t.save(tmp_path / "t.prt1")
    assert (tmp_path / "t.prt1").read_bytes() == data
    back = C.ReliabilityTable.load(tmp_path / "t.prt1")
    assert back.log2_z.tobytes() == t.log2_z.tobytes()


def test_prt1_layout():
    t = C.bec_reliabilities(0.25, 2)
    data = t.to_bytes()
    body = np.frombuffer(data[-32:], dtype="<f8")
    np.testing.assert_array_equal(body, t.log2_z)
    assert data[4] == 2


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXX" + d[4:],
    lambda d: d[:-8],
    lambda d: d[:10],
    lambda d: d[:5] + b"\x09" + d[6:],
])
def test_prt1_rejects_corruption(mutate):
    data = C.bec_reliabilities(0.25, 3).to_bytes()
    with pytest.raises(C.TableFormatError):
        C.ReliabilityTable.from_bytes(mutate(data))


def test_csv_export():
    t = C.mc_bsc_reliabilities(0.01, 3, 500, seed=1)
    lines = t.to_csv().splitlines()
    assert lines[0] == "index,log2_z,stderr"
    assert len(lines) == 9
    idx, lz, err = lines[3].split(",")
    assert int(idx) == 2 and float(lz) == t.log2_z[2] and float(err) == t.stderr[2]


def test_table_validation():
    with pytest.raises(ValueError):
        C.ReliabilityTable(2, np.zeros(3), C.EXACT_BEC, 0.1)
    with pytest.raises(ValueError):
        C.ReliabilityTable(1, np.array([0.5, -1.0]), C.EXACT_BEC, 0.1)
    t = C.bec_reliabilities(0.1, 3)
    with pytest.raises(ValueError):
        t.log2_z[0] = -5.0


def test_order_ties_fall_back_to_degree():
    t = C.uniform_table(3)
    masks = [7 ^ a for a in t.order()]
    degs = [bin(m).count("1") for m in masks]
    assert degs == sorted(degs)
    assert masks[0] == 0 and masks[-1] == 7


def test_cache_roundtrip_and_rebuild(tmp_path, caplog):
    cache = C.ReliabilityCache(tmp_path)
    a = cache.get("bsc", 0.01, 4, samples=300, seed=2)
    path = cache.path_for("bsc", 0.01, 4, 300, 2)
    assert path.exists()
    assert cache.get("bsc", 0.01, 4, samples=300, seed=2) == a
    path.write_bytes(b"garbage")
    with caplog.at_level("WARNING"):
        b = cache.get("bsc", 0.01, 4, samples=300, seed=2)
    assert b == a and "corrupt" in caplog.text
    assert C.ReliabilityTable.load(path) == a
    assert cache.path_for("bec", 0.01, 4, 5, 5) == cache.path_for("bec", 0.01, 4)
    # a valid table filed under the wrong key is rebuilt too
    C.bec_reliabilities(0.02, 4).save(cache.path_for("bec", 0.01, 4))
    caplog.clear()
    with caplog.at_level("WARNING"):
        c = cache.get("bec", 0.01, 4)
    assert c == C.bec_reliabilities(0.01, 4) and "does not match" in caplog.text


def test_cache_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("POLAR_CACHE_DIR", str(tmp_path / "c"))
    assert C.default_cache_dir() == tmp_path / "c"
    C.ReliabilityCache().get("bec", 0.1, 3)
    assert len(list((tmp_path / "c").glob("*.prt1"))) == 1
