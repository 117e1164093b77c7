"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel runs on the same input under both backends; outputs are compared
before timing so a speedup never hides a disagreement.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from tripolar import kernels
from tripolar.channels import LLR_CAP, bec_reliabilities
from tripolar.monomials import dual_set, maximal_elements
from tripolar.triortho import dual_generator, smallest_triply_even_code


def _cases(rng):
    n_sc = 12
    N = 1 << n_sc
    frozen = (rng.random(N) < 0.5).astype(np.uint8)
    llr = np.ascontiguousarray(rng.normal(4.0, 4.0, (64, N)))
    y = np.where(rng.random((64, N)) < 0.2, -1, 0).astype(np.int8)

    code, _ = smallest_triply_even_code(bec_reliabilities(0.01, 14))
    D = dual_generator(code)
    J = dual_set(code.info_set)
    cands = np.ascontiguousarray(maximal_elements(J, order="weak").masks, dtype=np.int64)
    member = np.ascontiguousarray(code.info_set.member)
    rows = np.ascontiguousarray(D.words[:160])
    seed_member = np.zeros(1 << 16, dtype=np.uint8)
    seed_member[rng.integers(0, 1 << 16, 40)] = 1
    data = np.ascontiguousarray(rng.integers(0, 256, 1 << 22, dtype=np.uint8))
    tilt = np.ascontiguousarray(rng.normal(0.0, 1.0, (256, 1 << 10)))

    # each case: (name, make_args, call); make_args returns fresh (mutable) inputs
    return [
        ("genie_llr_butterfly n=12 x64", lambda: (llr.copy(), LLR_CAP),
         lambda k, a: (k.genie_llr_butterfly(*a), a[0])[1]),
        ("tilt_butterfly n=10 x256", lambda: (tilt.copy(),),
         lambda k, a: (k.tilt_butterfly(*a), a[0])[1]),
        ("sc_decode_llr_batch n=12 x64", lambda: (llr, frozen, LLR_CAP, False),
         lambda k, a: k.sc_decode_llr_batch(*a)),
        ("sc_decode_erasure_batch n=12 x64", lambda: (y, frozen),
         lambda k, a: k.sc_decode_erasure_batch(*a)),
        ("decreasing_closure n=16", lambda: (seed_member, 16),
         lambda k, a: k.decreasing_closure(*a)),
        ("pair_scan BEC n=14", lambda: (cands, member),
         lambda k, a: k.pair_scan(*a)),
        ("triple_scan 160 rows x 2^14", lambda: (rows,),
         lambda k, a: k.triple_scan(*a)),
        ("rref_inplace dual n=14", lambda: (D.words.copy(), np.arange(D.ncols, dtype=np.int64)),
         lambda k, a: (k.rref_inplace(*a), a[0])),
        ("fnv1a64 4 MiB", lambda: (data,), lambda k, a: k.fnv1a64(*a)),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        if a.dtype.kind == "f":
            return np.allclose(a, b, rtol=1e-9, atol=1e-9, equal_nan=True)
        return np.array_equal(a, b)
    if isinstance(a, list):
        return list(a) == list(b)
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)
    if "cython" not in kernels.available_backends():
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    cy, py = kernels.get_backend("cython"), kernels.get_backend("python")
    results = []
    print(f"{'kernel':36s} {'cython [ms]':>12s} {'python [ms]':>12s} {'speedup':>8s}")
    for name, make, call in _cases(np.random.default_rng(args.seed)):
        if not _same(call(cy, make()), call(py, make())):
            sys.exit(f"backends disagree on {name}")
        t = {}
        for label, k in (("cython", cy), ("python", py)):
            t[label] = min(timeit.repeat(lambda: call(k, make()), number=1,
                                         repeat=args.repeat)) * 1e3
        results.append({"kernel": name, **t, "speedup": t["python"] / t["cython"]})
        print(f"{name:36s} {t['cython']:12.2f} {t['python']:12.2f} "
              f"{t['python'] / t['cython']:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
