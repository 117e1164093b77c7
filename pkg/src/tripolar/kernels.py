"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``TRIPOLAR_PURE_PYTHON=1``
to force the numpy fallback.  ``get_backend`` hands out either one explicitly
for equivalence tests and the benchmark.
"""

import importlib
import os

from . import _pykernels

NAMES = (
    "genie_llr_butterfly",
    "tilt_butterfly",
    "sc_decode_llr_batch",
    "sc_decode_erasure_batch",
    "decreasing_closure",
    "pair_scan",
    "triple_scan",
    "fnv1a64",
    "rref_inplace",
)


def _load_compiled():
    try:
        return importlib.import_module("tripolar._ckernels")
    except ImportError:
        return None


_compiled = _load_compiled()


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" or "python"); default is the active one."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("TRIPOLAR_PURE_PYTHON") == "1" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_active = get_backend(BACKEND)
genie_llr_butterfly = _active.genie_llr_butterfly
tilt_butterfly = _active.tilt_butterfly
sc_decode_llr_batch = _active.sc_decode_llr_batch
sc_decode_erasure_batch = _active.sc_decode_erasure_batch
decreasing_closure = _active.decreasing_closure
pair_scan = _active.pair_scan
triple_scan = _active.triple_scan
fnv1a64 = _active.fnv1a64
rref_inplace = _active.rref_inplace
