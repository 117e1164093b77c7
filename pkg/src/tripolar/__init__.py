"""Polar codes with triply-even duals and the tri-orthogonal codes they give."""

from .channels import (
    ChannelSpec,
    ReliabilityCache,
    ReliabilityTable,
    bec,
    bec_reliabilities,
    bhattacharyya,
    bsc,
    capacity,
    compose_bsc,
    compose_erasure,
    degrade_erasure_to_bsc,
    markov_puncture_bound,
    mc_bsc_reliabilities,
    uniform_table,
)
from .distill import (
    ErrorRateEstimate,
    NoiseRun,
    effective_channel,
    llr_figure_point,
    simulate,
    simulate_code,
)
from .experiments import (
    ExperimentConfig,
    FitResult,
    fit_loglog,
    run_dimension_sweep,
    run_error_sweep,
    run_simulation,
)
from .gf2 import BitMatrix
from .kernels import BACKEND
from .monomials import (
    Monomial,
    MonomialSet,
    channel_index_of_monomial,
    complement,
    decreasing_closure,
    dual_set,
    evaluate,
    is_decreasing,
    maximal_elements,
    monomial_from_channel_index,
    product,
    strong_leq,
    weak_leq,
)
from .polar import PolarCode, construct_code, encode, sc_decode_erasure, sc_decode_llr
from .triortho import (
    SearchReport,
    TriorthogonalCode,
    build_css,
    check_triply_even_dual,
    complement_space,
    dual_generator,
    puncture_systematic,
    smallest_triply_even_code,
    verify_triorthogonal,
)

__version__ = "0.1.0"
