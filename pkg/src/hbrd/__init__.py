"""Rate-distortion computation and random-binning simulation for two-decoder
source coding with degraded reconstruction sets."""

from .model import (
    COMMON_RECONSTRUCTION,
    LOSSLESS,
    ONE_DISTORTION,
    AuxChannel,
    DistortionSpec,
    FullJoint,
    JointSource,
    ReconstructionMap,
    channel_from_table,
    compose,
    constant_channel,
    deterministic_channel,
    expected_d2,
    hamming,
    optimal_phi,
)
from .probability import (
    Alphabet,
    CondPmf,
    Pmf,
    entropy,
    joint_entropy,
    marginalize,
    mutual_information,
)
from .rates import (
    BaselineResult,
    CaseTag,
    ClosedFormResult,
    HypothesisError,
    RateBreakdown,
    closed_form,
    eval_common_reconstruction,
    eval_lossless,
    eval_one_distortion,
    eval_one_distortion_forms,
    single_decoder_common_reconstruction,
    single_decoder_wyner_ziv,
)
from .optimize import (
    BudgetError,
    OptimizeResult,
    SearchConfig,
    grid_oracle,
    heuristic_search,
    minimize_u1_layer,
    sweep_distortion,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
