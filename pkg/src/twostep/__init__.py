"""Two-step phase-shifting interferometry: synthesis, normalization, step estimation, benchmark."""

from .core import (
    FieldSpec,
    FringeModel,
    FringePair,
    GroundTruth,
    NormalizedPair,
    PhaseSpec,
    compute_phase,
    exact_normalized,
    phase_error_map,
    synth_pair,
    wrap,
)
from .errors import (
    CodecError,
    ConfigError,
    DegenerateInputError,
    EstimatorFailure,
    IncompatibleError,
    TwoStepError,
)
from .estimators import ESTIMATORS, STANDARD_TWELVE, StepEstimate, estimate
from .normalize import NORMALIZERS, GfbConfig, gfb_normalize

__version__ = "0.1.0"

__all__ = [
    "CodecError", "ConfigError", "DegenerateInputError", "ESTIMATORS", "EstimatorFailure",
    "FieldSpec", "FringeModel", "FringePair", "GfbConfig", "GroundTruth", "IncompatibleError",
    "NORMALIZERS", "NormalizedPair", "PhaseSpec", "STANDARD_TWELVE", "StepEstimate", "TwoStepError",
    "compute_phase", "estimate", "exact_normalized", "gfb_normalize", "phase_error_map",
    "synth_pair", "wrap",
]
