"""Deterministic equivalents for MIMO multiple-access channels with jointly
correlated Rician fading, with waterfilling optimization and a seeded
Monte-Carlo oracle."""

from .capacity_opt import OptConfig, OptResult, optimize, waterfill
from .channel_model import (
    ChannelModel,
    Dimensions,
    InputCovarianceSet,
    LinkStatistics,
    from_kronecker,
    from_variance_profile,
    normalize,
    random_jointly_correlated,
    validate,
)
from .de_core import DEState, SolverConfig, solve_fixed_point
from .mc_oracle import MCConfig, MCEstimate, ergodic_mi, ergodic_resolvent_trace
from .shannon import DEReport, evaluate, shannon_transform
from .stats_extract import SampleSet, extract

__version__ = "0.1.0"

__all__ = [
    "ChannelModel",
    "DEReport",
    "DEState",
    "Dimensions",
    "InputCovarianceSet",
    "LinkStatistics",
    "MCConfig",
    "MCEstimate",
    "OptConfig",
    "OptResult",
    "SampleSet",
    "SolverConfig",
    "ergodic_mi",
    "ergodic_resolvent_trace",
    "evaluate",
    "extract",
    "from_kronecker",
    "from_variance_profile",
    "normalize",
    "optimize",
    "random_jointly_correlated",
    "shannon_transform",
    "solve_fixed_point",
    "validate",
    "waterfill",
]
