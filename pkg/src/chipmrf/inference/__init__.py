from .model import (
    ConstrainedChainParams,
    EmissionParams,
    Family,
    PosteriorSummary,
    PriorConfig,
    ReplicateParams,
    SamplerConfig,
    SamplerError,
)
from .oracle import exact_posterior, forward_backward
from .sampler import gibbs_marginals, run_sampler
from .updates import (
    ConstrainedUpdater,
    ReplicateStats,
    ReplicateUpdater,
    update_constrained_params,
    update_emission_params,
    update_transition_params,
    x_full_conditional,
    z_full_conditional,
)

__all__ = [
    "ConstrainedChainParams",
    "ConstrainedUpdater",
    "EmissionParams",
    "Family",
    "PosteriorSummary",
    "PriorConfig",
    "ReplicateParams",
    "ReplicateStats",
    "ReplicateUpdater",
    "SamplerConfig",
    "SamplerError",
    "exact_posterior",
    "forward_backward",
    "gibbs_marginals",
    "run_sampler",
    "update_constrained_params",
    "update_emission_params",
    "update_transition_params",
    "x_full_conditional",
    "z_full_conditional",
]
