"""Strict minimum message length codebooks over countable data spaces.

Builds two-part codebooks for exponential-family models, evaluates and
optimizes the expected codelength, relates optimal partitions to weighted
Fisher-Voronoi tessellations, and measures the large-n behavior of the
resulting estimators with seeded Monte Carlo experiments.
"""

from ._version import __version__
from .errors import (
    ConfigError,
    DomainError,
    InvariantViolation,
    MarginalError,
    NonConvergenceError,
    SmmlError,
    UnsupportedDimensionError,
)
from .models import (
    DataSpace,
    ExponentialFamily,
    MarginalTable,
    MleResult,
    PriorSpec,
    binomial_model,
    fisher_info,
    loglik_hess,
    marginal_table,
    mle,
    mle_from_stat,
    multinomial_model,
    truncated_poisson_model,
)
from .codebook import (
    Codebook,
    Partition,
    assign_cost,
    assignment_costs,
    best_assignment,
    cell_from_members,
    cell_masses,
    cell_summaries,
    cell_summary,
    codelength,
    decompose,
    entropy,
    partition_from_assignment,
    synchronized_codebook,
)
from .projection import (
    ProjectionResult,
    kl_projection,
    mean_to_natural,
    moment_match,
)
from .partition_opt import (
    SolveResult,
    dp_exact_1d,
    lloyd_multistart,
    lloyd_solve,
    polyhedral_assign,
    polyhedral_cells,
    resync_codebook,
)
from .geometry import (
    FisherMetric,
    MeshPlan,
    WeightedVoronoi,
    bernoulli_fr_distance,
    fr_distance_sq,
    jeffreys_mesh,
    pairwise_boundary,
    tessellation_summary,
    voronoi_assign,
)
from .asymptotics import (
    AsymptoticsReport,
    ExperimentConfig,
    agreement_experiment,
    observed_info_check,
    rate_experiment,
    remainder_experiment,
    residual_experiment,
    run_asymptotics,
    wide_cell_check,
)

__all__ = [
    "__version__",
    "SmmlError",
    "ConfigError",
    "DomainError",
    "UnsupportedDimensionError",
    "InvariantViolation",
    "MarginalError",
    "NonConvergenceError",
    "DataSpace",
    "PriorSpec",
    "ExponentialFamily",
    "MarginalTable",
    "MleResult",
    "binomial_model",
    "multinomial_model",
    "truncated_poisson_model",
    "marginal_table",
    "mle",
    "mle_from_stat",
    "fisher_info",
    "loglik_hess",
    "Codebook",
    "Partition",
    "cell_from_members",
    "cell_masses",
    "cell_summary",
    "cell_summaries",
    "entropy",
    "codelength",
    "decompose",
    "assign_cost",
    "assignment_costs",
    "best_assignment",
    "partition_from_assignment",
    "synchronized_codebook",
    "ProjectionResult",
    "mean_to_natural",
    "moment_match",
    "kl_projection",
    "SolveResult",
    "dp_exact_1d",
    "lloyd_solve",
    "lloyd_multistart",
    "resync_codebook",
    "polyhedral_cells",
    "polyhedral_assign",
    "FisherMetric",
    "WeightedVoronoi",
    "MeshPlan",
    "fr_distance_sq",
    "bernoulli_fr_distance",
    "voronoi_assign",
    "pairwise_boundary",
    "jeffreys_mesh",
    "tessellation_summary",
    "ExperimentConfig",
    "AsymptoticsReport",
    "agreement_experiment",
    "rate_experiment",
    "residual_experiment",
    "remainder_experiment",
    "observed_info_check",
    "wide_cell_check",
    "run_asymptotics",
]
