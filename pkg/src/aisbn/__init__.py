"""Importance-sampling inference for discrete Bayesian networks.

The package bundles an adaptive importance sampler with three
reference samplers (logic sampling, likelihood weighting,
self-importance sampling), an exact oracle for validation, and a
benchmark harness that scores the samplers against the oracle.
"""

from .adaptive import (
    AisConfig,
    AisResult,
    QueryResult,
    StageStats,
    ais_query,
    ais_run,
    estimate_evidence_priors,
    init_importance,
    learn_stage,
    learning_rate,
    stage_weight,
)
from .baselines import (
    SamplerResult,
    likelihood_weighting,
    logic_sampling,
    self_importance_sampling,
)
from .bench import (
    AlgorithmSpec,
    CaseSpec,
    ExperimentReport,
    ExperimentSpec,
    GeneratorParams,
    convergence_ratio,
    generate_network,
    mse,
    random_leaf_evidence,
    run_experiment,
)
from .engine import (
    IcptStore,
    RngStream,
    ScoreAccumulator,
    accumulate,
    estimate_pr_evidence,
    forward_sample,
    marginals_from_scores,
    relative_error_bound,
    run_sampler,
    run_sampler_in_blocks,
    sample_batch,
    score_batch,
    score_sample,
)
from .errors import (
    InvalidNetworkError,
    NetworkFormatError,
    NoEffectiveSamplesError,
    StateSpaceCapError,
    ZeroEvidenceProbabilityError,
)
from .exact import (
    IcptTable,
    exact_icpt,
    exact_posterior_marginals,
    exact_pr_evidence,
    exact_prior_marginal,
)
from .fileio import (
    load_network,
    network_to_text,
    parse_evidence,
    parse_network_text,
    save_network,
)
from .model import (
    BayesianNetwork,
    Cpt,
    Evidence,
    MarginalTable,
    Node,
    evidence_ancestor_set,
    evidence_from_labels,
    joint_probability,
    topological_order,
    validate_network,
)

__version__ = "0.1.0"
