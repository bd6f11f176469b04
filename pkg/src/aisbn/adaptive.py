"""Adaptive importance sampling for evidential inference.

The sampler keeps one importance table per non-evidence node, seeded
from the CPTs and optionally adjusted by two initialization heuristics.
It then alternates short sampling stages with table updates that pull
each row toward the stage's normalized score mass, at a learning rate
decaying geometrically between configured endpoints.  Only ancestors
of evidence nodes are updated: for every other node the optimal
importance table provably equals its CPT.

Samples are combined across stages through per-stage weights; the
default weights zero out every learning stage so that estimates come
from the final tables alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    IcptStore,
    RngStream,
    ScoreAccumulator,
    _SamplingPlan,
    as_generator,
    estimate_pr_evidence,
    marginals_from_scores,
    relative_error_bound,
    sample_batch,
    score_batch,
)
from .errors import NoEffectiveSamplesError, StateSpaceCapError, ZeroEvidenceProbabilityError
from .exact import exact_prior_marginal
from .model import (
    BayesianNetwork,
    Evidence,
    MarginalTable,
    check_evidence,
    evidence_ancestor_set,
)

WEIGHT_MODES = ("last-stage-only", "inverse-sigma")

TRUNCATED_LEARNING_FLAG = "truncated-learning"
ZERO_SCORE_FLAG = "zero-score-sum"

_TINY_SIGMA = 1e-300


@dataclass(frozen=True)
class AisConfig:
    """Tuning parameters for the adaptive sampler.

    Defaults: stages of 2500 samples, ten learning stages, learning
    rate decaying from 0.4 to 0.14, small importance probabilities
    raised to 0.04 at initialization, a runtime floor of 1e-3, and
    estimates taken from the final stage only.
    """

    total_samples: int = 125_000
    stage_size: int = 2500
    stages: int = 10
    rate_initial: float = 0.4
    rate_final: float = 0.14
    theta: float = 0.04
    prob_floor: float = 1e-3
    weight_mode: str = "last-stage-only"
    zero_weight_stages: tuple[int, ...] | None = None
    delta: float = 0.05
    uniform_parents_heuristic: bool = True
    small_prob_heuristic: bool = True

    def __post_init__(self):
        if self.total_samples < 1:
            raise ValueError("total_samples must be positive")
        if self.stage_size < 1:
            raise ValueError("stage_size must be positive")
        if self.stages < 1:
            raise ValueError("stages must be positive")
        if not 0.0 < self.rate_final <= self.rate_initial <= 1.0:
            raise ValueError("need 0 < rate_final <= rate_initial <= 1")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must be in (0, 1)")
        if not 0.0 < self.prob_floor < 1.0:
            raise ValueError("prob_floor must be in (0, 1)")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.zero_weight_stages is not None:
            stages = tuple(int(k) for k in self.zero_weight_stages)
            if any(k < 0 for k in stages):
                raise ValueError("zero_weight_stages must be non-negative")
            object.__setattr__(self, "zero_weight_stages", stages)

    def zero_weight_set(self) -> frozenset[int]:
        if self.zero_weight_stages is None:
            return frozenset(range(self.stages))
        return frozenset(self.zero_weight_stages)


@dataclass(frozen=True)
class StageStats:
    """Diagnostics for one sampling stage."""

    k: int
    n: int
    pr_estimate: float
    sigma_hat: float
    weight: float


@dataclass
class AisResult:
    pr_estimate: float
    pr_variance: float
    relative_error: float | None
    marginals: MarginalTable | None
    stages: list[StageStats]
    store: IcptStore
    n_samples: int
    flags: list[str] = field(default_factory=list)


def learning_rate(k: int, cfg: AisConfig) -> float:
    """Geometric decay from rate_initial at k = 0 to rate_final at
    k = stages, endpoints exact."""
    if not 0 <= k <= cfg.stages:
        raise ValueError(f"stage index {k} outside [0, {cfg.stages}]")
    if k == 0:
        return cfg.rate_initial
    if k == cfg.stages:
        return cfg.rate_final
    return cfg.rate_initial * (cfg.rate_final / cfg.rate_initial) ** (k / cfg.stages)


def stage_weight(k: int, sigma_history, cfg: AisConfig) -> float:
    """Weight of stage k in the combined estimator.

    ``last-stage-only`` zeroes the configured stages and weighs the
    rest 1.  ``inverse-sigma`` weighs stages by the reciprocal of
    their estimated standard error, anchored at the first weighted
    stage and clamped so weights never decrease.
    """
    zero = cfg.zero_weight_set()
    if cfg.weight_mode == "last-stage-only":
        return 0.0 if k in zero else 1.0
    if k in zero:
        return 0.0
    anchor = None
    previous = 0.0
    for j in range(k + 1):
        if j in zero:
            continue
        if j >= len(sigma_history):
            raise ValueError("sigma history is shorter than the stage index")
        sigma = max(float(sigma_history[j]), _TINY_SIGMA)
        if anchor is None:
            anchor = sigma
        previous = max(anchor / sigma, previous)
    return previous


def estimate_evidence_priors(
    net: BayesianNetwork,
    evidence: Evidence,
    *,
    rng=None,
    pre_pass_samples: int = 20_000,
) -> dict[str, float]:
    """Prior probability of each observed evidence outcome, each node
    taken on its own (other evidence ignored).

    Marginals come from the exact oracle over each node's ancestors;
    when that blows the state-space cap a single logic-sampling
    pre-pass estimates the remaining nodes.
    """
    check_evidence(net, evidence)
    priors: dict[str, float] = {}
    missing: list[str] = []
    for node_id, value in evidence.items():
        try:
            priors[node_id] = float(exact_prior_marginal(net, node_id)[int(value)])
        except StateSpaceCapError:
            missing.append(node_id)
    if missing:
        generator = as_generator(rng if rng is not None else 0)
        prior_store = IcptStore(net, {})
        counts = {i: 0 for i in missing}
        remaining = pre_pass_samples
        while remaining > 0:
            batch = min(4096, remaining)
            assignments = sample_batch(net, prior_store, generator, batch)
            for node_id in missing:
                counts[node_id] += int(
                    np.sum(assignments[:, net.index[node_id]] == evidence[node_id])
                )
            remaining -= batch
        for node_id in missing:
            priors[node_id] = counts[node_id] / pre_pass_samples
    return priors


def floor_rows(table: np.ndarray, floor: float) -> np.ndarray:
    """Raise entries below ``floor`` and take the deficit from each
    row's largest entry, preserving row sums exactly.

    Raises ValueError when a row's largest entry would drop below the
    floor, which happens only when floor * columns approaches 1.
    """
    out = np.array(table, dtype=np.float64)
    for row in out:
        low = row < floor
        if not np.any(low):
            continue
        deficit = float(np.sum(floor - row[low]))
        top = int(np.argmax(row))
        row[low] = floor
        row[top] -= deficit
        if row[top] < floor:
            raise ValueError(
                f"flooring at {floor} is infeasible for a row of {len(row)} outcomes"
            )
    return out


def init_importance(
    net: BayesianNetwork,
    evidence: Evidence,
    evidence_priors: dict[str, float],
    cfg: AisConfig,
) -> IcptStore:
    """Importance tables to start learning from.

    Two adjustments of the plain CPT copy, both optional:

    * parents of any evidence node whose observed outcome has prior
      probability below 1 / (2 * outcome count) become uniform in
      every row, because such evidence tends to invert its parents'
      posteriors;
    * every remaining entry below theta is raised to theta at the
      expense of the row's largest entry, so learning can reweight
      regions the prior all but rules out.
    """
    store = IcptStore(net, evidence)
    if not evidence:
        # Nothing to learn and the prior is already the optimal
        # importance function, so leave it untouched.
        return store
    if cfg.uniform_parents_heuristic:
        for node_id in evidence:
            prior = evidence_priors.get(node_id)
            if prior is None:
                raise ValueError(f"no prior supplied for evidence node {node_id!r}")
            if prior < 1.0 / (2.0 * net.outcome_count(node_id)):
                for parent in net.node(node_id).parents:
                    if parent in store.tables:
                        table = store.tables[parent]
                        table[:] = 1.0 / table.shape[1]
    if cfg.small_prob_heuristic:
        for node_id, table in store.tables.items():
            store.tables[node_id] = floor_rows(table, cfg.theta)
    return store


def _renormalize_rows_exact(table: np.ndarray) -> None:
    sums = table.sum(axis=1)
    table /= sums[:, None]
    for row in table:
        top = int(np.argmax(row))
        for _ in range(4):
            residual = 1.0 - row.sum()
            if residual == 0.0:
                break
            row[top] += residual


def learn_stage(
    net: BayesianNetwork,
    evidence: Evidence,
    store: IcptStore,
    assignments: np.ndarray,
    scores: np.ndarray,
    k: int,
    cfg: AisConfig,
    ancestors: set[str] | None = None,
) -> IcptStore:
    """Pull ancestor-node rows toward this stage's score mass.

    For each updated node, rows hit by the stage move by
    learning_rate(k) toward the normalized score mass of the stage;
    rows with no mass keep their values.  The runtime floor is then
    reapplied to the updated tables so later samples keep positive
    probability everywhere.
    """
    if ancestors is None:
        ancestors = evidence_ancestor_set(net, evidence)
    eta = learning_rate(k, cfg)
    for node_id in sorted(ancestors):
        table = store.tables[node_id]
        pos = net.index[node_id]
        outcomes = table.shape[1]
        rows = net.row_indices(pos, assignments)
        mass = np.bincount(
            rows * outcomes + assignments[:, pos],
            weights=scores,
            minlength=table.size,
        ).reshape(table.shape)
        row_mass = mass.sum(axis=1)
        hit = row_mass > 0.0
        if np.any(hit):
            observed = mass[hit] / row_mass[hit, None]
            table[hit] += eta * (observed - table[hit])
        np.maximum(table, cfg.prob_floor, out=table)
        _renormalize_rows_exact(table)
    return store


def ais_run(
    net: BayesianNetwork,
    evidence: Evidence,
    cfg: AisConfig | None = None,
    rng=None,
    *,
    evidence_priors: dict[str, float] | None = None,
) -> AisResult:
    """Full adaptive run: initialize tables, learn over staged samples,
    then spend the remaining budget under the final tables.

    Every stage lands in its own accumulator; the returned estimators
    combine stages through their weights, normalizing by weighted
    sample mass so zero-weight learning stages cost budget but do not
    bias the result.  ``evidence_priors`` can carry precomputed priors
    for repeated runs against the same evidence.
    """
    cfg = cfg or AisConfig()
    check_evidence(net, evidence)
    generator = as_generator(rng if rng is not None else 0)
    flags: list[str] = []

    if evidence and cfg.uniform_parents_heuristic:
        priors = (
            evidence_priors
            if evidence_priors is not None
            else estimate_evidence_priors(net, evidence, rng=generator)
        )
    else:
        priors = {}
    store = init_importance(net, evidence, priors, cfg)
    ancestors = evidence_ancestor_set(net, evidence)

    learning_stages = min(cfg.stages, cfg.total_samples // cfg.stage_size)
    if learning_stages < cfg.stages:
        flags.append(TRUNCATED_LEARNING_FLAG)
    final_count = cfg.total_samples - learning_stages * cfg.stage_size

    chunks: list[tuple[int, ScoreAccumulator]] = []
    sigma_history: list[float] = []
    plan = _SamplingPlan(net, store)

    def run_chunk(count: int) -> ScoreAccumulator:
        acc = ScoreAccumulator(net, evidence)
        remaining = count
        while remaining > 0:
            batch = min(8192, remaining)
            assignments = sample_batch(net, store, generator, batch, plan)
            scores = score_batch(net, store, assignments)
            acc.add_batch(assignments, scores)
            remaining -= batch
        return acc

    for k in range(learning_stages):
        assignments = sample_batch(net, store, generator, cfg.stage_size, plan)
        scores = score_batch(net, store, assignments)
        acc = ScoreAccumulator(net, evidence)
        acc.add_batch(assignments, scores)
        chunks.append((k, acc))
        sigma_history.append(_stage_sigma(acc))
        if ancestors:
            learn_stage(net, evidence, store, assignments, scores, k, cfg, ancestors)
            plan.refresh(store)

    final_acc = None
    if final_count > 0:
        final_acc = run_chunk(final_count)
        sigma_history.append(_stage_sigma(final_acc))
        chunks.append((cfg.stages, final_acc))

    combined = ScoreAccumulator(net, evidence)
    stages: list[StageStats] = []
    zero = cfg.zero_weight_set()
    anchor = None
    running = 0.0
    for index, (k, acc) in enumerate(chunks):
        # Same rule as stage_weight, applied over the chunks that
        # actually ran so truncated runs stay well defined.
        sigma = sigma_history[index]
        if cfg.weight_mode == "last-stage-only":
            weight = 0.0 if k in zero else 1.0
        elif k in zero or math.isnan(sigma):
            weight = 0.0
        else:
            sigma = max(sigma, _TINY_SIGMA)
            if anchor is None:
                anchor = sigma
            running = max(running, anchor / sigma)
            weight = running
        estimate = acc.sum_score / acc.n if acc.n else 0.0
        stages.append(StageStats(k, int(acc.n), estimate, sigma_history[index], weight))
        combined.merge_scaled(acc, weight)

    if combined.n < 2:
        raise NoEffectiveSamplesError(
            "no weighted samples: the budget leaves nothing after learning "
            "and every learning stage has zero weight"
        )
    pr_estimate, pr_variance = estimate_pr_evidence(combined)
    try:
        marginals = marginals_from_scores(combined)
    except NoEffectiveSamplesError:
        marginals = None
        flags.append(ZERO_SCORE_FLAG)
    relative_error = (
        relative_error_bound(pr_estimate, pr_variance, cfg.delta)
        if pr_estimate > 0.0
        else None
    )
    return AisResult(
        pr_estimate,
        pr_variance,
        relative_error,
        marginals,
        stages,
        store,
        cfg.total_samples,
        flags,
    )


def _stage_sigma(acc: ScoreAccumulator) -> float:
    if acc.n < 2:
        return float("nan")
    _, variance = estimate_pr_evidence(acc)
    return math.sqrt(variance)


@dataclass
class QueryResult:
    """Posterior Pr(query | evidence) as a ratio of two runs."""

    probability: float
    pr_joint: float
    pr_evidence: float
    relative_error_joint: float | None
    relative_error_evidence: float | None


def ais_query(
    net: BayesianNetwork,
    query_node: str,
    query_outcome: int,
    evidence: Evidence,
    cfg: AisConfig | None = None,
    rng=None,
) -> QueryResult:
    """Pr(query_node = query_outcome | evidence) from two independent
    runs, one for the evidence and one for evidence plus query."""
    cfg = cfg or AisConfig()
    if query_node in evidence:
        raise ValueError(f"query node {query_node!r} is already evidence")
    check_evidence(net, {**evidence, query_node: query_outcome})
    if isinstance(rng, np.random.Generator):
        rng_evidence = rng
        rng_joint = rng
    else:
        stream = rng if isinstance(rng, RngStream) else RngStream(rng or 0)
        rng_evidence = RngStream(stream.seed, 2 * stream.stream).generator()
        rng_joint = RngStream(stream.seed, 2 * stream.stream + 1).generator()

    evidence_run = ais_run(net, evidence, cfg, rng_evidence)
    joint_run = ais_run(net, {**evidence, query_node: query_outcome}, cfg, rng_joint)
    if evidence_run.pr_estimate <= 0.0:
        raise ZeroEvidenceProbabilityError(
            "evidence probability estimated at zero; the posterior is undefined"
        )
    return QueryResult(
        joint_run.pr_estimate / evidence_run.pr_estimate,
        joint_run.pr_estimate,
        evidence_run.pr_estimate,
        joint_run.relative_error,
        evidence_run.relative_error,
    )
