"""Reference samplers: logic sampling, likelihood weighting, and
self-importance sampling.

All three share the engine's sampling and scoring code; they differ
only in how evidence is treated and whether the importance tables are
revised while sampling runs.
"""

from __future__ import annotations

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
    run_sampler,
    run_sampler_in_blocks,
    sample_batch,
    score_batch,
)
from .errors import NoEffectiveSamplesError
from .model import BayesianNetwork, Evidence, MarginalTable, check_evidence

ZERO_SCORE_FLAG = "zero-score-sum"


@dataclass
class SamplerResult:
    """Outcome of one sampling run.

    ``marginals`` is None when every sample scored zero, in which case
    ``flags`` contains :data:`ZERO_SCORE_FLAG`; such runs estimate
    Pr(e) = 0 and carry no posterior information.
    """

    algorithm: str
    n_samples: int
    pr_estimate: float
    pr_variance: float
    marginals: MarginalTable | None
    accumulator: ScoreAccumulator
    flags: list[str] = field(default_factory=list)


def _finish(algorithm: str, n_samples: int, acc: ScoreAccumulator) -> SamplerResult:
    estimate, variance = estimate_pr_evidence(acc)
    try:
        marginals = marginals_from_scores(acc)
        flags = []
    except NoEffectiveSamplesError:
        marginals = None
        flags = [ZERO_SCORE_FLAG]
    return SamplerResult(algorithm, n_samples, estimate, variance, marginals, acc, flags)


def logic_sampling(
    net: BayesianNetwork,
    evidence: Evidence,
    n_samples: int,
    rng,
    *,
    batch_size: int = 4096,
) -> SamplerResult:
    """Sample the prior without clamping; samples disagreeing with the
    evidence score zero but still count toward the sample total."""
    check_evidence(net, evidence)
    rng = as_generator(rng)
    prior_store = IcptStore(net, {})
    plan = _SamplingPlan(net, prior_store)
    acc = ScoreAccumulator(net, evidence)
    ev_pos = np.array([net.index[i] for i in evidence], dtype=np.int64)
    ev_val = np.array([int(evidence[i]) for i in evidence], dtype=np.int64)
    remaining = n_samples
    while remaining > 0:
        count = min(batch_size, remaining)
        assignments = sample_batch(net, prior_store, rng, count, plan)
        if len(ev_pos):
            consistent = np.all(assignments[:, ev_pos] == ev_val[None, :], axis=1)
            scores = consistent.astype(np.float64)
        else:
            scores = np.ones(count, dtype=np.float64)
        acc.add_batch(assignments, scores)
        remaining -= count
    return _finish("logic", n_samples, acc)


def likelihood_weighting(
    net: BayesianNetwork,
    evidence: Evidence,
    n_samples: int,
    rng,
    *,
    n_threads: int = 1,
    batch_size: int = 4096,
) -> SamplerResult:
    """Clamp the evidence and sample the rest from the prior; each
    sample weighs the product of the evidence nodes' CPT entries."""
    store = IcptStore(net, evidence)
    if n_threads > 1:
        if not isinstance(rng, RngStream):
            raise TypeError("multi-threaded runs need an RngStream")
        acc = run_sampler_in_blocks(
            net, store, n_samples, rng, n_threads=n_threads, batch_size=batch_size
        )
    else:
        acc = run_sampler(net, store, n_samples, as_generator(rng), batch_size=batch_size)
    return _finish("lw", n_samples, acc)


def self_importance_sampling(
    net: BayesianNetwork,
    evidence: Evidence,
    n_samples: int,
    rng,
    *,
    update_interval: int = 2500,
) -> SamplerResult:
    """Likelihood weighting whose importance tables drift toward the
    accumulated score frequencies.

    After every ``update_interval`` samples (update number k) each
    importance entry becomes (prior + k * observed) / (1 + k), where
    ``observed`` is the normalized per-configuration score mass over
    all samples so far.  Parent configurations with no mass keep their
    prior values.  With no evidence the posterior equals the prior, so
    no updates run and the sampler degenerates to prior sampling.
    """
    if update_interval < 1:
        raise ValueError("update_interval must be at least 1")
    check_evidence(net, evidence)
    rng = as_generator(rng)
    store = IcptStore(net, evidence)
    plan = _SamplingPlan(net, store)
    acc = ScoreAccumulator(net, evidence)
    priors = {i: np.array(net.cpt(i).table) for i in store.tables}
    mass = {i: np.zeros_like(t) for i, t in priors.items()}

    produced = 0
    updates = 0
    while produced < n_samples:
        count = min(update_interval, n_samples - produced)
        assignments = sample_batch(net, store, rng, count, plan)
        scores = score_batch(net, store, assignments)
        acc.add_batch(assignments, scores)
        produced += count

        if evidence and count == update_interval and produced < n_samples:
            updates += 1
            for node_id, table in store.tables.items():
                pos = net.index[node_id]
                rows = net.row_indices(pos, assignments)
                outcomes = table.shape[1]
                mass[node_id] += np.bincount(
                    rows * outcomes + assignments[:, pos],
                    weights=scores,
                    minlength=table.size,
                ).reshape(table.shape)
                row_mass = mass[node_id].sum(axis=1)
                sampled = row_mass > 0.0
                prior = priors[node_id]
                observed = np.array(prior)
                observed[sampled] = mass[node_id][sampled] / row_mass[sampled, None]
                blended = (prior + updates * observed) / (1.0 + updates)
                table[sampled] = blended[sampled]
                table[~sampled] = prior[~sampled]
            plan.refresh(store)
    return _finish("sis", n_samples, acc)
