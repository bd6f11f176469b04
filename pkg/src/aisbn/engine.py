"""Shared importance-sampling machinery.

All samplers in this package run the same loop: draw assignments in
topological order from a store of importance tables, score each sample
as joint probability over importance probability, and accumulate the
scores.  The batch paths are vectorized per node and consume uniforms
sample-major, so chunked batch sampling reproduces the per-sample
reference path draw for draw on the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import NoEffectiveSamplesError
from .exact import IcptTable
from .model import (
    Assignment,
    BayesianNetwork,
    Evidence,
    MarginalTable,
    check_evidence,
    topological_order,
)


@dataclass(frozen=True)
class RngStream:
    """Seeded random stream; (seed, stream) identifies the sequence."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.stream]))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, int):
        return RngStream(rng).generator()
    raise TypeError(f"cannot make a generator from {type(rng).__name__}")


class IcptStore:
    """Mutable importance tables, one per sampled (non-evidence) node.

    Tables share the owning node's CPT layout.  The store starts as a
    copy of the CPTs; learning algorithms overwrite rows in place.
    """

    def __init__(self, net: BayesianNetwork, evidence: Evidence):
        check_evidence(net, evidence)
        self.net = net
        self.evidence = dict(evidence)
        self.tables: dict[str, np.ndarray] = {
            node.id: np.array(net.cpt(node.id).table)
            for node in net.nodes
            if node.id not in evidence
        }

    @classmethod
    def from_network(cls, net: BayesianNetwork, evidence: Evidence) -> "IcptStore":
        return cls(net, evidence)

    @classmethod
    def from_exact(cls, net, evidence, icpts: list[IcptTable]) -> "IcptStore":
        """Store seeded from exact importance tables.

        Unreachable rows keep the CPT values; sampling never visits
        them, so any valid distribution works there.
        """
        store = cls(net, evidence)
        for icpt in icpts:
            table = store.tables[icpt.node_id]
            table[icpt.reachable] = icpt.table[icpt.reachable]
        return store

    def copy(self) -> "IcptStore":
        dup = IcptStore.__new__(IcptStore)
        dup.net = self.net
        dup.evidence = dict(self.evidence)
        dup.tables = {i: np.array(t) for i, t in self.tables.items()}
        return dup

    def table(self, node_id: str) -> np.ndarray:
        return self.tables[node_id]

    def validate(self) -> list[str]:
        problems = []
        for node_id, table in self.tables.items():
            if np.any(table < 0.0):
                problems.append(f"node {node_id!r} has a negative entry")
            bad = np.nonzero(np.abs(table.sum(axis=1) - 1.0) > 1e-9)[0]
            for r in bad:
                problems.append(f"node {node_id!r} row {int(r)} does not sum to 1")
        return problems


class _SamplingPlan:
    """Per-network constants shared by the samplers: topological node
    positions, which of them are sampled vs clamped, and cumulative
    rows for outcome selection."""

    def __init__(self, net: BayesianNetwork, store: IcptStore):
        self.net = net
        self.evidence = store.evidence
        order = topological_order(net)
        self.topo_pos = [net.index[i] for i in order]
        self.free_pos = [p for p in self.topo_pos if net.nodes[p].id not in self.evidence]
        self.refresh(store)

    def refresh(self, store: IcptStore) -> None:
        self.cumulative = {
            pos: np.cumsum(store.tables[self.net.nodes[pos].id], axis=1)
            for pos in self.free_pos
        }
        self.probs = {
            pos: store.tables[self.net.nodes[pos].id] for pos in self.free_pos
        }


def _pick_outcomes(cum_rows: np.ndarray, prob_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """First outcome whose cumulative probability strictly exceeds u.

    Walks left off trailing zero-probability outcomes in the rounding
    corner case where u lands at or beyond the last cumulative value.
    """
    greater = cum_rows > u[:, None]
    picked = greater.argmax(axis=1)
    overflow = ~greater.any(axis=1)
    if np.any(overflow):
        picked[overflow] = cum_rows.shape[1] - 1
    zero = prob_rows[np.arange(len(picked)), picked] == 0.0
    while np.any(zero):
        picked[zero] -= 1
        zero = prob_rows[np.arange(len(picked)), picked] == 0.0
    return picked


def sample_batch(
    net: BayesianNetwork,
    store: IcptStore,
    rng: np.random.Generator,
    count: int,
    plan: _SamplingPlan | None = None,
) -> np.ndarray:
    """Draw ``count`` assignments under the store's importance tables.

    Evidence nodes are clamped to their observed outcomes and consume
    no random draws.
    """
    plan = plan or _SamplingPlan(net, store)
    assignments = np.empty((count, len(net.nodes)), dtype=np.int64)
    for node_id, value in store.evidence.items():
        assignments[:, net.index[node_id]] = value
    uniforms = rng.random((count, len(plan.free_pos)))
    for column, pos in enumerate(plan.free_pos):
        rows = net.row_indices(pos, assignments)
        assignments[:, pos] = _pick_outcomes(
            plan.cumulative[pos][rows], plan.probs[pos][rows], uniforms[:, column]
        )
    return assignments


def forward_sample(
    net: BayesianNetwork,
    store: IcptStore,
    rng: np.random.Generator,
) -> Assignment:
    """Single-sample reference path; uses one uniform per sampled node."""
    assignment = np.empty(len(net.nodes), dtype=np.int64)
    for node_id, value in store.evidence.items():
        assignment[net.index[node_id]] = value
    order = topological_order(net)
    for node_id in order:
        if node_id in store.evidence:
            continue
        pos = net.index[node_id]
        row = store.tables[node_id][net.row_index(pos, assignment)]
        cum = np.cumsum(row)
        u = rng.random()
        picked = int(np.searchsorted(cum, u, side="right"))
        if picked >= len(row):
            picked = len(row) - 1
        while row[picked] == 0.0:
            picked -= 1
        assignment[pos] = picked
    return assignment


def score_batch(
    net: BayesianNetwork,
    store: IcptStore,
    assignments: np.ndarray,
) -> np.ndarray:
    """Pr(sample, evidence) / importance probability, per sample."""
    count = assignments.shape[0]
    joint = np.ones(count, dtype=np.float64)
    rho = np.ones(count, dtype=np.float64)
    for pos, node in enumerate(net.nodes):
        rows = net.row_indices(pos, assignments)
        values = assignments[:, pos]
        joint *= net.cpts[pos].table[rows, values]
        if node.id not in store.evidence:
            rho *= store.tables[node.id][rows, values]
    if np.any(rho == 0.0):
        raise ZeroDivisionError(
            "importance probability of a sample is zero; the store does not "
            "cover the sampled assignment"
        )
    return joint / rho


def score_sample(
    net: BayesianNetwork,
    store: IcptStore,
    assignment: Assignment,
) -> float:
    return float(score_batch(net, store, np.asarray(assignment).reshape(1, -1))[0])


class ScoreAccumulator:
    """Raw moments of sample scores plus per-node, per-outcome score sums.

    Merging adds field-wise, so partial accumulators built from sample
    blocks combine into exactly the accumulator the concatenated blocks
    would produce.  Batch adds reduce the batch first and touch each
    running sum once, keeping block splits bit-identical.
    """

    def __init__(self, net: BayesianNetwork, evidence: Evidence):
        check_evidence(net, evidence)
        self.net = net
        self.evidence = dict(evidence)
        self.tracked = [n.id for n in net.nodes if n.id not in evidence]
        self._pos = np.array([net.index[i] for i in self.tracked], dtype=np.int64)
        self._sizes = [net.outcome_count(i) for i in self.tracked]
        self._offsets = np.concatenate(([0], np.cumsum(self._sizes)))[:-1]
        self._node_scores = np.zeros(int(sum(self._sizes)), dtype=np.float64)
        self.n = 0.0
        self.sum_score = 0.0
        self.sum_score_sq = 0.0

    def add(self, assignment: Assignment, weighted_score: float) -> None:
        if weighted_score < 0.0:
            raise ValueError("scores must be non-negative")
        self.add_batch(np.asarray(assignment).reshape(1, -1), np.array([weighted_score]))

    def add_batch(self, assignments: np.ndarray, scores: np.ndarray) -> None:
        scores = np.asarray(scores, dtype=np.float64)
        if np.any(scores < 0.0):
            raise ValueError("scores must be non-negative")
        self.n += scores.shape[0]
        self.sum_score += float(scores.sum())
        self.sum_score_sq += float((scores * scores).sum())
        if len(self._pos) == 0:
            return
        size = self._node_scores.shape[0]
        flat = self._offsets[None, :] + assignments[:, self._pos]
        block = np.bincount(flat.ravel(), weights=np.repeat(scores, len(self._pos)), minlength=size)
        self._node_scores += block

    def node_scores(self, node_id: str) -> np.ndarray:
        i = self.tracked.index(node_id)
        start = int(self._offsets[i])
        return np.array(self._node_scores[start : start + self._sizes[i]])

    def merge(self, other: "ScoreAccumulator") -> None:
        self.merge_scaled(other, 1.0)

    def merge_scaled(self, other: "ScoreAccumulator", weight: float) -> None:
        """Fold in another accumulator, its samples weighted by ``weight``.

        Weighting treats the other accumulator's samples as replicated
        ``weight`` times, which is exact for 0/1 stage weights and a
        documented approximation for fractional ones.
        """
        if other.tracked != self.tracked or other.evidence != self.evidence:
            raise ValueError("accumulators track different nodes or evidence")
        if weight < 0.0:
            raise ValueError("weights must be non-negative")
        if weight == 0.0:
            return
        self.n += weight * other.n
        self.sum_score += weight * other.sum_score
        self.sum_score_sq += weight * other.sum_score_sq
        self._node_scores += weight * other._node_scores


def accumulate(acc: ScoreAccumulator, assignment: Assignment, weighted_score: float) -> None:
    acc.add(assignment, weighted_score)


def estimate_pr_evidence(acc: ScoreAccumulator) -> tuple[float, float]:
    """Mean score and the variance of that mean.

    The variance is the sample variance of the scores divided by the
    number of samples, computed from the raw moments.
    """
    if acc.n < 2:
        raise ValueError("need at least 2 samples to estimate a variance")
    estimate = acc.sum_score / acc.n
    centered = acc.sum_score_sq - acc.sum_score * acc.sum_score / acc.n
    variance = max(0.0, centered) / (acc.n * (acc.n - 1.0))
    return estimate, variance


def marginals_from_scores(acc: ScoreAccumulator) -> MarginalTable:
    """Posterior estimate for each tracked node: score share per outcome."""
    if acc.sum_score <= 0.0:
        raise NoEffectiveSamplesError("all accumulated samples scored zero")
    return {
        node_id: acc.node_scores(node_id) / acc.sum_score
        for node_id in acc.tracked
    }


def relative_error_bound(estimate: float, variance: float, delta: float) -> float:
    """Half-width of the level-(1 - delta) normal interval, relative
    to the estimate."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if estimate <= 0.0:
        raise ValueError("relative error needs a positive estimate")
    z = NormalDist().inv_cdf(1.0 - delta / 2.0)
    return math.sqrt(max(0.0, variance)) / estimate * z


def run_sampler(
    net: BayesianNetwork,
    store: IcptStore,
    n_samples: int,
    rng: np.random.Generator,
    *,
    batch_size: int = 4096,
    accumulator: ScoreAccumulator | None = None,
    plan: _SamplingPlan | None = None,
) -> ScoreAccumulator:
    """Sample, score and accumulate ``n_samples`` under a fixed store."""
    acc = accumulator or ScoreAccumulator(net, store.evidence)
    plan = plan or _SamplingPlan(net, store)
    remaining = n_samples
    while remaining > 0:
        count = min(batch_size, remaining)
        assignments = sample_batch(net, store, rng, count, plan)
        scores = score_batch(net, store, assignments)
        acc.add_batch(assignments, scores)
        remaining -= count
    return acc


def run_sampler_in_blocks(
    net: BayesianNetwork,
    store: IcptStore,
    n_samples: int,
    stream: RngStream,
    *,
    n_threads: int = 1,
    batch_size: int = 4096,
) -> ScoreAccumulator:
    """Block-parallel sampling: each worker owns a derived stream and a
    private accumulator; results merge field-wise in block order."""
    if n_threads <= 1:
        return run_sampler(net, store, n_samples, stream.generator(), batch_size=batch_size)
    from concurrent.futures import ThreadPoolExecutor

    base = n_samples // n_threads
    counts = [base + (1 if i < n_samples % n_threads else 0) for i in range(n_threads)]
    plan = _SamplingPlan(net, store)

    def work(block: int) -> ScoreAccumulator:
        block_rng = RngStream(stream.seed, stream.stream + block + 1).generator()
        return run_sampler(
            net, store, counts[block], block_rng, batch_size=batch_size, plan=plan
        )

    merged = ScoreAccumulator(net, store.evidence)
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        for part in pool.map(work, range(n_threads)):
            merged.merge(part)
    return merged
