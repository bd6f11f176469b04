"""Discrete Bayesian network representation.

A network is a list of nodes, each with a finite outcome set and a
conditional probability table (CPT).  CPT rows are laid out in
lexicographic parent order: the first parent is the most significant
digit and the last parent varies fastest.  Columns follow the node's
declared outcome order.

Evidence is a mapping from node id to observed outcome index.  An
assignment is an integer vector holding one outcome index per node, in
network declaration order.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InvalidNetworkError

Evidence = dict[str, int]
Assignment = np.ndarray
MarginalTable = dict[str, np.ndarray]

ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Node:
    """One network variable: id, display name, outcome labels, parent ids."""

    id: str
    outcomes: tuple[str, ...]
    parents: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "parents", tuple(self.parents))
        if not self.name:
            object.__setattr__(self, "name", self.id)


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table for one node.

    ``table`` has one row per parent configuration and one column per
    outcome.  Row order follows the owning node's parent list with the
    first parent most significant, so for parents (A, B) the rows are
    (a0,b0), (a0,b1), (a1,b0), (a1,b1), ...
    """

    node_id: str
    table: np.ndarray

    def __post_init__(self):
        arr = np.array(self.table, dtype=np.float64, order="C")
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    @property
    def row_count(self) -> int:
        return self.table.shape[0]

    @property
    def outcome_count(self) -> int:
        return self.table.shape[1]


class BayesianNetwork:
    """Immutable container for nodes and their CPTs.

    Construction only requires that node ids are unique and parent ids
    resolve; every other well-formedness condition is checked by
    :func:`validate_network` so that malformed inputs can be reported in
    full rather than rejected piecemeal.
    """

    def __init__(self, name: str, nodes: list[Node], cpts: list[Cpt]):
        self.name = name
        self.nodes: tuple[Node, ...] = tuple(nodes)
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InvalidNetworkError([f"duplicate node id {i!r}" for i in dupes])
        self.index: dict[str, int] = {n.id: i for i, n in enumerate(self.nodes)}
        for n in self.nodes:
            for p in n.parents:
                if p not in self.index:
                    raise InvalidNetworkError(
                        [f"node {n.id!r} references unknown parent {p!r}"]
                    )
        by_id = {c.node_id: c for c in cpts}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise InvalidNetworkError([f"node {i!r} has no CPT" for i in missing])
        self.cpts: tuple[Cpt, ...] = tuple(by_id[i] for i in ids)

        # Precomputed per-node layout used by samplers and the oracle:
        # parent positions and mixed-radix strides for CPT row lookup.
        self._parent_pos: list[np.ndarray] = []
        self._strides: list[np.ndarray] = []
        for n in self.nodes:
            pos = np.array([self.index[p] for p in n.parents], dtype=np.int64)
            radix = np.array(
                [len(self.nodes[q].outcomes) for q in pos], dtype=np.int64
            )
            strides = np.ones(len(pos), dtype=np.int64)
            for j in range(len(pos) - 2, -1, -1):
                strides[j] = strides[j + 1] * radix[j + 1]
            self._parent_pos.append(pos)
            self._strides.append(strides)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> Node:
        return self.nodes[self.index[node_id]]

    def cpt(self, node_id: str) -> Cpt:
        return self.cpts[self.index[node_id]]

    def outcome_count(self, node_id: str) -> int:
        return len(self.node(node_id).outcomes)

    def parent_positions(self, pos: int) -> np.ndarray:
        return self._parent_pos[pos]

    def row_strides(self, pos: int) -> np.ndarray:
        return self._strides[pos]

    def row_index(self, pos: int, assignment: Assignment) -> int:
        """CPT row selected by the parents' values in ``assignment``."""
        ppos = self._parent_pos[pos]
        if len(ppos) == 0:
            return 0
        return int(np.dot(assignment[ppos], self._strides[pos]))

    def row_indices(self, pos: int, assignments: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`row_index` over an (n, nodes) assignment matrix."""
        ppos = self._parent_pos[pos]
        if len(ppos) == 0:
            return np.zeros(assignments.shape[0], dtype=np.int64)
        return assignments[:, ppos] @ self._strides[pos]

    def state_count(self, skip: set[str] | None = None) -> int:
        """Product of outcome counts over all nodes not in ``skip``."""
        skip = skip or set()
        total = 1
        for n in self.nodes:
            if n.id not in skip:
                total *= len(n.outcomes)
        return total


def expected_row_count(net: BayesianNetwork, node: Node) -> int:
    count = 1
    for p in node.parents:
        count *= len(net.node(p).outcomes)
    return count


def validate_network(net: BayesianNetwork) -> list[str]:
    """Check structural and numeric well-formedness.

    Returns a list of human-readable problems; an empty list means the
    network is valid.  Row sums are accepted within 1e-9 of 1 (loading
    renormalizes them exactly).
    """
    problems: list[str] = []
    for n in net.nodes:
        if len(n.outcomes) < 2:
            problems.append(f"node {n.id!r} needs at least 2 outcomes")
        if len(set(n.outcomes)) != len(n.outcomes):
            problems.append(f"node {n.id!r} has duplicate outcome labels")
        if len(set(n.parents)) != len(n.parents):
            problems.append(f"node {n.id!r} lists a parent twice")
        if n.id in n.parents:
            problems.append(f"node {n.id!r} is its own parent")

    try:
        topological_order(net)
    except InvalidNetworkError as exc:
        problems.extend(exc.problems)

    for n in net.nodes:
        cpt = net.cpt(n.id)
        want_rows = expected_row_count(net, n)
        if cpt.table.shape != (want_rows, len(n.outcomes)):
            problems.append(
                f"node {n.id!r} CPT has shape {cpt.table.shape}, "
                f"expected ({want_rows}, {len(n.outcomes)})"
            )
            continue
        if np.any(cpt.table < 0.0) or np.any(cpt.table > 1.0):
            problems.append(f"node {n.id!r} CPT has entries outside [0, 1]")
            continue
        sums = cpt.table.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
        for r in bad:
            problems.append(
                f"node {n.id!r} CPT row {int(r)} sums to {sums[r]:.12g}, not 1"
            )
    return problems


def topological_order(net: BayesianNetwork) -> list[str]:
    """Parents-before-children order; ties broken by ascending node id.

    Raises InvalidNetworkError if the graph has a directed cycle.
    """
    children: dict[str, list[str]] = {n.id: [] for n in net.nodes}
    indegree: dict[str, int] = {n.id: len(set(n.parents)) for n in net.nodes}
    for n in net.nodes:
        for p in set(n.parents):
            children[p].append(n.id)
    ready = [i for i, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        current = heapq.heappop(ready)
        order.append(current)
        for c in children[current]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != len(net.nodes):
        stuck = sorted(i for i, d in indegree.items() if d > 0)
        raise InvalidNetworkError(
            [f"cycle detected involving nodes {', '.join(stuck)}"]
        )
    return order


def evidence_ancestor_set(net: BayesianNetwork, evidence: Evidence) -> set[str]:
    """Non-evidence nodes with a directed path to some evidence node."""
    check_evidence(net, evidence)
    seen: set[str] = set()
    frontier = deque(evidence)
    while frontier:
        current = frontier.popleft()
        for p in net.node(current).parents:
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    return seen - set(evidence)


def check_evidence(net: BayesianNetwork, evidence: Evidence) -> None:
    for node_id, value in evidence.items():
        if node_id not in net.index:
            raise InvalidNetworkError([f"evidence names unknown node {node_id!r}"])
        if not 0 <= int(value) < net.outcome_count(node_id):
            raise InvalidNetworkError(
                [f"evidence outcome index {value} out of range for {node_id!r}"]
            )


def joint_probability(net: BayesianNetwork, assignment: Assignment) -> float:
    """Probability of a full assignment: product of one CPT entry per node."""
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (len(net.nodes),):
        raise ValueError(f"assignment must have length {len(net.nodes)}")
    prob = 1.0
    for pos, n in enumerate(net.nodes):
        if not 0 <= a[pos] < len(n.outcomes):
            raise ValueError(f"outcome index {a[pos]} out of range for {n.id!r}")
        prob *= net.cpts[pos].table[net.row_index(pos, a), a[pos]]
        if prob == 0.0:
            return 0.0
    return float(prob)


def joint_probabilities(net: BayesianNetwork, assignments: np.ndarray) -> np.ndarray:
    """Vectorized joint probability over an (n, nodes) assignment matrix."""
    probs = np.ones(assignments.shape[0], dtype=np.float64)
    for pos in range(len(net.nodes)):
        rows = net.row_indices(pos, assignments)
        probs *= net.cpts[pos].table[rows, assignments[:, pos]]
    return probs


def normalize_rows(table: np.ndarray) -> np.ndarray:
    """Rescale each row to sum to exactly 1.0 in float arithmetic.

    After the division the largest entry absorbs any residual so that
    ``row.sum()`` returns 1.0 bit-exactly.  Rows must already sum to
    within ROW_SUM_TOLERANCE of 1.
    """
    out = np.array(table, dtype=np.float64)
    for r in range(out.shape[0]):
        row = out[r]
        total = row.sum()
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            raise InvalidNetworkError(
                [f"row {r} sums to {total:.12g}, outside tolerance"]
            )
        row /= total
        top = int(np.argmax(row))
        for _ in range(4):
            residual = 1.0 - row.sum()
            if residual == 0.0:
                break
            row[top] += residual
    return out


def evidence_from_labels(net: BayesianNetwork, labels: dict[str, str]) -> Evidence:
    """Translate {node id: outcome label} into outcome indices."""
    evidence: Evidence = {}
    for node_id, label in labels.items():
        if node_id not in net.index:
            raise InvalidNetworkError([f"evidence names unknown node {node_id!r}"])
        node = net.node(node_id)
        if label not in node.outcomes:
            raise InvalidNetworkError(
                [
                    f"node {node_id!r} has no outcome {label!r} "
                    f"(choices: {', '.join(node.outcomes)})"
                ]
            )
        evidence[node_id] = node.outcomes.index(label)
    return evidence
