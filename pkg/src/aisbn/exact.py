"""Exact inference used as the gold standard for the samplers.

Two interchangeable backends sit behind every operation:

* ``enumerate``: exhaustive enumeration of evidence completions,
  chunked and vectorized.  Simple enough to audit by hand; capped by
  the completion count.
* ``eliminate``: variable elimination with a greedy min-weight order,
  for networks whose joint state space is out of enumeration range.
  Capped by the largest intermediate table.

``auto`` picks enumeration when the completion count is small and
falls back to elimination otherwise.  The test suite checks the two
backends against each other on networks where both are feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StateSpaceCapError, ZeroEvidenceProbabilityError
from .model import (
    Assignment,
    BayesianNetwork,
    Evidence,
    MarginalTable,
    check_evidence,
    expected_row_count,
)

DEFAULT_STATE_CAP = 2**24
DEFAULT_CLUSTER_CAP = 2**22
_AUTO_ENUMERATE_LIMIT = 2**18
_BLOCK = 2**14


@dataclass(frozen=True)
class IcptTable:
    """Exact importance table Pr(X | parents, e) for one node.

    ``table`` has the same layout as the node's CPT.  Rows whose parent
    configuration is impossible together with the evidence carry NaN
    and a False entry in ``reachable``; they are reported as such, not
    filled in.
    """

    node_id: str
    table: np.ndarray
    reachable: np.ndarray


def _completion_count(net: BayesianNetwork, evidence: Evidence) -> int:
    return net.state_count(skip=set(evidence))


def _choose_method(net, evidence, method: str) -> str:
    if method in ("enumerate", "eliminate"):
        return method
    if method != "auto":
        raise ValueError(f"unknown exact method {method!r}")
    if _completion_count(net, evidence) <= _AUTO_ENUMERATE_LIMIT:
        return "enumerate"
    return "eliminate"


def _completion_blocks(net, evidence, cap, block=_BLOCK):
    """Yield (assignments, joint) for every completion of the evidence."""
    check_evidence(net, evidence)
    n = len(net.nodes)
    free = [pos for pos, node in enumerate(net.nodes) if node.id not in evidence]
    radices = [len(net.nodes[pos].outcomes) for pos in free]
    total = 1
    for r in radices:
        total *= r
    if total > cap:
        raise StateSpaceCapError(
            f"{total} completions exceed the enumeration cap of {cap}"
        )
    ev_pos = [net.index[i] for i in evidence]
    ev_val = [int(evidence[i]) for i in evidence]
    for start in range(0, total, block):
        count = min(block, total - start)
        assignments = np.empty((count, n), dtype=np.int64)
        if ev_pos:
            assignments[:, ev_pos] = ev_val
        remainder = np.arange(start, start + count, dtype=np.int64)
        for pos, radix in zip(reversed(free), reversed(radices)):
            assignments[:, pos] = remainder % radix
            remainder //= radix
        joint = np.ones(count, dtype=np.float64)
        for pos in range(n):
            rows = net.row_indices(pos, assignments)
            joint *= net.cpts[pos].table[rows, assignments[:, pos]]
        yield assignments, joint


def exact_pr_evidence(
    net: BayesianNetwork,
    evidence: Evidence,
    *,
    method: str = "auto",
    cap: int = DEFAULT_STATE_CAP,
) -> float:
    """Probability of the evidence, summed over all completions."""
    if not evidence:
        return 1.0
    if _choose_method(net, evidence, method) == "enumerate":
        total = 0.0
        for _, joint in _completion_blocks(net, evidence, cap):
            total += float(joint.sum())
        return total
    factor = _run_elimination(net, evidence, keep=set(), cluster_cap=cap)
    return float(factor.table)


def exact_posterior_marginals(
    net: BayesianNetwork,
    evidence: Evidence,
    *,
    method: str = "auto",
    cap: int = DEFAULT_STATE_CAP,
) -> MarginalTable:
    """Posterior distribution of every non-evidence node given the evidence."""
    check_evidence(net, evidence)
    free = [pos for pos, node in enumerate(net.nodes) if node.id not in evidence]
    if _choose_method(net, evidence, method) == "enumerate":
        sums = {
            pos: np.zeros(len(net.nodes[pos].outcomes), dtype=np.float64)
            for pos in free
        }
        pr_evidence = 0.0
        for assignments, joint in _completion_blocks(net, evidence, cap):
            pr_evidence += float(joint.sum())
            for pos in free:
                sums[pos] += np.bincount(
                    assignments[:, pos],
                    weights=joint,
                    minlength=len(net.nodes[pos].outcomes),
                )
        if pr_evidence <= 0.0:
            raise ZeroEvidenceProbabilityError("evidence has probability zero")
        return {net.nodes[pos].id: sums[pos] / pr_evidence for pos in free}

    marginals: MarginalTable = {}
    for pos in free:
        factor = _run_elimination(net, evidence, keep={pos}, cluster_cap=cap)
        table = np.asarray(factor.table, dtype=np.float64)
        total = table.sum()
        if total <= 0.0:
            raise ZeroEvidenceProbabilityError("evidence has probability zero")
        marginals[net.nodes[pos].id] = table / total
    return marginals


def exact_icpt(
    net: BayesianNetwork,
    evidence: Evidence,
    node_id: str,
    *,
    method: str = "auto",
    cap: int = DEFAULT_STATE_CAP,
) -> IcptTable:
    """Pr(node | parents, evidence) in CPT layout, with reachability flags."""
    check_evidence(net, evidence)
    if node_id in evidence:
        raise ValueError(f"node {node_id!r} is an evidence node")
    pos = net.index[node_id]
    node = net.nodes[pos]
    rows = expected_row_count(net, node)
    outcomes = len(node.outcomes)
    mass = np.zeros((rows, outcomes), dtype=np.float64)

    if _choose_method(net, evidence, method) == "enumerate":
        for assignments, joint in _completion_blocks(net, evidence, cap):
            row_idx = net.row_indices(pos, assignments)
            flat = row_idx * outcomes + assignments[:, pos]
            mass += np.bincount(
                flat, weights=joint, minlength=rows * outcomes
            ).reshape(rows, outcomes)
    else:
        mass = _icpt_mass_by_elimination(net, evidence, pos, cap)

    row_mass = mass.sum(axis=1)
    reachable = row_mass > 0.0
    table = np.full((rows, outcomes), np.nan, dtype=np.float64)
    table[reachable] = mass[reachable] / row_mass[reachable, None]
    return IcptTable(node_id, table, reachable)


def exact_prior_marginal(
    net: BayesianNetwork,
    node_id: str,
    *,
    cluster_cap: int = DEFAULT_CLUSTER_CAP,
) -> np.ndarray:
    """Marginal prior of one node, via elimination over its ancestors.

    Nodes outside the ancestral closure integrate to one and are
    dropped before elimination, so this stays cheap even on networks
    whose full joint is far out of enumeration range.
    """
    pos = net.index[node_id]
    closure = {pos}
    stack = [pos]
    while stack:
        current = stack.pop()
        for p in net.parent_positions(current):
            if int(p) not in closure:
                closure.add(int(p))
                stack.append(int(p))
    factors = [_cpt_factor(net, q) for q in sorted(closure)]
    factor = _eliminate_factors(
        factors, keep={pos}, cluster_cap=cluster_cap, domain=_domains(net)
    )
    table = np.asarray(factor.table, dtype=np.float64)
    return table / table.sum()


# Variable elimination internals.  A factor is a table whose axes match
# its scope, scope held as a sorted tuple of node positions.


@dataclass
class _Factor:
    scope: tuple[int, ...]
    table: np.ndarray


def _domains(net: BayesianNetwork) -> list[int]:
    return [len(n.outcomes) for n in net.nodes]


def _cpt_factor(net: BayesianNetwork, pos: int) -> _Factor:
    node = net.nodes[pos]
    parent_pos = [net.index[p] for p in node.parents]
    dims = [len(net.nodes[q].outcomes) for q in parent_pos] + [len(node.outcomes)]
    scope = parent_pos + [pos]
    table = net.cpts[pos].table.reshape(dims)
    order = np.argsort(scope, kind="stable")
    return _Factor(
        tuple(scope[i] for i in order), np.ascontiguousarray(table.transpose(order))
    )


def _reduce_evidence(factor: _Factor, evidence_pos: dict[int, int]) -> _Factor:
    scope = list(factor.scope)
    table = factor.table
    for axis in range(len(scope) - 1, -1, -1):
        var = scope[axis]
        if var in evidence_pos:
            table = np.take(table, evidence_pos[var], axis=axis)
            del scope[axis]
    return _Factor(tuple(scope), table)


def _multiply(f1: _Factor, f2: _Factor, domain: list[int], cap: int) -> _Factor:
    scope = tuple(sorted(set(f1.scope) | set(f2.scope)))
    size = math.prod(domain[v] for v in scope)
    if size > cap:
        raise StateSpaceCapError(
            f"elimination cluster of {size} entries exceeds the cap of {cap}"
        )
    shape = tuple(domain[v] for v in scope)

    def aligned(f: _Factor) -> np.ndarray:
        expand = [domain[v] if v in f.scope else 1 for v in scope]
        order = [f.scope.index(v) for v in scope if v in f.scope]
        return f.table.transpose(order).reshape(expand)

    return _Factor(scope, np.broadcast_to(aligned(f1), shape) * aligned(f2))


def _sum_out(factor: _Factor, var: int) -> _Factor:
    axis = factor.scope.index(var)
    scope = tuple(v for v in factor.scope if v != var)
    return _Factor(scope, factor.table.sum(axis=axis))


def _eliminate_factors(
    factors: list[_Factor],
    keep: set[int],
    cluster_cap: int,
    domain: list[int],
) -> _Factor:
    to_eliminate = set()
    for f in factors:
        to_eliminate.update(f.scope)
    to_eliminate -= keep

    # Greedy min-weight order: repeatedly eliminate the variable whose
    # combined factor would be smallest.
    neighbors: dict[int, set[int]] = {}
    for f in factors:
        for v in f.scope:
            neighbors.setdefault(v, set()).update(f.scope)
    for v, ns in neighbors.items():
        ns.discard(v)

    order = []
    pending = set(to_eliminate)
    while pending:
        best = min(
            pending,
            key=lambda v: (
                math.prod(domain[u] for u in neighbors[v] | {v}),
                v,
            ),
        )
        order.append(best)
        pending.remove(best)
        around = neighbors.pop(best)
        for u in around:
            neighbors[u].discard(best)
            neighbors[u].update(w for w in around if w != u)

    live = list(factors)
    for var in order:
        group = [f for f in live if var in f.scope]
        live = [f for f in live if var not in f.scope]
        if not group:
            continue
        product = group[0]
        for f in group[1:]:
            product = _multiply(product, f, domain, cluster_cap)
        live.append(_sum_out(product, var))

    result = _Factor((), np.array(1.0))
    for f in live:
        result = _multiply(result, f, domain, cluster_cap)
    return result


def _run_elimination(
    net: BayesianNetwork,
    evidence: Evidence,
    keep: set[int],
    cluster_cap: int,
) -> _Factor:
    evidence_pos = {net.index[i]: int(v) for i, v in evidence.items()}
    if any(pos in evidence_pos for pos in keep):
        raise ValueError("cannot keep an evidence variable")
    factors = [
        _reduce_evidence(_cpt_factor(net, pos), evidence_pos)
        for pos in range(len(net.nodes))
    ]
    return _eliminate_factors(factors, keep, cluster_cap, _domains(net))


def _icpt_mass_by_elimination(net, evidence, pos, cluster_cap) -> np.ndarray:
    """Joint mass Pr(parents, X, e) reshaped to CPT layout."""
    node = net.nodes[pos]
    evidence_pos = {net.index[i]: int(v) for i, v in evidence.items()}
    parent_pos = [net.index[p] for p in node.parents]
    keep = {q for q in parent_pos + [pos] if q not in evidence_pos}
    factor = _run_elimination(net, evidence, keep, cluster_cap)

    # Spread the kept-variable table into full CPT layout.  Parent axes
    # observed as evidence exist only at their observed value; all other
    # rows are impossible and stay at zero mass.
    scope_order = sorted(keep)
    dims = [len(net.nodes[q].outcomes) for q in parent_pos] + [len(node.outcomes)]
    full = np.zeros(dims, dtype=np.float64)
    indexer: list[object] = []
    for q in parent_pos + [pos]:
        if q in evidence_pos:
            indexer.append(evidence_pos[q])
        else:
            indexer.append(slice(None))
    layout_axes = [q for q in parent_pos + [pos] if q not in evidence_pos]
    perm = [scope_order.index(q) for q in layout_axes]
    full[tuple(indexer)] = np.transpose(factor.table, perm) if perm else factor.table
    rows = expected_row_count(net, node)
    return full.reshape(rows, len(node.outcomes))
