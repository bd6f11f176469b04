"""Line-oriented text format for networks, plus evidence string parsing.

A network file looks like::

    # anything after '#' is a comment
    network chain3

    node A
    outcomes false true
    row 0.7 0.3

    node B
    outcomes false true
    parents A
    row 0.9 0.1
    row 0.2 0.8

Records are introduced by ``node <id>``.  Each record needs an
``outcomes`` line and one ``row`` line per parent configuration, rows
in lexicographic parent order with the first parent most significant.
``parents`` may be omitted for root nodes.  An optional ``name`` line
sets a display name (rest of the line, verbatim).  Ids and outcome
labels are whitespace-free tokens and may not contain ``=`` or ``,``,
which the evidence syntax reserves.

Evidence on the command line is written ``NodeId=OutcomeLabel``, with
multiple bindings separated by commas or repeated flags.
"""

from __future__ import annotations

import os

from .errors import InvalidNetworkError, NetworkFormatError
from .model import (
    BayesianNetwork,
    Cpt,
    Evidence,
    Node,
    evidence_from_labels,
    normalize_rows,
    validate_network,
)

_RESERVED = set("=,")


def _check_token(token: str, kind: str, line: int) -> str:
    if any(c in _RESERVED for c in token):
        raise NetworkFormatError(
            f"{kind} {token!r} may not contain '=' or ','", line
        )
    return token


class _NodeRecord:
    def __init__(self, node_id, line):
        self.id = node_id
        self.line = line
        self.name = ""
        self.outcomes = None
        self.parents = []
        self.rows = []


def parse_network_text(text: str) -> BayesianNetwork:
    """Parse the text format and return a validated, renormalized network."""
    name = None
    records: list[_NodeRecord] = []
    current: _NodeRecord | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "network":
            if name is not None:
                raise NetworkFormatError("duplicate network line", lineno)
            if current is not None:
                raise NetworkFormatError(
                    "network line must come before node records", lineno
                )
            if not rest:
                raise NetworkFormatError("network line needs a name", lineno)
            name = rest
        elif keyword == "node":
            tokens = rest.split()
            if len(tokens) != 1:
                raise NetworkFormatError("node line needs exactly one id", lineno)
            current = _NodeRecord(_check_token(tokens[0], "node id", lineno), lineno)
            records.append(current)
        elif keyword in ("outcomes", "parents", "row", "name"):
            if current is None:
                raise NetworkFormatError(
                    f"{keyword!r} line outside any node record", lineno
                )
            if keyword == "outcomes":
                if current.outcomes is not None:
                    raise NetworkFormatError(
                        f"duplicate outcomes line for node {current.id!r}", lineno
                    )
                tokens = rest.split()
                if not tokens:
                    raise NetworkFormatError("outcomes line is empty", lineno)
                current.outcomes = [
                    _check_token(t, "outcome label", lineno) for t in tokens
                ]
            elif keyword == "parents":
                current.parents = [
                    _check_token(t, "parent id", lineno) for t in rest.split()
                ]
            elif keyword == "name":
                current.name = rest
            else:
                if current.outcomes is None:
                    raise NetworkFormatError(
                        f"row line before outcomes for node {current.id!r}", lineno
                    )
                try:
                    values = [float(t) for t in rest.split()]
                except ValueError as exc:
                    raise NetworkFormatError(f"bad row value: {exc}", lineno)
                if len(values) != len(current.outcomes):
                    raise NetworkFormatError(
                        f"row has {len(values)} entries, node {current.id!r} "
                        f"has {len(current.outcomes)} outcomes",
                        lineno,
                    )
                current.rows.append(values)
        else:
            raise NetworkFormatError(f"unknown keyword {keyword!r}", lineno)

    if name is None:
        raise NetworkFormatError("missing network line")
    if not records:
        raise NetworkFormatError("no node records found")

    nodes = []
    cpts = []
    for rec in records:
        if rec.outcomes is None:
            raise NetworkFormatError(
                f"node {rec.id!r} has no outcomes line", rec.line
            )
        if not rec.rows:
            raise NetworkFormatError(f"node {rec.id!r} has no row lines", rec.line)
        nodes.append(
            Node(rec.id, tuple(rec.outcomes), tuple(rec.parents), rec.name)
        )
        cpts.append(Cpt(rec.id, rec.rows))

    net = BayesianNetwork(name, nodes, cpts)
    problems = validate_network(net)
    if problems:
        raise InvalidNetworkError(problems)
    cpts = [Cpt(c.node_id, normalize_rows(c.table)) for c in net.cpts]
    return BayesianNetwork(name, list(net.nodes), cpts)


def network_to_text(net: BayesianNetwork) -> str:
    """Serialize with full float precision so load(save(net)) round-trips."""
    lines = [f"network {net.name}"]
    for node in net.nodes:
        lines.append("")
        lines.append(f"node {node.id}")
        if node.name and node.name != node.id:
            lines.append(f"name {node.name}")
        lines.append("outcomes " + " ".join(node.outcomes))
        if node.parents:
            lines.append("parents " + " ".join(node.parents))
        for row in net.cpt(node.id).table:
            lines.append("row " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load_network(path: str | os.PathLike) -> BayesianNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network_text(fh.read())


def save_network(net: BayesianNetwork, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(network_to_text(net))


def parse_evidence(net: BayesianNetwork, specs: list[str]) -> Evidence:
    """Parse ``NodeId=OutcomeLabel`` bindings, comma-separated or repeated."""
    labels: dict[str, str] = {}
    for spec in specs:
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            node_id, eq, label = part.partition("=")
            if not eq or not node_id or not label:
                raise NetworkFormatError(
                    f"evidence {part!r} is not of the form NodeId=OutcomeLabel"
                )
            if node_id in labels and labels[node_id] != label:
                raise NetworkFormatError(
                    f"conflicting evidence for node {node_id!r}"
                )
            labels[node_id] = label
    return evidence_from_labels(net, labels)
