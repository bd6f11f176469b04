import numpy as np
import pytest

from aisbn import (
    BayesianNetwork,
    Cpt,
    InvalidNetworkError,
    Node,
    evidence_ancestor_set,
    evidence_from_labels,
    joint_probability,
    topological_order,
    validate_network,
)
from aisbn.model import normalize_rows


def test_chain3_is_valid(chain3):
    assert validate_network(chain3) == []


def test_topological_order_chain(chain3):
    assert topological_order(chain3) == ["A", "B", "C"]


def test_topological_order_ties_break_by_id():
    # Declared in reverse so declaration order cannot masquerade as the
    # tie-break.
    nodes = [
        Node("Z", ("a", "b")),
        Node("M", ("a", "b")),
        Node("Q", ("a", "b"), ("M", "Z")),
    ]
    cpts = [
        Cpt("Z", [[0.5, 0.5]]),
        Cpt("M", [[0.5, 0.5]]),
        Cpt("Q", [[0.5, 0.5]] * 4),
    ]
    net = BayesianNetwork("ties", nodes, cpts)
    assert topological_order(net) == ["M", "Z", "Q"]


def test_cycle_detected():
    nodes = [
        Node("A", ("f", "t"), ("C",)),
        Node("B", ("f", "t"), ("A",)),
        Node("C", ("f", "t"), ("B",)),
    ]
    cpts = [
        Cpt("A", [[0.5, 0.5]] * 2),
        Cpt("B", [[0.5, 0.5]] * 2),
        Cpt("C", [[0.5, 0.5]] * 2),
    ]
    net = BayesianNetwork("cyclic", nodes, cpts)
    with pytest.raises(InvalidNetworkError, match="cycle"):
        topological_order(net)
    assert any("cycle" in p for p in validate_network(net))


def test_validate_reports_row_sum_error(chain3):
    nodes = list(chain3.nodes)
    cpts = [chain3.cpt("A"), Cpt("B", [[0.5, 0.4], [0.2, 0.8]]), chain3.cpt("C")]
    net = BayesianNetwork("bad", nodes, cpts)
    problems = validate_network(net)
    assert any("row 0 sums to 0.9" in p for p in problems)


def test_validate_reports_shape_mismatch(chain3):
    cpts = [chain3.cpt("A"), Cpt("B", [[0.9, 0.1]]), chain3.cpt("C")]
    net = BayesianNetwork("bad", list(chain3.nodes), cpts)
    assert any("shape" in p for p in validate_network(net))


def test_validate_reports_degenerate_nodes():
    nodes = [Node("A", ("only",)), Node("B", ("f", "t"), ("A", "A"))]
    cpts = [Cpt("A", [[1.0]]), Cpt("B", [[0.5, 0.5]] * 1)]
    net = BayesianNetwork("bad", nodes, cpts)
    problems = validate_network(net)
    assert any("at least 2 outcomes" in p for p in problems)
    assert any("parent twice" in p for p in problems)


def test_unknown_parent_rejected_at_construction():
    with pytest.raises(InvalidNetworkError, match="unknown parent"):
        BayesianNetwork(
            "bad",
            [Node("A", ("f", "t"), ("Ghost",))],
            [Cpt("A", [[0.5, 0.5], [0.5, 0.5]])],
        )


def test_duplicate_node_id_rejected():
    with pytest.raises(InvalidNetworkError, match="duplicate node id"):
        BayesianNetwork(
            "bad",
            [Node("A", ("f", "t")), Node("A", ("f", "t"))],
            [Cpt("A", [[0.5, 0.5]])],
        )


def test_evidence_ancestors_chain(chain3):
    assert evidence_ancestor_set(chain3, {"C": 1}) == {"A", "B"}
    assert evidence_ancestor_set(chain3, {"B": 0}) == {"A"}
    assert evidence_ancestor_set(chain3, {"A": 1}) == set()


def test_evidence_ancestors_exclude_evidence_and_isolated(diamond):
    # B is evidence and also an ancestor of D; it stays out of the set.
    assert evidence_ancestor_set(diamond, {"D": 1, "B": 0}) == {"A", "C"}
    # E only descends from D; evidence on D never reaches it.
    assert "E" not in evidence_ancestor_set(diamond, {"D": 1})


def test_joint_probability_chain(chain3):
    assert joint_probability(chain3, np.array([1, 1, 1])) == pytest.approx(0.216, abs=1e-15)
    assert joint_probability(chain3, np.array([0, 0, 0])) == pytest.approx(0.504, abs=1e-15)


def test_joint_probability_rejects_bad_assignments(chain3):
    with pytest.raises(ValueError, match="length"):
        joint_probability(chain3, np.array([0, 1]))
    with pytest.raises(ValueError, match="out of range"):
        joint_probability(chain3, np.array([0, 2, 0]))


def test_row_layout_first_parent_most_significant():
    # P has parents (A, B) with 2 and 3 outcomes: row = a * 3 + b.
    nodes = [
        Node("A", ("a0", "a1")),
        Node("B", ("b0", "b1", "b2")),
        Node("P", ("p0", "p1"), ("A", "B")),
    ]
    rows = [[r / 10.0, 1.0 - r / 10.0] for r in range(1, 7)]
    cpts = [
        Cpt("A", [[0.5, 0.5]]),
        Cpt("B", [[0.2, 0.3, 0.5]]),
        Cpt("P", rows),
    ]
    net = BayesianNetwork("layout", nodes, cpts)
    pos = net.index["P"]
    for a in range(2):
        for b in range(3):
            assignment = np.array([a, b, 0])
            assert net.row_index(pos, assignment) == a * 3 + b
    batch = np.array([[a, b, 0] for a in range(2) for b in range(3)])
    np.testing.assert_array_equal(net.row_indices(pos, batch), np.arange(6))


def test_normalize_rows_exact_sum():
    table = np.array([[1.0, 1.0, 1.0]]) / 3.0
    normalized = normalize_rows(table)
    assert normalized[0].sum() == 1.0
    rough = np.array([[0.5 + 4e-10, 0.5]])
    assert normalize_rows(rough)[0].sum() == 1.0
    with pytest.raises(InvalidNetworkError, match="outside tolerance"):
        normalize_rows(np.array([[0.5, 0.4]]))


def test_cpt_table_is_frozen(chain3):
    with pytest.raises(ValueError):
        chain3.cpt("A").table[0, 0] = 0.5


def test_evidence_from_labels(chain3):
    assert evidence_from_labels(chain3, {"C": "true"}) == {"C": 1}
    with pytest.raises(InvalidNetworkError, match="no outcome"):
        evidence_from_labels(chain3, {"C": "maybe"})
    with pytest.raises(InvalidNetworkError, match="unknown node"):
        evidence_from_labels(chain3, {"Zed": "true"})
