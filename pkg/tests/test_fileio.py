import numpy as np
import pytest

from aisbn import (
    InvalidNetworkError,
    NetworkFormatError,
    load_network,
    network_to_text,
    parse_evidence,
    parse_network_text,
    save_network,
)


def test_load_chain3(chain3_file, chain3):
    net = load_network(chain3_file)
    assert net.name == "chain3"
    assert [n.id for n in net.nodes] == ["A", "B", "C"]
    assert net.node("B").parents == ("A",)
    np.testing.assert_allclose(net.cpt("B").table, chain3.cpt("B").table)


def test_rows_renormalized_exactly():
    text = (
        "network t\n"
        "node A\n"
        "outcomes x y z\n"
        "row 0.3333333333 0.3333333333 0.3333333334\n"
    )
    net = parse_network_text(text)
    assert net.cpt("A").table[0].sum() == 1.0


def test_round_trip(diamond, tmp_path):
    path = tmp_path / "diamond.bn"
    save_network(diamond, path)
    reloaded = load_network(path)
    assert reloaded.name == diamond.name
    for node in diamond.nodes:
        other = reloaded.node(node.id)
        assert other.outcomes == node.outcomes
        assert other.parents == node.parents
        np.testing.assert_array_equal(
            reloaded.cpt(node.id).table, diamond.cpt(node.id).table
        )


def test_round_trip_text(mixed9):
    assert network_to_text(parse_network_text(network_to_text(mixed9))) == network_to_text(mixed9)


@pytest.mark.parametrize(
    "text, message",
    [
        ("node A\noutcomes x y\nrow 0.5 0.5\n", "missing network line"),
        ("network t\n", "no node records"),
        ("network t\nnode A\nrow 0.5 0.5\n", "row line before outcomes"),
        ("network t\nnode A\noutcomes x y\n", "no row lines"),
        ("network t\nnode A\noutcomes x y\nrow 0.5\n", "has 1 entries"),
        ("network t\nnode A\noutcomes x y\nrow 0.5 oops\n", "bad row value"),
        ("network t\nnode A B\noutcomes x y\nrow 0.5 0.5\n", "exactly one id"),
        ("network t\nbogus A\n", "unknown keyword"),
        ("network t\nnetwork t\n", "duplicate network"),
        ("network t\nnode A\noutcomes x=1 y\nrow 0.5 0.5\n", "may not contain"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(NetworkFormatError, match=message):
        parse_network_text(text)


def test_parse_reports_line_numbers():
    text = "network t\nnode A\noutcomes x y\nrow 0.5 0.5 0.5\n"
    with pytest.raises(NetworkFormatError, match="line 4"):
        parse_network_text(text)


def test_load_rejects_invalid_network():
    text = (
        "network t\n"
        "node A\noutcomes x y\nparents B\nrow 0.5 0.5\nrow 0.5 0.5\n"
        "node B\noutcomes x y\nparents A\nrow 0.5 0.5\nrow 0.5 0.5\n"
    )
    with pytest.raises(InvalidNetworkError, match="cycle"):
        parse_network_text(text)


def test_comments_and_blank_lines(chain3_file):
    text = "# header\n\nnetwork t # trailing\nnode A # node\noutcomes x y\nrow 0.5 0.5\n"
    net = parse_network_text(text)
    assert net.name == "t"
    assert net.node("A").outcomes == ("x", "y")


def test_parse_evidence(chain3):
    assert parse_evidence(chain3, ["C=true"]) == {"C": 1}
    assert parse_evidence(chain3, ["C=true,A=false"]) == {"C": 1, "A": 0}
    assert parse_evidence(chain3, ["C=true", "A=false"]) == {"C": 1, "A": 0}
    assert parse_evidence(chain3, []) == {}
    with pytest.raises(NetworkFormatError, match="NodeId=OutcomeLabel"):
        parse_evidence(chain3, ["C"])
    with pytest.raises(NetworkFormatError, match="conflicting"):
        parse_evidence(chain3, ["C=true", "C=false"])
    with pytest.raises(InvalidNetworkError, match="no outcome"):
        parse_evidence(chain3, ["C=maybe"])
