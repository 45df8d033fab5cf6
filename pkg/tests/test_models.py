import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from previsit.models import (
    AtomicAssertion,
    CausalNetwork,
    ClusterResult,
    DiseaseKnowledge,
    EmrDocument,
    KnowledgeEntry,
    Question,
    Questionnaire,
    SimilarityMatrix,
    errors_only,
    validate_assertions,
    validate_network,
)


def a(i, text="fact", when=""):
    return AtomicAssertion(i, text, when)


def test_valid_assertion_has_no_violations():
    report = validate_assertions([a(0, "patient has a persistent headache", "3 days ago")])
    assert report == []


def test_empty_list_is_valid():
    assert validate_assertions([]) == []


def test_empty_assert_is_one_violation():
    assert len(validate_assertions([a(0, "", "")])) == 1


def test_duplicate_ids_reported():
    report = validate_assertions([a(0, "x"), a(0, "y")])
    assert any("duplicate" in r for r in report)


def test_conjunction_is_only_a_warning():
    report = validate_assertions([a(0, "patient has a headache and fever")])
    assert len(report) == 1 and report[0].startswith("warning:")
    assert errors_only(report) == []


def test_validate_network_examples():
    assert validate_network(CausalNetwork("e", (a(0), a(1)), ((0, 1),))) == []
    assert any("self-loop" in p for p in validate_network(CausalNetwork("e", (a(0),), ((0, 0),))))
    assert any("duplicate" in p for p in validate_network(CausalNetwork("e", (a(0), a(1)), ((0, 1), (0, 1)))))
    assert any("missing" in p for p in validate_network(CausalNetwork("e", (a(0), a(1)), ((0, 2),))))


def _satisfies_invariants(n, edges):
    ok_range = all(0 <= s < n and 0 <= d < n for s, d in edges)
    no_loops = all(s != d for s, d in edges)
    no_dups = len(set(edges)) == len(edges)
    return ok_range and no_loops and no_dups


@pytest.mark.parametrize("n", [1, 2, 3])
def test_validate_network_exhaustive_small(n):
    # every edge list of length <= 3 over indices -1..n (out of range included)
    idx = range(-1, n + 1)
    pairs = list(itertools.product(idx, idx))
    nodes = tuple(a(i) for i in range(n))
    for length in range(4):
        for edges in itertools.product(pairs, repeat=length):
            report = validate_network(CausalNetwork("e", nodes, edges))
            assert (report == []) == _satisfies_invariants(n, list(edges)), edges


def test_validate_network_exhaustive_four_nodes_simple_graphs():
    nodes = tuple(a(i) for i in range(4))
    pairs = [(s, d) for s in range(4) for d in range(4)]
    # all subsets of the 16 ordered pairs (diagonal included)
    for mask in range(1 << 16):
        edges = [p for b, p in enumerate(pairs) if mask >> b & 1]
        report = validate_network(CausalNetwork("e", nodes, edges))
        assert (report == []) == all(s != d for s, d in edges)


texts = st.text(min_size=1, max_size=20)


@given(texts, st.text(max_size=10), st.integers(0, 50))
def test_assertion_roundtrip(fact, when, i):
    x = AtomicAssertion(i, fact, when)
    d = json.loads(json.dumps(x.to_dict()))
    assert set(d) == {"assert", "relative time"}
    assert AtomicAssertion.from_dict(d, i) == x


@given(st.lists(st.tuples(texts, st.text(max_size=8)), min_size=1, max_size=5), st.data())
def test_network_roundtrip(node_specs, data):
    nodes = tuple(AtomicAssertion(i, f, t) for i, (f, t) in enumerate(node_specs))
    n = len(nodes)
    edges = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=6))
    net = CausalNetwork("E1", nodes, tuple(edges))
    assert CausalNetwork.from_dict(json.loads(json.dumps(net.to_dict()))) == net


def test_other_roundtrips():
    emr = EmrDocument("E1", "some text", "I10", "Cardiology")
    assert EmrDocument.from_dict(json.loads(json.dumps(emr.to_dict()))) == emr
    sm = SimilarityMatrix(("a", "b"), ((1.0, 0.25), (0.25, 0.5)))
    assert SimilarityMatrix.from_dict(json.loads(json.dumps(sm.to_dict()))) == sm
    cr = ClusterResult({"a": 0, "b": 1}, 2, 0.5)
    assert ClusterResult.from_dict(json.loads(json.dumps(cr.to_dict()))) == cr
    net = CausalNetwork("a", (a(0, "x"), a(1, "y", "3 days ago")), ((0, 1),))
    dk = DiseaseKnowledge("I10", (KnowledgeEntry(net, 1.0, 3),), 0.4)
    assert DiseaseKnowledge.from_dict(json.loads(json.dumps(dk.to_dict()))) == dk
    q = Questionnaire(
        "personal",
        "a",
        (
            Question(0, "Do you cough?", "multiple_choice", ("Yes", "No"), True, (0,), "why"),
            Question(1, "Anything else?", "free_text", (), True, (), None),
        ),
    )
    assert Questionnaire.from_dict(json.loads(json.dumps(q.to_dict()))) == q


def test_knowledge_file_schema():
    net = CausalNetwork("a", (a(0, "x"), a(1, "y")), ((0, 1),))
    d = DiseaseKnowledge("I10", (KnowledgeEntry(net, 1.0, 2),), 0.5).to_dict()
    assert set(d) == {"disease_code", "cutoff", "entries"}
    assert set(d["entries"][0]) == {"weight", "member_count", "medoid_emr_id", "network"}


def test_emr_rejects_blank_text():
    with pytest.raises(ValueError):
        EmrDocument.from_dict({"id": "x", "text": "   "})


def test_render_lists_options_and_free_text():
    q = Questionnaire("personal", "E1", (Question(0, "Do you cough?", "multiple_choice", ("Yes", "No")),))
    text = q.render()
    assert "1. Do you cough?" in text and "A. Yes" in text and "Other" in text
