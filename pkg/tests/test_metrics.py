import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multisem.dataset import SampleRecord
from multisem.errors import DimensionMismatch, EmptyEvaluation, MissingPrediction, ParseError, UnknownLabel
from multisem.hierarchy import LabelHierarchy
from multisem.metrics import (
    InterpretabilityReport,
    MetricConfig,
    PredictionRecord,
    Quadrant,
    QuadrantCounts,
    accumulate,
    build_report,
    classify_sample,
    coarse_accuracy,
    fine_accuracy,
    ia,
    if_score,
    ip,
    ir,
    merge,
    read_predictions,
    write_predictions,
)
from multisem.rules import Threshold, TopK

from oracle import reference_counts

counts_st = st.builds(QuadrantCounts, *(st.integers(0, 500) for _ in range(4)))


def test_classify():
    assert classify_sample(True, True) is Quadrant.FTCT
    assert classify_sample(True, False) is Quadrant.FTCF
    assert classify_sample(False, True) is Quadrant.FFCT
    assert classify_sample(False, False) is Quadrant.FFCF


def test_accumulate_and_merge():
    c = QuadrantCounts()
    for q in Quadrant:
        c = accumulate(c, q)
    assert c == QuadrantCounts(1, 1, 1, 1)
    x = QuadrantCounts(3, 1, 4, 1)
    assert merge(x, QuadrantCounts()) == x
    assert merge(x, c) == merge(c, x) == QuadrantCounts(4, 2, 5, 2)


def test_indexes_worked_example():
    c = QuadrantCounts(60, 0, 25, 15)
    assert ia(c) == pytest.approx(0.60)
    assert ir(c) == pytest.approx(60 / 85)
    assert ir(c) == pytest.approx(0.70588, abs=1e-5)
    assert ip(c) == 1.0
    assert coarse_accuracy(c) == pytest.approx(0.85)
    assert fine_accuracy(c) == pytest.approx(0.60)


def test_index_edge_cases():
    assert ia(QuadrantCounts(5, 0, 0, 0)) == 1.0
    assert ia(QuadrantCounts(0, 1, 2, 3)) == 0.0
    assert ir(QuadrantCounts(4, 3, 0, 1)) == 1.0
    assert ir(QuadrantCounts(0, 3, 0, 1)) is None
    assert ip(QuadrantCounts(1, 1, 0, 0)) == 0.5
    assert ip(QuadrantCounts(0, 0, 5, 5)) is None
    for fn in (ia, coarse_accuracy, fine_accuracy):
        with pytest.raises(EmptyEvaluation):
            fn(QuadrantCounts())
    with pytest.raises(ValueError):
        QuadrantCounts(-1, 0, 0, 0)


def test_if_score():
    assert if_score(1.0, 0.6146) == pytest.approx(2 * 0.6146 / 1.6146, abs=1e-15)
    assert if_score(1.0, 0.6146) == pytest.approx(0.76130, abs=1e-5)
    assert if_score(0.9947, 0.7544) == pytest.approx(0.85804, abs=1e-5)
    assert if_score(0.37, 0.37) == pytest.approx(0.37)
    # 2*v*v/(v+v) rounds one ulp below v for this value
    v = 498 / 1070
    assert if_score(v, v) == v
    assert if_score(None, 0.5) is None
    assert if_score(0.0, 0.0) is None
    # alpha=0 gives the product over the sum
    assert if_score(0.5, 0.5, MetricConfig(alpha=0.0)) == pytest.approx(0.25)


@given(counts_st)
def test_identities(c):
    if c.total == 0:
        return
    a = ia(c)
    if ir(c) is not None:
        assert abs(a - ir(c) * coarse_accuracy(c)) <= 1e-12
        assert a <= ir(c) + 1e-15
    if ip(c) is not None:
        assert abs(a - ip(c) * fine_accuracy(c)) <= 1e-12
        assert a <= ip(c) + 1e-15
    assert coarse_accuracy(c) >= a and fine_accuracy(c) >= a
    f = if_score(ip(c), ir(c))
    if f is not None:
        assert min(ip(c), ir(c)) - 1e-15 <= f <= max(ip(c), ir(c)) + 1e-15


@given(st.lists(st.sampled_from(list(Quadrant)), max_size=60), st.integers(0, 60))
def test_parallel_merge_equals_sequential(qs, cut):
    def fold(items):
        c = QuadrantCounts()
        for q in items:
            c = accumulate(c, q)
        return c
    assert merge(fold(qs[:cut]), fold(qs[cut:])) == fold(qs)


def tiny_hierarchy():
    return LabelHierarchy(["p", "a", "b", "c"], ["X", "Y"], {"a": "X", "b": "X", "c": "Y"}, {"p"})


def random_instance(rng, n, h):
    recs, preds = [], []
    by = {c: [f for f in h.fine_labels if h.fine_to_coarse.get(f) == c] for c in h.coarse_labels}
    for i in range(n):
        c = h.coarse_labels[rng.integers(h.n_coarse)]
        pool = by[c]
        fine = set(rng.choice(pool, size=rng.integers(1, len(pool) + 1), replace=False))
        if h.public_fines and rng.random() < 0.4:
            fine |= h.public_fines
        recs.append(SampleRecord(f"s{i}", "test", frozenset(fine), c))
        # coarse-grained score values make ties likely
        preds.append(PredictionRecord(f"s{i}", rng.integers(0, 5, h.n_fine) / 4, rng.integers(0, 4, h.n_coarse) / 3))
    return recs, preds


def test_report_matches_oracle():
    h = tiny_hierarchy()
    rng = np.random.default_rng(0)
    recs, preds = random_instance(rng, 200, h)
    for rule, name in ((TopK(), "topk"), (Threshold(0.7), "threshold")):
        rep = build_report(recs, preds, h, rule)
        want = reference_counts([h.fine_indices(r.fine) for r in recs], [h.coarse_index(r.coarse) for r in recs],
                                [p.fine_scores for p in preds], [p.coarse_scores for p in preds], name)
        assert rep.counts.to_dict() == want


def test_report_perfect_and_permutation():
    h = tiny_hierarchy()
    recs = [SampleRecord("a", "test", frozenset({"a", "p"}), "X"), SampleRecord("b", "test", frozenset({"c"}), "Y")]
    preds = [PredictionRecord("a", np.array([0.9, 0.8, 0.1, 0.1]), np.array([0.7, 0.3])),
             PredictionRecord("b", np.array([0.1, 0.2, 0.1, 0.95]), np.array([0.1, 0.9]))]
    for rule in (TopK(), Threshold(0.7)):
        rep = build_report(recs, preds, h, rule)
        assert (rep.ia, rep.ir, rep.ip, rep.if_score) == (1.0, 1.0, 1.0, 1.0)
        assert build_report(recs, preds[::-1], h, rule) == rep


def test_report_errors():
    h = tiny_hierarchy()
    recs = [SampleRecord("a", "test", frozenset({"a"}), "X")]
    with pytest.raises(MissingPrediction, match="'a'"):
        build_report(recs, [], h)
    with pytest.raises(DimensionMismatch):
        build_report(recs, [PredictionRecord("a", np.zeros(3), np.zeros(2))], h)
    with pytest.raises(DimensionMismatch):
        build_report(recs, [PredictionRecord("a", fine_pred=frozenset({9}), coarse_pred=0)], h)


def test_report_json_schema():
    h = tiny_hierarchy()
    recs = [SampleRecord("a", "test", frozenset({"a"}), "X")]
    rep = build_report(recs, [PredictionRecord("a", fine_pred=frozenset({2}), coarse_pred=0)], h, Threshold(0.7))
    doc = json.loads(rep.to_json())
    assert set(doc) == {"counts", "ia", "ir", "ip", "if", "alpha", "coarse_accuracy", "fine_accuracy", "rule", "n"}
    assert doc["counts"] == {"ftct": 0, "ftcf": 0, "ffct": 1, "ffcf": 0}
    assert doc["ip"] is None and doc["if"] is None and doc["ir"] == 0.0
    assert doc["rule"] == {"name": "threshold", "tau": 0.7}


def test_predictions_io():
    h = tiny_hierarchy()
    preds = [PredictionRecord("a", np.array([0.1, 0.2, 0.3, 0.4]), np.array([0.25, 0.75])),
             PredictionRecord("b", fine_pred=frozenset({1, 3}), coarse_pred=1)]
    back = read_predictions(write_predictions(preds))
    np.testing.assert_array_equal(back[0].fine_scores, preds[0].fine_scores)
    assert back[1] == preds[1]
    named = read_predictions(b'{"id":"c","fine_pred":["a","p"],"coarse_pred":"X"}\n', h)
    assert named[0].fine_pred == {0, 1} and named[0].coarse_pred == 0
    with pytest.raises(UnknownLabel):
        read_predictions(b'{"id":"c","fine_pred":["zz"],"coarse_pred":"X"}\n', h)
    with pytest.raises(ParseError, match="line 2"):
        read_predictions(b'{"id":"c","fine_pred":[],"coarse_pred":0}\n{"id":1}\n')


def test_report_from_counts_summary():
    rep = InterpretabilityReport.from_counts(QuadrantCounts(60, 0, 25, 15), {"name": "topk"})
    assert "IA=0.6000" in rep.summary() and rep.n == 100
