import warnings

import numpy as np
import pytest

from literoute import (
    aggregate_folds,
    balanced_accuracy,
    confusion,
    fairness,
    fairness_delta,
    macro_f1,
    malignant_recall,
)
from literoute.errors import (
    EmptyInput,
    LengthMismatch,
    NoEvaluableSubgroup,
    NoMalignantSamples,
    OutOfRangeLabel,
    SubgroupMismatch,
)
from literoute.metrics import predict_labels

import oracles

BINARY_CM = np.array([[8, 2], [4, 6]])


def test_confusion_basics():
    assert (confusion([0, 1, 2], [0, 1, 2], 3) == np.eye(3)).all()
    cm = confusion([0, 1, 2, 2], [0, 0, 0, 0], 3)
    assert cm[:, 0].sum() == 4 and cm[:, 1:].sum() == 0
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0], 2)
    with pytest.raises(OutOfRangeLabel):
        confusion([0, 3], [0, 0], 3)


def test_confusion_random_vs_counting():
    rng = np.random.default_rng(5)
    y, yhat = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
    assert confusion(y, yhat, 4).tolist() == oracles.confusion(y.tolist(), yhat.tolist(), 4)


def test_argmax_ties_lowest_index():
    assert predict_labels([[0.4, 0.4, 0.2], [0.1, 0.45, 0.45]]).tolist() == [0, 1]


def test_macro_f1_examples():
    assert macro_f1(np.eye(3) * 5) == 1.0
    assert macro_f1(BINARY_CM) == pytest.approx(0.696969697, abs=1e-9)
    # class 2 never true and never predicted contributes 0
    assert macro_f1(np.array([[3, 0, 0], [0, 3, 0], [0, 0, 0]])) == pytest.approx(2 / 3)


def test_balanced_accuracy_examples():
    assert balanced_accuracy(np.eye(2) * 4) == 1.0
    assert balanced_accuracy(BINARY_CM) == pytest.approx(0.7)
    rng = np.random.default_rng(11)
    y, yhat = rng.integers(0, 5, 5000), rng.integers(0, 5, 5000)
    assert abs(balanced_accuracy(confusion(y, yhat, 5)) - 0.2) <= 0.05


def test_malignant_recall(three_class_taxonomy):
    t = three_class_taxonomy
    assert malignant_recall([2, 2, 0], [2, 2, 1], t) == 1.0
    assert malignant_recall([2, 2, 2, 2], [2, 2, 2, 0], t) == 0.75
    with pytest.raises(NoMalignantSamples):
        malignant_recall([0, 1], [0, 1], t)


def test_malignant_recall_binarised():
    from literoute import ClassTaxonomy
    t = ClassTaxonomy(("b", "m1", "m2"), {0}, {1, 2}, {1, 2})
    assert malignant_recall([1, 2], [2, 1], t) == 1.0


def test_fairness_examples(binary_taxonomy):
    single = fairness([1, 1, 0], [1, 0, 0], ["a", "a", "a"], binary_taxonomy)
    assert single.tpr_worst == single.tpr_mean == 0.5 and single.tpr_gap == 0.0

    labels = [1] * 10 + [1] * 5 + [0] * 3
    preds = [1] * 8 + [0] * 2 + [1] * 3 + [0] * 2 + [0] * 3
    groups = ["x"] * 10 + ["y"] * 5 + ["z"] * 3
    r = fairness(labels, preds, groups, binary_taxonomy)
    assert r.tpr == {"x": 0.8, "y": 0.6}
    assert (r.tpr_mean, r.tpr_worst, r.tpr_gap) == pytest.approx((0.7, 0.6, 0.2))
    assert r.excluded == {"z": 3}
    with pytest.raises(NoEvaluableSubgroup):
        fairness([0, 0], [0, 1], ["a", "b"], binary_taxonomy)


def test_fairness_random_vs_oracle(three_class_taxonomy):
    rng = np.random.default_rng(8)
    y = rng.integers(0, 3, 120)
    yhat = rng.integers(0, 3, 120)
    g = [f"g{v}" for v in rng.integers(0, 4, 120)]
    r = fairness(y, yhat, g, three_class_taxonomy)
    ref = oracles.fairness_summary(y.tolist(), yhat.tolist(), g, {2})
    assert r.tpr == pytest.approx(ref["tpr"], abs=1e-12)
    assert (r.tpr_mean, r.tpr_worst, r.tpr_gap) == pytest.approx((ref["mean"], ref["worst"], ref["gap"]), abs=1e-12)


def test_fairness_delta(binary_taxonomy):
    from literoute.metrics import FairnessReport
    a = FairnessReport({"x": 0.6, "y": 0.7}, 0.65, 0.60, 0.10)
    b = FairnessReport({"x": 0.623, "y": 0.923}, 0.773, 0.623, 0.30)
    assert fairness_delta(a, a) == (0.0, 0.0)
    d_wg, d_gap = fairness_delta(a, b)
    assert d_wg == pytest.approx(-0.023) and d_gap == pytest.approx(0.20)
    with pytest.raises(SubgroupMismatch):
        fairness_delta(a, FairnessReport({"x": 0.5}, 0.5, 0.5, 0.0))


def test_adding_subgroup_monotone(binary_taxonomy):
    rng = np.random.default_rng(3)
    y = np.ones(60, dtype=int)
    yhat = rng.integers(0, 2, 60)
    g = [f"g{i % 3}" for i in range(60)]
    sub = [i for i in range(60) if g[i] != "g2"]
    full = fairness(y, yhat, g, binary_taxonomy)
    part = fairness(y[sub], yhat[sub], [g[i] for i in sub], binary_taxonomy)
    assert full.tpr_worst <= part.tpr_worst
    assert full.tpr_gap >= part.tpr_gap


def test_aggregate_folds():
    assert aggregate_folds([0.5, 0.5, 0.5]) == (0.5, 0.0)
    m, s = aggregate_folds([0.4, 0.6])
    assert m == pytest.approx(0.5) and s == pytest.approx(0.1414213562, abs=1e-9)
    with pytest.warns(UserWarning):
        assert aggregate_folds([0.3]) == (0.3, 0.0)
    with pytest.raises(EmptyInput):
        aggregate_folds([])


def test_order_invariance(three_class_taxonomy):
    rng = np.random.default_rng(4)
    y, yhat = rng.integers(0, 3, 80), rng.integers(0, 3, 80)
    g = rng.integers(0, 3, 80)
    perm = rng.permutation(80)
    a = fairness(y, yhat, g, three_class_taxonomy)
    b = fairness(y[perm], yhat[perm], g[perm], three_class_taxonomy)
    assert a == b
    assert macro_f1(confusion(y, yhat, 3)) == macro_f1(confusion(y[perm], yhat[perm], 3))
