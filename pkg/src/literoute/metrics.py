"""Classification and subgroup-fairness metrics.

Sensitivity is binarised over the malignant set: a malignant case counts as
detected if the predicted class is any malignant class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .core import ClassTaxonomy
from .errors import (
    EmptyInput,
    LengthMismatch,
    NoEvaluableSubgroup,
    NoMalignantSamples,
    OutOfRangeLabel,
    SubgroupMismatch,
)


def predict_labels(probs) -> np.ndarray:
    """Argmax per row; ties go to the lowest class index."""
    return np.argmax(np.asarray(probs, dtype=float), axis=1)


def confusion(labels, predictions, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=int).ravel()
    yhat = np.asarray(predictions, dtype=int).ravel()
    if y.shape != yhat.shape:
        raise LengthMismatch(f"{y.size} labels vs {yhat.size} predictions")
    for arr in (y, yhat):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise OutOfRangeLabel(f"values must lie in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y, yhat), 1)
    return cm


def macro_f1(cm) -> float:
    cm = np.asarray(cm, dtype=float)
    if cm.size == 0:
        raise EmptyInput("empty confusion matrix")
    tp = np.diag(cm)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    # F1 = 2TP / (2TP + FP + FN) is the same as 2PR/(P+R), and 0 when undefined
    denom = pred_tot + true_tot
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


def balanced_accuracy(cm) -> float:
    cm = np.asarray(cm, dtype=float)
    true_tot = cm.sum(axis=1)
    present = true_tot > 0
    if not present.any():
        raise EmptyInput("no true instances in confusion matrix")
    return float(np.mean(np.diag(cm)[present] / true_tot[present]))


def _malignant_mask(values, taxonomy: ClassTaxonomy) -> np.ndarray:
    return np.isin(np.asarray(values, dtype=int), sorted(taxonomy.malignant_set))


def malignant_recall(labels, predictions, taxonomy: ClassTaxonomy) -> float:
    pos = _malignant_mask(labels, taxonomy)
    if not pos.any():
        raise NoMalignantSamples("no malignant-labelled samples")
    hit = _malignant_mask(predictions, taxonomy)
    return float(hit[pos].sum() / pos.sum())


@dataclass(frozen=True)
class FairnessReport:
    tpr: dict  # subgroup -> TPR over included subgroups
    tpr_mean: float
    tpr_worst: float
    tpr_gap: float
    positives: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)  # subgroup -> sample count

    def to_dict(self) -> dict:
        return {
            "tpr": {str(k): v for k, v in self.tpr.items()},
            "positives": {str(k): v for k, v in self.positives.items()},
            "tpr_mean": self.tpr_mean,
            "tpr_worst": self.tpr_worst,
            "tpr_gap": self.tpr_gap,
            "excluded": {str(k): v for k, v in self.excluded.items()},
        }


def _group_key(g):
    return "" if g is None else str(g)


def fairness(labels, predictions, subgroups: Sequence[Hashable], taxonomy: ClassTaxonomy) -> FairnessReport:
    """Per-subgroup malignant TPR with mean, worst group and max-min gap.

    Subgroups without any malignant case are excluded and listed separately.
    Missing subgroup values form their own group ``""``.
    """
    y = np.asarray(labels, dtype=int)
    yhat = np.asarray(predictions, dtype=int)
    groups = np.asarray([_group_key(g) for g in subgroups], dtype=object)
    if not (y.size == yhat.size == groups.size):
        raise LengthMismatch("labels, predictions and subgroups differ in length")
    pos = _malignant_mask(y, taxonomy)
    hit = _malignant_mask(yhat, taxonomy)

    tpr, positives, excluded = {}, {}, {}
    for g in sorted(set(groups.tolist())):
        in_g = groups == g
        n_pos = int((pos & in_g).sum())
        if n_pos == 0:
            excluded[g] = int(in_g.sum())
            continue
        positives[g] = n_pos
        tpr[g] = float((hit & pos & in_g).sum() / n_pos)
    if not tpr:
        raise NoEvaluableSubgroup("no subgroup contains a malignant case")
    vals = np.array(list(tpr.values()))
    return FairnessReport(
        tpr=tpr,
        tpr_mean=float(vals.mean()),
        tpr_worst=float(vals.min()),
        tpr_gap=float(vals.max() - vals.min()),
        positives=positives,
        excluded=excluded,
    )


def fairness_delta(eco: FairnessReport, baseline: FairnessReport) -> tuple[float, float]:
    """(worst-group TPR gain, gap reduction); positive means eco is better."""
    if set(eco.tpr) != set(baseline.tpr):
        raise SubgroupMismatch(f"subgroups differ: {sorted(eco.tpr)} vs {sorted(baseline.tpr)}")
    return eco.tpr_worst - baseline.tpr_worst, baseline.tpr_gap - eco.tpr_gap


def aggregate_folds(values) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation across folds."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise EmptyInput("no fold values to aggregate")
    if v.size == 1:
        warnings.warn("single fold: std reported as 0", stacklevel=2)
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1))


def classification_summary(labels, predictions, taxonomy: ClassTaxonomy) -> dict:
    cm = confusion(labels, predictions, taxonomy.n_classes)
    out = {"macro_f1": macro_f1(cm), "balanced_accuracy": balanced_accuracy(cm)}
    try:
        out["malignant_recall"] = malignant_recall(labels, predictions, taxonomy)
    except NoMalignantSamples:
        out["malignant_recall"] = float("nan")
    return out
