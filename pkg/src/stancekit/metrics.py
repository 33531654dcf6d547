"""Confusion matrices, per-class one-vs-rest metrics, and the weighted
related/unrelated pair score.

Per-class metrics come from the one-vs-rest reduction of the 4x4 matrix:
TP is the diagonal cell, FP the rest of the column, FN the rest of the
row, TN everything else; precision, recall, F1, and binary accuracy
follow, with every 0/0 ratio defined as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import N_CLASSES, STANCE_ORDER, Stance
from .errors import MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p]: pairs with true stance t predicted as p (class order
    Agree, Disagree, Discuss, Unrelated)."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    support: int  # pairs whose true stance is this class


@dataclass(frozen=True)
class EvaluationReport:
    """Everything one evaluation pass produces, ready for rendering."""

    n_pairs: int
    confusion: ConfusionMatrix
    per_class: dict[Stance, ClassMetrics]
    overall_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    fnc_points: float
    fnc_max_points: float
    fnc_relative: float


def confusion(truths, preds) -> ConfusionMatrix:
    """Tally a 4x4 confusion matrix from aligned truth/prediction lists."""
    if len(truths) != len(preds):
        raise MetricsError(
            f"{len(truths)} truths vs {len(preds)} predictions",
            code="length-mismatch",
        )
    if len(truths) == 0:
        raise MetricsError("cannot tally an empty prediction set", code="empty")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(truths, preds):
        counts[t.index, p.index] += 1
    return ConfusionMatrix(counts=counts)


def one_vs_rest(cm: ConfusionMatrix, cls: Stance) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) for one class."""
    c = cls.index
    counts = cm.counts
    tp = int(counts[c, c])
    fp = int(counts[:, c].sum()) - tp
    fn = int(counts[c, :].sum()) - tp
    tn = cm.total - tp - fp - fn
    return tp, fp, fn, tn


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def class_metrics(cm: ConfusionMatrix, cls: Stance) -> ClassMetrics:
    """One-vs-rest precision, recall, F1, and binary accuracy for a class."""
    tp, fp, fn, tn = one_vs_rest(cm, cls)
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    accuracy = _ratio(tp + tn, tp + tn + fp + fn)
    return ClassMetrics(
        precision=precision, recall=recall, f1=f1, accuracy=accuracy, support=tp + fn
    )


def overall_accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of pairs on the confusion-matrix diagonal."""
    if cm.total == 0:
        raise MetricsError("empty confusion matrix", code="empty")
    return float(np.trace(cm.counts)) / cm.total


def _pair_points(t: Stance, p: Stance) -> tuple[float, float]:
    """(earned, attainable) weighted points for one truth/prediction pair.

    0.25 for getting the related/unrelated split right; when both sides are
    related, a further 0.75 for the exact stance or 0.25 for a related-but-
    wrong stance. A perfectly classified related pair is worth 1.0, an
    unrelated one 0.25.
    """
    t_related = t is not Stance.UNRELATED
    p_related = p is not Stance.UNRELATED
    earned = 0.0
    if t_related == p_related:
        earned += 0.25
    if t_related and p_related:
        earned += 0.75 if t is p else 0.25
    return earned, 1.0 if t_related else 0.25


def fnc_score_from_confusion(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Weighted pair score from tallied counts; the score depends only on
    how many pairs fall in each (truth, prediction) cell."""
    points = 0.0
    max_points = 0.0
    for t in STANCE_ORDER:
        for p in STANCE_ORDER:
            n = int(cm.counts[t.index, p.index])
            if n == 0:
                continue
            earned, attainable = _pair_points(t, p)
            points += n * earned
            max_points += n * attainable
    if max_points == 0.0:
        raise MetricsError("cannot score an empty prediction set", code="empty")
    return points, max_points, points / max_points


def fnc_score(truths, preds) -> tuple[float, float, float]:
    """Weighted pair score: (points, max_points, points / max_points)."""
    return fnc_score_from_confusion(confusion(truths, preds))


def macro_average(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Unweighted class means of (precision, recall, f1)."""
    per = [class_metrics(cm, cls) for cls in STANCE_ORDER]
    return (
        float(np.mean([m.precision for m in per])),
        float(np.mean([m.recall for m in per])),
        float(np.mean([m.f1 for m in per])),
    )


def micro_average(cm: ConfusionMatrix) -> tuple[float, float]:
    """(precision, recall) from pooled one-vs-rest counts. For single-label
    multiclass data both coincide with overall accuracy."""
    tp_sum = fp_sum = fn_sum = 0
    for cls in STANCE_ORDER:
        tp, fp, fn, _ = one_vs_rest(cm, cls)
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
    return _ratio(tp_sum, tp_sum + fp_sum), _ratio(tp_sum, tp_sum + fn_sum)


def report_from_confusion(cm: ConfusionMatrix) -> EvaluationReport:
    """Derive the full report from tallied counts alone (every emitted
    metric, the weighted score included, is a function of the matrix)."""
    per_class = {cls: class_metrics(cm, cls) for cls in STANCE_ORDER}
    macro_p, macro_r, macro_f = macro_average(cm)
    micro_p, micro_r = micro_average(cm)
    points, max_points, relative = fnc_score_from_confusion(cm)
    return EvaluationReport(
        n_pairs=cm.total,
        confusion=cm,
        per_class=per_class,
        overall_accuracy=overall_accuracy(cm),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        micro_precision=micro_p,
        micro_recall=micro_r,
        fnc_points=points,
        fnc_max_points=max_points,
        fnc_relative=relative,
    )


def evaluate_predictions(truths, preds) -> EvaluationReport:
    """Bundle every metric for one truth/prediction alignment."""
    return report_from_confusion(confusion(truths, preds))
