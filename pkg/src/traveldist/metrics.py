"""Confusion-matrix metrics, macro averaging, one-vs-rest ROC curves and AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "precision", "f1")


def confusion(y_true, y_pred, n_classes: int = 4) -> np.ndarray:
    """Counts with rows = true label, columns = predicted label."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _ratio(num, den) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def binary_metrics(tp: int, fp: int, fn: int, tn: int) -> tuple[dict[str, float], list[str]]:
    """Accuracy, sensitivity, specificity, precision and F1; zero denominators give 0 and a flag."""
    flags = []
    acc, f = _ratio(tp + tn, tp + fp + fn + tn)
    if f:
        flags.append("accuracy")
    sens, f = _ratio(tp, tp + fn)
    if f:
        flags.append("sensitivity")
    spec, f = _ratio(tn, tn + fp)
    if f:
        flags.append("specificity")
    prec, f = _ratio(tp, tp + fp)
    if f:
        flags.append("precision")
    f1, f = _ratio(2 * prec * sens, prec + sens)
    if f:
        flags.append("f1")
    return {"accuracy": acc, "sensitivity": sens, "specificity": spec, "precision": prec, "f1": f1}, flags


@dataclass
class MetricsReport:
    confusion: np.ndarray
    per_class: list[dict[str, float]]
    macro: dict[str, float]
    overall_accuracy: float
    degenerate: list[str] = field(default_factory=list)
    roc: list[tuple[np.ndarray, np.ndarray] | None] | None = None
    auc_per_class: list[float | None] | None = None
    macro_auc: float | None = None

    def to_json(self) -> dict:
        out = {
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "macro": self.macro,
            "overall_accuracy": self.overall_accuracy,
            "degenerate": self.degenerate,
        }
        if self.auc_per_class is not None:
            out["auc_per_class"] = self.auc_per_class
            out["macro_auc"] = self.macro_auc
        return out


def basic_metrics(cm: np.ndarray) -> MetricsReport:
    """Per-class one-vs-rest reduction of the confusion matrix, then unweighted means."""
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    per_class, degenerate = [], []
    for c in range(cm.shape[0]):
        tp = int(cm[c, c])
        fn = int(cm[c, :].sum()) - tp
        fp = int(cm[:, c].sum()) - tp
        tn = total - tp - fn - fp
        vals, flags = binary_metrics(tp, fp, fn, tn)
        per_class.append(vals)
        degenerate += [f"class {c}: {name}" for name in flags]
    macro = {m: float(np.mean([pc[m] for pc in per_class])) for m in METRIC_NAMES}
    return MetricsReport(cm, per_class, macro, float(np.trace(cm)) / total, degenerate)


def macro_f1(y_true, y_pred, n_classes: int = 4) -> float:
    return basic_metrics(confusion(y_true, y_pred, n_classes)).macro["f1"]


def roc_curve(positive: np.ndarray, score: np.ndarray) -> tuple[np.ndarray, np.ndarray, int, int, int]:
    """ROC points over all distinct score thresholds, tied scores stepping together.

    Returns integer (fp, tp) count arrays starting at (0, 0), plus P, N and twice
    the trapezoidal area in count units, so callers can divide exactly once.
    """
    positive = np.asarray(positive, dtype=bool)
    score = np.asarray(score, dtype=float)
    if not np.all(np.isfinite(score)):
        raise ValueError("scores must be finite")
    order = np.argsort(-score, kind="stable")
    s, pos = score[order], positive[order]
    tp_cum = np.cumsum(pos, dtype=np.int64)
    fp_cum = np.cumsum(~pos, dtype=np.int64)
    last_of_group = np.r_[s[1:] != s[:-1], True] if len(s) else np.zeros(0, dtype=bool)
    tp = np.r_[0, tp_cum[last_of_group]]
    fp = np.r_[0, fp_cum[last_of_group]]
    P, N = int(pos.sum()), int((~pos).sum())
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return fp, tp, P, N, twice_area


def binary_auc(positive, score) -> float | None:
    fp, tp, P, N, twice_area = roc_curve(positive, score)
    if P == 0 or N == 0:
        return None
    return twice_area / (2 * P * N)


def roc_auc_ovr(y_true, scores: np.ndarray, n_classes: int = 4):
    """Per-class (FPR, TPR) curves, per-class AUC and their mean over defined classes.

    A class absent from ``y_true`` (or present in every row) has undefined AUC;
    it is reported as None and left out of the macro mean.
    """
    y_true = np.asarray(y_true, dtype=int)
    scores = np.asarray(scores, dtype=float)
    curves, aucs, flags = [], [], []
    for c in range(n_classes):
        fp, tp, P, N, twice_area = roc_curve(y_true == c, scores[:, c])
        if P == 0 or N == 0:
            curves.append(None)
            aucs.append(None)
            flags.append(f"class {c}: AUC undefined")
            continue
        curves.append((fp / N, tp / P))
        aucs.append(twice_area / (2 * P * N))
    defined = [a for a in aucs if a is not None]
    macro = float(np.mean(defined)) if defined else None
    return curves, aucs, macro, flags


def evaluate(y_true, y_pred, scores: np.ndarray | None = None, n_classes: int = 4) -> MetricsReport:
    rep = basic_metrics(confusion(y_true, y_pred, n_classes))
    if scores is not None and len(y_true):
        curves, aucs, macro, flags = roc_auc_ovr(y_true, scores, n_classes)
        rep.roc, rep.auc_per_class, rep.macro_auc = curves, aucs, macro
        rep.degenerate += flags
    return rep
