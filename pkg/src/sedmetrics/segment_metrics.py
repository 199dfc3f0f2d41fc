"""Segment-level ROC, macro partial AUC, and segment-based F1 / error rate.

Segments are pooled across recordings within each class (micro pooling);
averaging over classes is unweighted (macro). Classes whose pooled segments
are all-positive or all-negative have no defined ROC and are skipped, with
an error if nothing remains.
"""

import warnings
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .longform import SegmentLabelMatrix, SegmentScoreMatrix


@dataclass(frozen=True)
class SegMPAUCParams:
    max_fpr: float = 0.1
    segment_length: float = 1.0
    binarization_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.max_fpr <= 1.0:
            raise ValidationError(f"max_fpr {self.max_fpr} outside (0, 1]")
        if self.segment_length <= 0:
            raise ValidationError("segment_length must be positive")


class UndefinedROCError(ValidationError):
    """A class has zero positive or zero negative segments."""


@dataclass
class SegmentF1ERResult:
    per_class: dict[str, dict[str, float]]  # f1, er, threshold, tp, fp, fn, positives
    macro_f1: float
    macro_er: float


class SegmentEvaluator:
    """Pools aligned segment score/label matrices and answers ROC, partial
    AUC, and F1/ER queries, optionally with per-recording multiplicities."""

    def __init__(
        self,
        scores: Mapping[str, SegmentScoreMatrix],
        labels: Mapping[str, SegmentLabelMatrix],
        class_labels: Sequence[str] | None = None,
    ):
        if set(scores) != set(labels):
            raise ValidationError("segment scores and labels cover different recordings")
        self.recording_ids = sorted(scores)
        if not self.recording_ids:
            raise ValidationError("no recordings to evaluate")
        first = scores[self.recording_ids[0]]
        self.class_labels = tuple(class_labels or first.class_labels)
        rows_scores, rows_labels, rows_rec = [], [], []
        for k, rec in enumerate(self.recording_ids):
            s, l = scores[rec], labels[rec]
            if s.class_labels != self.class_labels or l.class_labels != self.class_labels:
                raise ValidationError(f"recording {rec!r}: class columns differ")
            if s.scores.shape != l.labels.shape:
                raise ValidationError(f"recording {rec!r}: score/label shapes differ")
            rows_scores.append(s.scores)
            rows_labels.append(l.labels)
            rows_rec.append(np.full(s.scores.shape[0], k, dtype=np.int64))
        self._scores = np.concatenate(rows_scores, axis=0)
        self._labels = np.concatenate(rows_labels, axis=0)
        self._rec_idx = np.concatenate(rows_rec)

    def _segment_weights(self, weights: Mapping[str, int] | None) -> np.ndarray:
        if weights is None:
            return np.ones(self._scores.shape[0], dtype=np.int64)
        per_rec = np.array(
            [int(weights.get(r, 0)) for r in self.recording_ids], dtype=np.int64
        )
        return per_rec[self._rec_idx]

    def roc(
        self, class_label: str, weights: Mapping[str, int] | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Pooled ROC points (fpr, tpr) for one class, (0,0) endpoint included."""
        try:
            col = self.class_labels.index(class_label)
        except ValueError:
            raise ValidationError(f"unknown class {class_label!r}") from None
        w = self._segment_weights(weights)
        return _binary_roc(self._scores[:, col], self._labels[:, col], w, class_label)

    def seg_mpauc(
        self,
        params: SegMPAUCParams,
        weights: Mapping[str, int] | None = None,
        warn: bool | None = None,
    ) -> tuple[float, dict[str, float], tuple[str, ...]]:
        """Macro partial AUC: (macro value, per-class values, skipped classes)."""
        if warn is None:
            warn = weights is None
        per_class: dict[str, float] = {}
        skipped: list[str] = []
        for cls in self.class_labels:
            try:
                fpr, tpr = self.roc(cls, weights)
            except UndefinedROCError as err:
                skipped.append(cls)
                if warn:
                    warnings.warn(str(err), stacklevel=2)
                continue
            per_class[cls] = partial_auc(fpr, tpr, params.max_fpr)
        if not per_class:
            raise ValidationError("no class has a defined segment ROC")
        macro = float(np.mean(sorted(per_class.values())))
        return macro, per_class, tuple(skipped)

    def f1_er(
        self,
        threshold: float = 0.5,
        mode: Literal["fixed", "optimal"] = "fixed",
        weights: Mapping[str, int] | None = None,
    ) -> SegmentF1ERResult:
        """Segment-based F1 and error rate, at a fixed or per-class optimal
        threshold (optimal maximizes class F1 over distinct segment scores,
        ties resolved to the lowest threshold)."""
        w = self._segment_weights(weights)
        per_class: dict[str, dict[str, float]] = {}
        f1s, ers = [], []
        for j, cls in enumerate(self.class_labels):
            s = self._scores[:, j]
            y = self._labels[:, j]
            positives = int(np.sum(w * y))
            if positives == 0:
                continue
            if mode == "optimal":
                tau, f1, tp, fp, fn = _best_f1_threshold(s, y, w)
            else:
                tau = threshold
                tp, fp, fn = _counts_at(s, y, w, tau)
                denom = 2 * tp + fp + fn
                f1 = 2.0 * tp / denom if denom else 0.0
            er = (fp + fn) / positives
            per_class[cls] = {
                "f1": float(f1),
                "er": float(er),
                "threshold": float(tau),
                "tp": int(tp),
                "fp": int(fp),
                "fn": int(fn),
                "positives": positives,
            }
            f1s.append(f1)
            ers.append(er)
        macro_f1 = float(np.mean(f1s)) if f1s else 0.0
        macro_er = float(np.mean(ers)) if ers else 0.0
        return SegmentF1ERResult(per_class=per_class, macro_f1=macro_f1, macro_er=macro_er)


def _binary_roc(scores, labels, w, class_label=""):
    pos_w = int(np.sum(w * labels))
    neg_w = int(np.sum(w * ~labels))
    if pos_w == 0 or neg_w == 0:
        raise UndefinedROCError(
            f"class {class_label!r} has {pos_w} positive and {neg_w} negative segments; "
            "ROC undefined"
        )
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    wy = (w * labels)[order]
    wn = (w * ~labels)[order]
    tp_cum = np.cumsum(wy)
    fp_cum = np.cumsum(wn)
    # one operating point per distinct score value (threshold = that value)
    boundary = np.flatnonzero(np.diff(s) != 0)
    last = np.append(boundary, s.size - 1)
    fpr = np.concatenate(([0.0], fp_cum[last] / neg_w))
    tpr = np.concatenate(([0.0], tp_cum[last] / pos_w))
    return fpr, tpr


def _counts_at(s, y, w, tau) -> tuple[int, int, int]:
    predicted = s >= tau
    tp = int(np.sum(w * (predicted & y)))
    fp = int(np.sum(w * (predicted & ~y)))
    fn = int(np.sum(w * (~predicted & y)))
    return tp, fp, fn


def _best_f1_threshold(s, y, w):
    values = np.unique(s)[::-1]  # descending
    order = np.argsort(-s, kind="stable")
    wy = (w * y)[order]
    wn = (w * ~y)[order]
    tp_cum = np.cumsum(wy)
    fp_cum = np.cumsum(wn)
    boundary = np.flatnonzero(np.diff(s[order]) != 0)
    last = np.append(boundary, s.size - 1)
    positives = int(np.sum(w * y))
    tp = tp_cum[last]
    fp = fp_cum[last]
    fn = positives - tp
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 0.0)
    best = f1.max()
    # ties -> lowest threshold = last index in descending value order
    idx = np.flatnonzero(f1 == best)[-1]
    return values[idx], float(f1[idx]), int(tp[idx]), int(fp[idx]), int(fn[idx])


def segment_roc(
    scores: Mapping[str, SegmentScoreMatrix],
    labels: Mapping[str, SegmentLabelMatrix],
    class_label: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled segment-level ROC for one class across recordings."""
    return SegmentEvaluator(scores, labels).roc(class_label)


def partial_auc(fpr: np.ndarray, tpr: np.ndarray, max_fpr: float) -> float:
    """Normalized trapezoidal area under (fpr, tpr) for fpr in [0, max_fpr],
    with linear interpolation at the cut."""
    area = 0.0
    for i in range(len(fpr) - 1):
        x0, x1 = fpr[i], fpr[i + 1]
        y0, y1 = tpr[i], tpr[i + 1]
        if x0 >= max_fpr:
            break
        if x1 > max_fpr:
            y1 = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0)
            x1 = max_fpr
        area += (x1 - x0) * (y0 + y1) / 2.0
    return float(area / max_fpr)


def seg_mpauc(
    per_class_rocs: Mapping[str, tuple[np.ndarray, np.ndarray]],
    params: SegMPAUCParams,
) -> float:
    """Macro (unweighted) mean of per-class normalized partial AUCs."""
    if not per_class_rocs:
        raise ValidationError("no class ROCs supplied")
    values = [partial_auc(fpr, tpr, params.max_fpr) for fpr, tpr in per_class_rocs.values()]
    return float(np.mean(sorted(values)))
