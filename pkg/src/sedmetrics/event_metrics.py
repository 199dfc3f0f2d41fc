"""Intersection-based event matching, PSD-ROC construction, PSDS, and
collar-based F1.

The ROC here is threshold-independent: candidate thresholds are every
distinct score value of a class (plus a sentinel above the maximum), so the
enumerated operating points describe the exact step curve of the system.
Counts stay integer until the final rate divisions, which keeps weighted
(bootstrap) evaluation exact.
"""

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import TIME_EPS, DurationMap, Event, ScoreTimeline
from .errors import ValidationError
from .kernels import sweep_clip_counts

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class PSDSParams:
    """PSDS1 parameterization: intersection criteria, inter-class standard
    deviation penalty, and the FP-rate budget in FPs/hour."""

    rho_dtc: float = 0.7
    rho_gtc: float = 0.7
    alpha_st: float = 1.0
    e_max: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.rho_dtc <= 1.0:
            raise ValidationError(f"rho_dtc {self.rho_dtc} outside (0, 1]")
        if not 0.0 < self.rho_gtc <= 1.0:
            raise ValidationError(f"rho_gtc {self.rho_gtc} outside (0, 1]")
        if self.alpha_st < 0.0:
            raise ValidationError(f"alpha_st {self.alpha_st} must be >= 0")
        if self.e_max <= 0.0:
            raise ValidationError(f"e_max {self.e_max} must be > 0")


@dataclass(frozen=True)
class CollarParams:
    onset_collar: float = 0.2
    offset_collar_rate: float = 0.2
    threshold: float = 0.5


@dataclass
class OperatingPoints:
    """Per-class operating points, one per candidate threshold (ascending;
    the last threshold is the +inf sentinel with no detections)."""

    thresholds: np.ndarray = field(repr=False)
    tp_rates: np.ndarray = field(repr=False)
    fp_rates: np.ndarray = field(repr=False)


@dataclass
class ROCCurve:
    """PSD-ROC: per-class step curves sampled on the merged FP-rate grid plus
    the effective (std-penalized) curve."""

    class_labels: tuple[str, ...]
    fp_grid: np.ndarray = field(repr=False)
    class_tpr: np.ndarray = field(repr=False)  # [n_grid, n_classes]
    effective_tpr: np.ndarray = field(repr=False)  # [n_grid], not clamped at 0
    operating_points: dict[str, OperatingPoints] = field(repr=False)
    skipped_classes: tuple[str, ...]
    alpha_st: float
    e_max: float


def match_events_dtc_gtc(
    detections: Sequence[Event],
    references: Sequence[Event],
    rho_dtc: float,
    rho_gtc: float,
) -> dict[str, tuple[int, int, int]]:
    """Intersection-based matching of explicit event lists.

    A detection is DTC-relevant iff its summed intersection with same-class,
    same-clip references covers at least ``rho_dtc`` of its duration;
    otherwise it counts as a false positive. A reference is a true positive
    iff DTC-relevant detections cover at least ``rho_gtc`` of it.

    Returns per class ``(tp_count, fp_count, ref_count)``.
    """
    det_by_key: dict[tuple[str, str], list[Event]] = defaultdict(list)
    ref_by_key: dict[tuple[str, str], list[Event]] = defaultdict(list)
    for d in detections:
        det_by_key[(d.clip_id, d.class_label)].append(d)
    for r in references:
        ref_by_key[(r.clip_id, r.class_label)].append(r)

    classes = {c for _, c in det_by_key} | {c for _, c in ref_by_key}
    counts = {c: [0, 0, 0] for c in sorted(classes)}
    for key in sorted(set(det_by_key) | set(ref_by_key)):
        _, cls = key
        dets = sorted(det_by_key.get(key, []), key=lambda e: (e.onset, e.offset))
        refs = sorted(ref_by_key.get(key, []), key=lambda e: (e.onset, e.offset))
        covered = [0.0] * len(refs)
        for d in dets:
            inter = 0.0
            for r in refs:
                lo = max(d.onset, r.onset)
                hi = min(d.offset, r.offset)
                if hi > lo:
                    inter += hi - lo
            if inter / d.duration >= rho_dtc:
                for k, r in enumerate(refs):
                    lo = max(d.onset, r.onset)
                    hi = min(d.offset, r.offset)
                    if hi > lo:
                        covered[k] += hi - lo
            else:
                counts[cls][1] += 1
        for k, r in enumerate(refs):
            if covered[k] / r.duration >= rho_gtc:
                counts[cls][0] += 1
        counts[cls][2] += len(refs)
    return {c: tuple(v) for c, v in counts.items()}


class PSDSEvaluator:
    """Precomputes per-clip, per-threshold detection counts so the PSD-ROC
    (and PSDS) can be re-evaluated cheaply under clip reweighting.

    ``scores`` defines the evaluated clip universe; reference clips must be a
    subset. Candidate thresholds per class are the distinct score values
    across all clips plus a +inf sentinel.
    """

    def __init__(
        self,
        scores: Mapping[str, ScoreTimeline],
        references: Mapping[str, Sequence[Event]],
        params: PSDSParams,
        durations: DurationMap,
        class_labels: Sequence[str] | None = None,
        backend: str | None = None,
    ):
        self.params = params
        self.clip_ids = sorted(scores)
        missing_scores = sorted(set(references) - set(scores))
        if missing_scores:
            raise ValidationError(
                f"references name clips without scores: {', '.join(missing_scores)}"
            )
        missing_durs = sorted(set(self.clip_ids) - set(durations))
        if missing_durs:
            raise ValidationError(
                f"clips missing from durations: {', '.join(missing_durs)}"
            )
        if class_labels is None:
            class_labels = sorted(
                {e.class_label for evs in references.values() for e in evs}
            )
        self.class_labels = tuple(class_labels)
        self.durations = np.array([durations[c] for c in self.clip_ids], dtype=np.float64)

        refs_by_key: dict[tuple[str, str], list[Event]] = defaultdict(list)
        for clip_id, events in references.items():
            for e in events:
                refs_by_key[(clip_id, e.class_label)].append(e)

        # per class: global threshold grid and per-clip count matrices
        self._thresholds: dict[str, np.ndarray] = {}
        self._tp: dict[str, np.ndarray] = {}  # [n_clips, n_thr] int64
        self._fp: dict[str, np.ndarray] = {}
        self._n_ref: dict[str, np.ndarray] = {}  # [n_clips] int64
        for cls in self.class_labels:
            per_clip = []
            all_values = []
            n_ref = np.zeros(len(self.clip_ids), dtype=np.int64)
            for k, clip_id in enumerate(self.clip_ids):
                timeline = scores[clip_id]
                values = timeline.column(cls)
                refs = sorted(
                    refs_by_key.get((clip_id, cls), []),
                    key=lambda e: (e.onset, e.offset),
                )
                n_ref[k] = len(refs)
                own_thr = np.unique(values)
                tp, fp = sweep_clip_counts(
                    timeline.breakpoints,
                    values,
                    np.array([r.onset for r in refs]),
                    np.array([r.offset for r in refs]),
                    own_thr,
                    params.rho_dtc,
                    params.rho_gtc,
                    backend=backend,
                )
                per_clip.append((own_thr, tp, fp))
                all_values.append(own_thr)
            grid = np.append(np.unique(np.concatenate(all_values)), np.inf)
            n_t = grid.size
            tp_mat = np.zeros((len(self.clip_ids), n_t), dtype=np.int64)
            fp_mat = np.zeros((len(self.clip_ids), n_t), dtype=np.int64)
            for k, (own_thr, tp, fp) in enumerate(per_clip):
                idx = np.searchsorted(own_thr, grid, side="left")
                valid = idx < own_thr.size
                tp_mat[k, valid] = tp[idx[valid]]
                fp_mat[k, valid] = fp[idx[valid]]
            self._thresholds[cls] = grid
            self._tp[cls] = tp_mat
            self._fp[cls] = fp_mat
            self._n_ref[cls] = n_ref

    def _weight_vector(self, weights: Mapping[str, int] | None) -> np.ndarray:
        if weights is None:
            return np.ones(len(self.clip_ids), dtype=np.int64)
        return np.array([int(weights.get(c, 0)) for c in self.clip_ids], dtype=np.int64)

    def curve(self, weights: Mapping[str, int] | None = None, warn: bool | None = None) -> ROCCurve:
        """Build the PSD-ROC, optionally with per-clip multiplicities."""
        if warn is None:
            warn = weights is None
        w = self._weight_vector(weights)
        hours = float(np.sum(w * self.durations)) / SECONDS_PER_HOUR
        ops: dict[str, OperatingPoints] = {}
        included: list[str] = []
        skipped: list[str] = []
        for cls in self.class_labels:
            ref_total = int(np.sum(w * self._n_ref[cls]))
            tp_total = np.sum(w[:, None] * self._tp[cls], axis=0, dtype=np.int64)
            fp_total = np.sum(w[:, None] * self._fp[cls], axis=0, dtype=np.int64)
            fp_rates = fp_total / hours
            if ref_total == 0:
                skipped.append(cls)
                if warn:
                    warnings.warn(
                        f"class {cls!r} has no reference events; excluded from PSD-ROC",
                        stacklevel=2,
                    )
                continue
            tp_rates = tp_total / ref_total
            ops[cls] = OperatingPoints(self._thresholds[cls], tp_rates, fp_rates)
            included.append(cls)
        if not included:
            raise ValidationError("no class has reference events; PSD-ROC undefined")

        fp_grid = np.unique(np.concatenate([ops[c].fp_rates for c in included]))
        class_tpr = np.empty((fp_grid.size, len(included)))
        for j, cls in enumerate(included):
            order = np.argsort(ops[cls].fp_rates, kind="stable")
            fp_sorted = ops[cls].fp_rates[order]
            support = np.maximum.accumulate(ops[cls].tp_rates[order])
            idx = np.searchsorted(fp_sorted, fp_grid, side="right") - 1
            class_tpr[:, j] = support[idx]
        mean = class_tpr.mean(axis=1)
        std = class_tpr.std(axis=1)  # population
        effective = mean - self.params.alpha_st * std
        return ROCCurve(
            class_labels=tuple(included),
            fp_grid=fp_grid,
            class_tpr=class_tpr,
            effective_tpr=effective,
            operating_points=ops,
            skipped_classes=tuple(skipped),
            alpha_st=self.params.alpha_st,
            e_max=self.params.e_max,
        )

    def psds(self, weights: Mapping[str, int] | None = None) -> float:
        return psds(self.curve(weights), self.params)

    def per_class_psds(self, weights: Mapping[str, int] | None = None) -> dict[str, float]:
        """Normalized partial area under each single-class curve (no penalty)."""
        curve = self.curve(weights)
        return {
            cls: _step_area(curve.fp_grid, curve.class_tpr[:, j], self.params.e_max)
            / self.params.e_max
            for j, cls in enumerate(curve.class_labels)
        }


def compute_psd_roc(
    scores: Mapping[str, ScoreTimeline],
    references: Mapping[str, Sequence[Event]],
    params: PSDSParams,
    durations: DurationMap,
    class_labels: Sequence[str] | None = None,
    backend: str | None = None,
) -> ROCCurve:
    """Threshold-independent PSD-ROC over all distinct score values."""
    return PSDSEvaluator(scores, references, params, durations, class_labels, backend).curve()


def _step_area(grid: np.ndarray, values: np.ndarray, e_max: float) -> float:
    """Area under a right-continuous step curve from 0 to e_max, clamped at 0."""
    area = 0.0
    for i in range(grid.size):
        left = grid[i]
        if left >= e_max:
            break
        right = grid[i + 1] if i + 1 < grid.size else e_max
        right = min(right, e_max)
        area += max(values[i], 0.0) * (right - left)
    return float(area)


def psds(curve: ROCCurve, params: PSDSParams) -> float:
    """Normalized partial area under the effective PSD-ROC curve."""
    if curve.alpha_st != params.alpha_st or curve.e_max != params.e_max:
        raise ValidationError(
            "curve was built with different alpha_st/e_max than the psds parameters"
        )
    return _step_area(curve.fp_grid, curve.effective_tpr, params.e_max) / params.e_max


def roc_to_csv(curve: ROCCurve) -> str:
    """CSV export of the merged-grid curves: fp_rate, per-class tp_rate, eTPR."""
    header = ["fp_rate"] + [f"tp_rate_{c}" for c in curve.class_labels] + ["etpr"]
    lines = [",".join(header)]
    for i in range(curve.fp_grid.size):
        if not np.isfinite(curve.fp_grid[i]):
            continue
        row = [repr(float(curve.fp_grid[i]))]
        row += [repr(float(v)) for v in curve.class_tpr[i]]
        row.append(repr(float(curve.effective_tpr[i])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@dataclass
class CollarF1Result:
    per_class: dict[str, tuple[float, int, int, int]]  # f1, tp, fp, fn
    macro_f1: float


class CollarF1Evaluator:
    """Per-clip collar-based matching counts, combinable under reweighting."""

    def __init__(
        self,
        detections: Mapping[str, Sequence[Event]],
        references: Mapping[str, Sequence[Event]],
        onset_collar: float = 0.2,
        offset_collar_rate: float = 0.2,
        class_labels: Sequence[str] | None = None,
    ):
        if class_labels is None:
            class_labels = sorted(
                {e.class_label for evs in references.values() for e in evs}
            )
        self.class_labels = tuple(class_labels)
        self.clip_ids = sorted(set(detections) | set(references))
        n_clip, n_cls = len(self.clip_ids), len(self.class_labels)
        cls_index = {c: j for j, c in enumerate(self.class_labels)}
        self._tp = np.zeros((n_clip, n_cls), dtype=np.int64)
        self._fp = np.zeros((n_clip, n_cls), dtype=np.int64)
        self._fn = np.zeros((n_clip, n_cls), dtype=np.int64)
        self._n_ref = np.zeros((n_clip, n_cls), dtype=np.int64)
        for k, clip_id in enumerate(self.clip_ids):
            dets = defaultdict(list)
            refs = defaultdict(list)
            for d in detections.get(clip_id, []):
                dets[d.class_label].append(d)
            for r in references.get(clip_id, []):
                refs[r.class_label].append(r)
            for cls in set(dets) | set(refs):
                if cls not in cls_index:
                    continue
                j = cls_index[cls]
                tp, fp, fn = _collar_match(
                    sorted(dets[cls], key=lambda e: (e.onset, e.offset)),
                    sorted(refs[cls], key=lambda e: (e.onset, e.offset)),
                    onset_collar,
                    offset_collar_rate,
                )
                self._tp[k, j] = tp
                self._fp[k, j] = fp
                self._fn[k, j] = fn
                self._n_ref[k, j] = len(refs[cls])

    def result(self, weights: Mapping[str, int] | None = None) -> CollarF1Result:
        if weights is None:
            w = np.ones(len(self.clip_ids), dtype=np.int64)
        else:
            w = np.array([int(weights.get(c, 0)) for c in self.clip_ids], dtype=np.int64)
        tp = np.sum(w[:, None] * self._tp, axis=0)
        fp = np.sum(w[:, None] * self._fp, axis=0)
        fn = np.sum(w[:, None] * self._fn, axis=0)
        n_ref = np.sum(w[:, None] * self._n_ref, axis=0)
        per_class = {}
        f1s = []
        for j, cls in enumerate(self.class_labels):
            if n_ref[j] == 0:
                continue
            denom = 2 * tp[j] + fp[j] + fn[j]
            f1 = 2.0 * tp[j] / denom if denom else 0.0
            per_class[cls] = (f1, int(tp[j]), int(fp[j]), int(fn[j]))
            f1s.append(f1)
        macro = float(np.mean(f1s)) if f1s else 0.0
        return CollarF1Result(per_class=per_class, macro_f1=macro)


def _collar_match(
    dets: list[Event],
    refs: list[Event],
    onset_collar: float,
    offset_collar_rate: float,
) -> tuple[int, int, int]:
    """One-to-one greedy matching in ascending reference onset order; each
    reference takes the earliest-onset unmatched qualifying detection."""
    taken = [False] * len(dets)
    tp = 0
    for r in refs:
        offset_tol = max(onset_collar, offset_collar_rate * r.duration)
        for i, d in enumerate(dets):
            if taken[i]:
                continue
            if (
                abs(d.onset - r.onset) <= onset_collar + TIME_EPS
                and abs(d.offset - r.offset) <= offset_tol + TIME_EPS
            ):
                taken[i] = True
                tp += 1
                break
    fp = taken.count(False)
    fn = len(refs) - tp
    return tp, fp, fn


def collar_f1(
    detections: Mapping[str, Sequence[Event]] | Sequence[Event],
    references: Mapping[str, Sequence[Event]] | Sequence[Event],
    onset_collar: float = 0.2,
    offset_collar_rate: float = 0.2,
    class_labels: Sequence[str] | None = None,
) -> CollarF1Result:
    """Collar-based event F1: per class and macro over classes with references."""
    if not isinstance(detections, Mapping):
        detections = _group(detections)
    if not isinstance(references, Mapping):
        references = _group(references)
    evaluator = CollarF1Evaluator(
        detections, references, onset_collar, offset_collar_rate, class_labels
    )
    return evaluator.result()


def _group(events: Sequence[Event]) -> dict[str, list[Event]]:
    grouped: dict[str, list[Event]] = defaultdict(list)
    for e in events:
        grouped[e.clip_id].append(e)
    return dict(grouped)
