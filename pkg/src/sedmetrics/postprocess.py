"""Class-wise median filtering, event extraction by thresholding, and
seeded random search over per-class filter lengths.

Filtering resamples each timeline onto a uniform frame grid (64 ms by
default) and median-filters each class column with its own odd window
length, using replicate padding at the clip edges.
"""

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import DurationMap, Event, ScoreTimeline
from .errors import ParseError, ValidationError
from .event_metrics import PSDSEvaluator, PSDSParams
from .kernels import interval_means, moving_median
from .longform import (
    segment_edges,
    segment_labels_from_events,
    segment_scores_from_timeline,
)
from .segment_metrics import SegmentEvaluator, SegMPAUCParams


@dataclass(frozen=True)
class FilterConfig:
    """Per-class median filter lengths (frames) on a uniform frame grid."""

    frame_length: float
    lengths: Mapping[str, int]

    def __post_init__(self):
        if self.frame_length <= 0:
            raise ValidationError("frame_length must be positive")
        for cls, length in self.lengths.items():
            if length < 1 or length % 2 == 0:
                raise ValidationError(
                    f"filter length for {cls!r} must be an odd positive integer, got {length}"
                )

    def to_tsv(self) -> str:
        lines = [f"frame_length_s\t{self.frame_length!r}", "class\tlength_frames"]
        for cls in self.lengths:
            lines.append(f"{cls}\t{self.lengths[cls]}")
        return "\n".join(lines) + "\n"


def parse_filter_config(tsv_text: str) -> FilterConfig:
    """Parse the "frame_length_s" line plus "class\\tlength_frames" rows."""
    frame_length = None
    lengths: dict[str, int] = {}
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        cols = line.split("\t")
        if cols[0] == "frame_length_s":
            if len(cols) != 2:
                raise ParseError("frame_length_s line needs exactly one value", line=lineno)
            frame_length = float(cols[1])
            continue
        if cols == ["class", "length_frames"]:
            continue
        if len(cols) != 2:
            raise ParseError(f"expected 2 columns, got {len(cols)}", line=lineno)
        try:
            lengths[cols[0]] = int(cols[1])
        except ValueError:
            raise ParseError(f"non-integer filter length {cols[1]!r}", line=lineno) from None
    if frame_length is None:
        raise ParseError("missing frame_length_s line", line=1)
    return FilterConfig(frame_length=frame_length, lengths=lengths)


def median_filter(
    timeline: ScoreTimeline, config: FilterConfig, backend: str | None = None
) -> ScoreTimeline:
    """Frame-resample a timeline and median-filter each class column."""
    missing = [c for c in timeline.class_labels if c not in config.lengths]
    if missing:
        raise ValidationError(
            f"filter config misses classes: {', '.join(missing)}"
        )
    edges = segment_edges(timeline.duration, config.frame_length)
    frames = interval_means(timeline.breakpoints, timeline.scores, edges, backend=backend)
    np.clip(frames, 0.0, 1.0, out=frames)
    lengths = [config.lengths[c] for c in timeline.class_labels]
    filtered = moving_median(frames, lengths, backend=backend)
    return ScoreTimeline(timeline.clip_id, timeline.class_labels, edges, filtered)


def extract_events(
    timeline: ScoreTimeline, thresholds: float | Mapping[str, float]
) -> list[Event]:
    """Maximal intervals with score >= threshold, per class."""
    events = []
    for j, cls in enumerate(timeline.class_labels):
        tau = thresholds if isinstance(thresholds, (int, float)) else thresholds[cls]
        active = timeline.scores[:, j] >= tau
        padded = np.concatenate(([False], active, [False]))
        flips = np.diff(padded.astype(np.int8))
        starts = np.flatnonzero(flips == 1)
        stops = np.flatnonzero(flips == -1)
        for i, k in zip(starts, stops):
            events.append(
                Event(timeline.clip_id, float(timeline.breakpoints[i]),
                      float(timeline.breakpoints[k]), cls)
            )
    return events


@dataclass
class TuneResult:
    config: "FilterConfig"
    objective: float
    trace: tuple[float, ...]  # objective of every sampled configuration, in order


def default_tune_objective(
    filtered: Mapping[str, ScoreTimeline],
    references: Mapping[str, Sequence[Event]],
    durations: DurationMap,
    psds_params: PSDSParams,
    seg_params: SegMPAUCParams,
) -> float:
    """Sum of the two primary metrics on clip-level data: intersection-based
    PSDS plus macro partial AUC over per-clip 1 s segments."""
    value = 0.0
    try:
        evaluator = PSDSEvaluator(filtered, references, psds_params, durations)
        value += evaluator.psds()
    except ValidationError:
        pass  # no class with reference events
    seg_scores = {}
    seg_labels = {}
    for clip_id, timeline in filtered.items():
        seg_scores[clip_id] = segment_scores_from_timeline(timeline, seg_params.segment_length)
        seg_labels[clip_id] = segment_labels_from_events(
            list(references.get(clip_id, [])),
            timeline.duration,
            seg_params.segment_length,
            timeline.class_labels,
            recording_id=clip_id,
        )
    try:
        macro, _, _ = SegmentEvaluator(seg_scores, seg_labels).seg_mpauc(seg_params, warn=False)
        value += macro
    except ValidationError:
        pass  # every class ROC undefined on this dev set
    return value


def tune_filter_lengths_detailed(
    dev_scores: Mapping[str, ScoreTimeline],
    dev_refs: Mapping[str, Sequence[Event]],
    candidates: Sequence[int],
    budget: int,
    seed: int,
    durations: DurationMap,
    frame_length: float = 0.064,
    psds_params: PSDSParams | None = None,
    seg_params: SegMPAUCParams | None = None,
    objective: Callable[[Mapping[str, ScoreTimeline]], float] | None = None,
    backend: str | None = None,
) -> TuneResult:
    """Seeded random search over per-class filter lengths.

    Samples ``budget`` configurations (each class length drawn uniformly from
    ``candidates``), scores each with the objective on the filtered dev
    scores, and returns the argmax; ties go to the earliest sample. The
    result depends only on the seed and inputs, not on evaluation order.
    """
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if not candidates:
        raise ValidationError("empty candidate list")
    psds_params = psds_params or PSDSParams()
    seg_params = seg_params or SegMPAUCParams()
    if objective is None:
        def objective(filtered):
            return default_tune_objective(
                filtered, dev_refs, durations, psds_params, seg_params
            )

    classes = None
    for timeline in dev_scores.values():
        if classes is None:
            classes = timeline.class_labels
        elif timeline.class_labels != classes:
            raise ValidationError("dev timelines disagree on class columns")
    if classes is None:
        raise ValidationError("no dev scores supplied")

    candidates = [int(c) for c in candidates]
    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(budget):
        lengths = {c: candidates[int(rng.integers(0, len(candidates)))] for c in classes}
        configs.append(FilterConfig(frame_length=frame_length, lengths=lengths))

    trace = []
    for config in configs:
        filtered = {
            clip_id: median_filter(t, config, backend=backend)
            for clip_id, t in dev_scores.items()
        }
        trace.append(float(objective(filtered)))
    best_idx = int(np.argmax(trace))  # first maximum wins ties
    return TuneResult(config=configs[best_idx], objective=trace[best_idx], trace=tuple(trace))


def tune_filter_lengths(
    dev_scores: Mapping[str, ScoreTimeline],
    dev_refs: Mapping[str, Sequence[Event]],
    candidates: Sequence[int],
    budget: int,
    seed: int,
    durations: DurationMap,
    **kwargs,
) -> FilterConfig:
    return tune_filter_lengths_detailed(
        dev_scores, dev_refs, candidates, budget, seed, durations, **kwargs
    ).config
