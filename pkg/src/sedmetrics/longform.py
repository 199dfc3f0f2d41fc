"""Splitting long recordings into overlapping clips and reconstructing
recording-level segment scores from clip-level timelines.

Split windows start at multiples of ``clip_length * (1 - overlap_fraction)``;
when the last regular window falls short of the recording end, one extra
window right-aligned to the end is appended (no zero padding). Clip ids for
split output follow ``<recording_id>@<start_ms>-<end_ms>``.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .data import TIME_EPS, Event, ScoreTimeline, SoftSegmentLabel
from .errors import CoverageError, SchemaError, ValidationError
from .kernels import interval_means

_CLIP_ID_RE = re.compile(r"^(?P<rec>.+)@(?P<start>\d+)-(?P<end>\d+)$")


@dataclass(frozen=True)
class ClipWindow:
    """One fixed-length window of a recording, in recording coordinates."""

    recording_id: str
    start: float
    end: float

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValidationError(
                f"bad clip window ({self.start}, {self.end}) on {self.recording_id!r}"
            )

    @property
    def clip_id(self) -> str:
        return f"{self.recording_id}@{round(self.start * 1000)}-{round(self.end * 1000)}"


def parse_window_clip_id(clip_id: str) -> ClipWindow:
    """Invert the "<recording_id>@<start_ms>-<end_ms>" naming convention."""
    m = _CLIP_ID_RE.match(clip_id)
    if m is None:
        raise ValidationError(f"clip id {clip_id!r} does not follow '<rec>@<start_ms>-<end_ms>'")
    return ClipWindow(m["rec"], int(m["start"]) / 1000.0, int(m["end"]) / 1000.0)


def num_segments(duration: float, segment_length: float) -> int:
    """ceil(duration / segment_length) with tolerance for float fuzz."""
    return max(1, math.ceil((duration - TIME_EPS) / segment_length))


def segment_edges(duration: float, segment_length: float) -> np.ndarray:
    n = num_segments(duration, segment_length)
    edges = np.arange(n + 1, dtype=np.float64) * segment_length
    edges[-1] = duration
    return edges


@dataclass
class SegmentScoreMatrix:
    """Per-segment, per-class scores for one recording."""

    recording_id: str
    duration: float
    segment_length: float
    class_labels: tuple[str, ...]
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.class_labels = tuple(self.class_labels)
        self.scores = np.atleast_2d(np.asarray(self.scores, dtype=np.float64))
        expected = (num_segments(self.duration, self.segment_length), len(self.class_labels))
        if self.scores.shape != expected:
            raise ValidationError(
                f"recording {self.recording_id!r}: segment scores shape "
                f"{self.scores.shape}, expected {expected}"
            )
        if np.any(self.scores < 0.0) or np.any(self.scores > 1.0):
            raise ValidationError(f"recording {self.recording_id!r}: segment scores outside [0, 1]")


@dataclass
class SegmentLabelMatrix:
    """Boolean per-segment, per-class labels, shaped like the score matrix."""

    recording_id: str
    duration: float
    segment_length: float
    class_labels: tuple[str, ...]
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.class_labels = tuple(self.class_labels)
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=bool))
        expected = (num_segments(self.duration, self.segment_length), len(self.class_labels))
        if self.labels.shape != expected:
            raise ValidationError(
                f"recording {self.recording_id!r}: segment labels shape "
                f"{self.labels.shape}, expected {expected}"
            )


def split_recording(
    duration: float,
    clip_length: float,
    overlap_fraction: float = 0.5,
    recording_id: str = "",
) -> list[ClipWindow]:
    """Fixed-length windows covering [0, duration], right-aligned tail included."""
    if duration <= 0 or clip_length <= 0:
        raise ValidationError("duration and clip_length must be positive")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValidationError(f"overlap_fraction {overlap_fraction} outside [0, 1)")
    if duration <= clip_length + TIME_EPS:
        return [ClipWindow(recording_id, 0.0, duration)]
    hop = clip_length * (1.0 - overlap_fraction)
    windows = []
    k = 0
    while k * hop + clip_length <= duration + TIME_EPS:
        start = k * hop
        windows.append(ClipWindow(recording_id, start, start + clip_length))
        k += 1
    if duration - windows[-1].end > TIME_EPS:
        windows.append(ClipWindow(recording_id, duration - clip_length, duration))
    return windows


def reconstruct_segment_scores(
    clip_timelines: list[tuple[ClipWindow, ScoreTimeline]],
    duration: float,
    segment_length: float = 1.0,
) -> SegmentScoreMatrix:
    """Rebuild recording-level segment scores from overlapping clip timelines.

    Per segment and class, each covering clip contributes the
    duration-weighted mean of its scores over the covered part; those
    per-clip values are then averaged with equal weight. Contributions are
    sorted before summing, so the result does not depend on clip order.
    """
    if not clip_timelines:
        raise ValidationError("no clip timelines to reconstruct from")
    classes = clip_timelines[0][1].class_labels
    recording_id = clip_timelines[0][0].recording_id
    for window, timeline in clip_timelines:
        if timeline.class_labels != classes:
            raise SchemaError(f"clip {timeline.clip_id!r}: class columns differ across clips")
        if abs(timeline.duration - (window.end - window.start)) > 1e-6:
            raise ValidationError(
                f"clip {timeline.clip_id!r}: timeline spans {timeline.duration} s but its "
                f"window is {window.end - window.start} s"
            )

    edges = segment_edges(duration, segment_length)
    n_seg = len(edges) - 1
    contributions: list[list[np.ndarray]] = [[] for _ in range(n_seg)]
    for window, timeline in clip_timelines:
        lo = max(window.start, 0.0)
        hi = min(window.end, duration)
        if hi - lo <= TIME_EPS:
            continue
        # cut the covered span at the segment boundaries strictly inside it
        inner = edges[(edges > lo + TIME_EPS) & (edges < hi - TIME_EPS)]
        local_edges = np.concatenate(([lo], inner, [hi])) - window.start
        means = interval_means(timeline.breakpoints, timeline.scores, local_edges)
        piece_mids = (local_edges[:-1] + local_edges[1:]) / 2.0 + window.start
        seg_idx = np.minimum((piece_mids / segment_length).astype(int), n_seg - 1)
        for k, j in enumerate(seg_idx):
            contributions[j].append(means[k])

    scores = np.empty((n_seg, len(classes)))
    for j, parts in enumerate(contributions):
        if not parts:
            raise CoverageError(
                f"recording {recording_id!r}: segment {j} "
                f"({edges[j]:.3f}-{edges[j + 1]:.3f} s) not covered by any clip"
            )
        stacked = np.sort(np.stack(parts), axis=0)
        scores[j] = stacked.sum(axis=0) / len(parts)
    np.clip(scores, 0.0, 1.0, out=scores)
    return SegmentScoreMatrix(recording_id, duration, segment_length, classes, scores)


def _overlap_labels(
    intervals: list[tuple[float, float, str]],
    recording_id: str,
    duration: float,
    segment_length: float,
    class_labels,
) -> SegmentLabelMatrix:
    classes = tuple(class_labels)
    col = {c: i for i, c in enumerate(classes)}
    edges = segment_edges(duration, segment_length)
    labels = np.zeros((len(edges) - 1, len(classes)), dtype=bool)
    for onset, offset, cls in intervals:
        if cls not in col:
            continue
        j0 = np.searchsorted(edges, onset + TIME_EPS, side="right") - 1
        j1 = np.searchsorted(edges, offset - TIME_EPS, side="right") - 1
        j0 = max(j0, 0)
        j1 = min(j1, len(edges) - 2)
        if j1 >= j0:
            labels[j0 : j1 + 1, col[cls]] = True
    return SegmentLabelMatrix(recording_id, duration, segment_length, classes, labels)


def segment_labels_from_soft(
    labels: list[SoftSegmentLabel],
    duration: float,
    segment_length: float,
    binarization_threshold: float,
    class_labels,
    recording_id: str | None = None,
) -> SegmentLabelMatrix:
    """Binarize soft labels: a segment is positive for a class iff some label
    with confidence >= threshold overlaps it by more than 0 s."""
    if recording_id is None:
        recording_id = labels[0].clip_id if labels else ""
    kept = [
        (l.onset, l.offset, l.class_label)
        for l in labels
        if l.confidence >= binarization_threshold
    ]
    return _overlap_labels(kept, recording_id, duration, segment_length, class_labels)


def segment_labels_from_events(
    events: list[Event],
    duration: float,
    segment_length: float,
    class_labels,
    recording_id: str | None = None,
) -> SegmentLabelMatrix:
    """Segment labels from hard events (confidence implicitly 1)."""
    if recording_id is None:
        recording_id = events[0].clip_id if events else ""
    intervals = [(e.onset, e.offset, e.class_label) for e in events]
    return _overlap_labels(intervals, recording_id, duration, segment_length, class_labels)


def segment_scores_from_timeline(
    timeline: ScoreTimeline, segment_length: float = 1.0
) -> SegmentScoreMatrix:
    """Segment-resolution scores of a single clip (the clip as its own recording)."""
    edges = segment_edges(timeline.duration, segment_length)
    means = interval_means(timeline.breakpoints, timeline.scores, edges)
    np.clip(means, 0.0, 1.0, out=means)
    return SegmentScoreMatrix(
        timeline.clip_id, timeline.duration, segment_length, timeline.class_labels, means
    )
