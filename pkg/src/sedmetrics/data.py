"""Domain types and TSV ingestion/validation.

All inputs are UTF-8 TSV text (tab-separated, '.' decimal separator, LF or
CRLF). Times are 64-bit float seconds; time comparisons elsewhere in the
toolkit use an absolute tolerance of ``TIME_EPS``. A single header row is
permitted on every format and is detected by a non-numeric second column.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError, TilingError, ValidationError

TIME_EPS = 1e-9

DurationMap = dict[str, float]


@dataclass(frozen=True)
class Event:
    """One labeled time interval on a clip."""

    clip_id: str
    onset: float
    offset: float
    class_label: str

    def __post_init__(self):
        if not self.class_label:
            raise ValidationError(f"empty class label on clip {self.clip_id!r}")
        if self.onset < 0:
            raise ValidationError(
                f"negative onset {self.onset} on clip {self.clip_id!r}"
            )
        if not self.offset > self.onset:
            raise ValidationError(
                f"offset <= onset ({self.onset}, {self.offset}) on clip {self.clip_id!r}"
            )

    @property
    def duration(self) -> float:
        return self.offset - self.onset


@dataclass(frozen=True)
class SoftSegmentLabel:
    """A labeled interval carrying annotator confidence in [0, 1]."""

    clip_id: str
    onset: float
    offset: float
    class_label: str
    confidence: float

    def __post_init__(self):
        if not self.class_label:
            raise ValidationError(f"empty class label on clip {self.clip_id!r}")
        if not self.offset > self.onset:
            raise ValidationError(
                f"offset <= onset ({self.onset}, {self.offset}) on clip {self.clip_id!r}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(
                f"confidence {self.confidence} outside [0, 1] on clip {self.clip_id!r}"
            )


@dataclass
class ScoreTimeline:
    """Piecewise-constant per-class posterior scores over one clip.

    ``breakpoints`` has one more entry than ``scores`` has rows; row i holds
    the scores on ``[breakpoints[i], breakpoints[i+1])``. Treated as
    immutable after construction.
    """

    clip_id: str
    class_labels: tuple[str, ...]
    breakpoints: np.ndarray = field(repr=False)
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.class_labels = tuple(self.class_labels)
        self.breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        self.scores = np.atleast_2d(np.asarray(self.scores, dtype=np.float64))
        if self.scores.shape != (len(self.breakpoints) - 1, len(self.class_labels)):
            raise ValidationError(
                f"clip {self.clip_id!r}: score matrix shape {self.scores.shape} does not "
                f"match {len(self.breakpoints) - 1} intervals x {len(self.class_labels)} classes"
            )
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValidationError(f"clip {self.clip_id!r}: breakpoints not strictly increasing")
        if abs(self.breakpoints[0]) > TIME_EPS:
            raise ValidationError(f"clip {self.clip_id!r}: first breakpoint must be 0")
        if np.any(self.scores < 0.0) or np.any(self.scores > 1.0):
            raise ValidationError(f"clip {self.clip_id!r}: scores outside [0, 1]")

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    def column(self, class_label: str) -> np.ndarray:
        try:
            idx = self.class_labels.index(class_label)
        except ValueError:
            raise SchemaError(
                f"clip {self.clip_id!r} has no score column for class {class_label!r}"
            ) from None
        return self.scores[:, idx]

    def to_tsv(self) -> str:
        lines = ["onset\toffset\t" + "\t".join(self.class_labels)]
        for i in range(self.scores.shape[0]):
            cells = [_fmt(self.breakpoints[i]), _fmt(self.breakpoints[i + 1])]
            cells += [_fmt(v) for v in self.scores[i]]
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    # shortest decimal that reparses to the identical float
    return repr(float(x))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _rows(text: str):
    """Yield (line_number, columns) for non-empty lines, skipping one header."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        cols = line.split("\t")
        if lineno == 1 and len(cols) >= 2 and not _is_number(cols[1]):
            continue  # header row
        yield lineno, cols


def _parse_time(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"non-numeric {what} {token!r}", line=lineno) from None


def parse_ground_truth(tsv_text: str) -> dict[str, list[Event]]:
    """Parse "filename onset offset event_label" rows into events per clip.

    Events are sorted by (onset, offset, class) within each clip, so the
    result is invariant to input row order. Clips with zero events simply
    do not appear; callers treat missing clips as empty.
    """
    events: dict[str, list[Event]] = defaultdict(list)
    bad_rows: list[int] = []
    for lineno, cols in _rows(tsv_text):
        if len(cols) != 4:
            raise ParseError(f"expected 4 columns, got {len(cols)}", line=lineno)
        clip_id, onset_s, offset_s, label = cols
        onset = _parse_time(onset_s, lineno, "onset")
        offset = _parse_time(offset_s, lineno, "offset")
        if not label:
            raise ParseError("empty event label", line=lineno)
        if offset <= onset:
            bad_rows.append(lineno)
            continue
        events[clip_id].append(Event(clip_id, onset, offset, label))
    if bad_rows:
        listed = ", ".join(str(n) for n in bad_rows)
        raise ValidationError(f"offset <= onset at line {listed}")
    for clip_events in events.values():
        clip_events.sort(key=lambda e: (e.onset, e.offset, e.class_label))
    return dict(events)


def parse_soft_labels(tsv_text: str) -> list[SoftSegmentLabel]:
    """Parse "filename onset offset event_label confidence" rows."""
    labels: list[SoftSegmentLabel] = []
    for lineno, cols in _rows(tsv_text):
        if len(cols) != 5:
            raise ParseError(f"expected 5 columns, got {len(cols)}", line=lineno)
        clip_id, onset_s, offset_s, label, conf_s = cols
        onset = _parse_time(onset_s, lineno, "onset")
        offset = _parse_time(offset_s, lineno, "offset")
        conf = _parse_time(conf_s, lineno, "confidence")
        try:
            labels.append(SoftSegmentLabel(clip_id, onset, offset, label, conf))
        except ValidationError as err:
            raise ValidationError(f"line {lineno}: {err}") from None
    return labels


def parse_scores(
    tsv_text: str,
    expected_classes: list[str] | tuple[str, ...] | None = None,
    clip_id: str = "",
) -> ScoreTimeline:
    """Parse a per-clip score file with header "onset offset <class...>".

    Rows must tile [0, duration] contiguously. When ``expected_classes`` is
    given, the column set must match it exactly and the returned timeline
    uses that column order.
    """
    lines = [ln for ln in tsv_text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty score file", line=1)
    header = lines[0].rstrip("\r").split("\t")
    if len(header) < 3 or _is_number(header[1]):
        raise SchemaError("score file must start with an 'onset\\toffset\\t<class...>' header")
    file_classes = header[2:]
    if len(set(file_classes)) != len(file_classes):
        raise SchemaError(f"duplicate class columns in score file {clip_id!r}")
    if expected_classes is not None:
        missing = sorted(set(expected_classes) - set(file_classes))
        extra = sorted(set(file_classes) - set(expected_classes))
        if missing or extra:
            raise SchemaError(
                f"score columns for {clip_id!r} do not match expected classes"
                f" (missing: {missing}, extra: {extra})"
            )
        order = [file_classes.index(c) for c in expected_classes]
        out_classes = tuple(expected_classes)
    else:
        order = list(range(len(file_classes)))
        out_classes = tuple(file_classes)

    onsets, offsets, rows = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.rstrip("\r").split("\t")
        if len(cols) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(cols)}", line=lineno)
        onset = _parse_time(cols[0], lineno, "onset")
        offset = _parse_time(cols[1], lineno, "offset")
        if offset <= onset:
            raise ValidationError(f"line {lineno}: offset <= onset in score row")
        values = [_parse_time(c, lineno, "score") for c in cols[2:]]
        onsets.append(onset)
        offsets.append(offset)
        rows.append(values)
    if not rows:
        raise ParseError("score file has no rows", line=2)

    if abs(onsets[0]) > TIME_EPS:
        raise TilingError(f"clip {clip_id!r}: scores start at {onsets[0]}, expected 0")
    for i in range(1, len(onsets)):
        gap = onsets[i] - offsets[i - 1]
        if gap > TIME_EPS:
            raise TilingError(f"clip {clip_id!r}: gap at {offsets[i - 1]}-{onsets[i]}")
        if gap < -TIME_EPS:
            raise TilingError(f"clip {clip_id!r}: overlap at {onsets[i]}-{offsets[i - 1]}")

    breakpoints = np.array(onsets + [offsets[-1]], dtype=np.float64)
    scores = np.asarray(rows, dtype=np.float64)[:, order]
    return ScoreTimeline(clip_id, out_classes, breakpoints, scores)


def parse_durations(tsv_text: str) -> DurationMap:
    """Parse "filename duration" rows into a duration map."""
    durations: DurationMap = {}
    for lineno, cols in _rows(tsv_text):
        if len(cols) != 2:
            raise ParseError(f"expected 2 columns, got {len(cols)}", line=lineno)
        clip_id, dur_s = cols
        dur = _parse_time(dur_s, lineno, "duration")
        if dur <= 0:
            raise ValidationError(f"line {lineno}: non-positive duration for {clip_id!r}")
        if clip_id in durations:
            raise ValidationError(f"line {lineno}: duplicate clip id {clip_id!r}")
        durations[clip_id] = dur
    return durations


def events_to_tsv(events: list[Event]) -> str:
    lines = ["filename\tonset\toffset\tevent_label"]
    for e in events:
        lines.append(f"{e.clip_id}\t{_fmt(e.onset)}\t{_fmt(e.offset)}\t{e.class_label}")
    return "\n".join(lines) + "\n"


def soft_labels_to_tsv(labels: list[SoftSegmentLabel]) -> str:
    lines = ["filename\tonset\toffset\tevent_label\tconfidence"]
    for l in labels:
        lines.append(
            f"{l.clip_id}\t{_fmt(l.onset)}\t{_fmt(l.offset)}\t{l.class_label}\t{_fmt(l.confidence)}"
        )
    return "\n".join(lines) + "\n"


def group_soft_labels(labels: list[SoftSegmentLabel]) -> dict[str, list[SoftSegmentLabel]]:
    grouped: dict[str, list[SoftSegmentLabel]] = defaultdict(list)
    for label in labels:
        grouped[label.clip_id].append(label)
    return dict(grouped)


# --- file-level helpers ----------------------------------------------------


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_ground_truth(path) -> dict[str, list[Event]]:
    return parse_ground_truth(_read_text(path))


def load_soft_labels(path) -> list[SoftSegmentLabel]:
    return parse_soft_labels(_read_text(path))


def load_durations(path) -> DurationMap:
    return parse_durations(_read_text(path))


def load_score_file(path, expected_classes=None, clip_id: str | None = None) -> ScoreTimeline:
    path = Path(path)
    if clip_id is None:
        clip_id = path.stem
    return parse_scores(_read_text(path), expected_classes, clip_id=clip_id)


def load_score_dir(
    directory, clip_ids: list[str], expected_classes=None
) -> dict[str, ScoreTimeline]:
    """Load ``<clip_id>.tsv`` for every requested clip from a directory.

    Raises :class:`CoverageError` listing every clip whose score file is
    missing, before parsing anything.
    """
    from .errors import CoverageError

    directory = Path(directory)
    missing = [c for c in clip_ids if not (directory / f"{c}.tsv").is_file()]
    if missing:
        raise CoverageError(
            f"missing score files in {directory} for clips: {', '.join(sorted(missing))}"
        )
    return {
        c: load_score_file(directory / f"{c}.tsv", expected_classes, clip_id=c)
        for c in clip_ids
    }
