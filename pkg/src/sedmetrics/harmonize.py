"""Cross-dataset class mapping and per-dataset supervision masks.

Class vocabularies differ between datasets; a directed child -> parent map
lifts annotations from one vocabulary onto super-classes of another (e.g.
``cutlery_and_dishes -> dishes``). Mapping is one-directional: parents are
never expanded back to children.
"""

from collections import defaultdict
from dataclasses import dataclass

from .data import TIME_EPS, SoftSegmentLabel
from .errors import ParseError, ValidationError

DESED_CLASSES = (
    "alarm_bell_ringing",
    "blender",
    "cat",
    "dishes",
    "dog",
    "electric_shaver_toothbrush",
    "frying",
    "running_water",
    "speech",
    "vacuum_cleaner",
)

MAESTRO_CLASSES = (
    "birds_singing",
    "car",
    "people_talking",
    "footsteps",
    "children_voices",
    "wind_blowing",
    "brakes_squeaking",
    "large_vehicle",
    "cutlery_and_dishes",
    "metro_approaching",
    "metro_leaving",
)


@dataclass(frozen=True)
class ClassMap:
    """Directed child-class -> parent-class entries."""

    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        seen = set()
        for child, parent in self.entries:
            if child == parent:
                raise ValidationError(f"class map entry maps {child!r} to itself")
            if (child, parent) in seen:
                raise ValidationError(f"duplicate class map entry ({child!r}, {parent!r})")
            seen.add((child, parent))

    def parents_of(self, child: str) -> tuple[str, ...]:
        return tuple(p for c, p in self.entries if c == child)


@dataclass(frozen=True)
class ClassMask:
    """Per-class supervision flags over the combined class vocabulary."""

    combined_classes: tuple[str, ...]
    supervised: tuple[bool, ...]

    def __post_init__(self):
        if len(self.supervised) != len(self.combined_classes):
            raise ValidationError("mask length does not match class list")

    def as_dict(self) -> dict[str, bool]:
        return dict(zip(self.combined_classes, self.supervised))


def default_class_map() -> ClassMap:
    """The built-in child -> parent map between the two task vocabularies."""
    return ClassMap(
        entries=(
            ("people_talking", "speech"),
            ("children_voices", "speech"),
            ("announcement", "speech"),
            ("cutlery_and_dishes", "dishes"),
            ("dog_bark", "dog"),
        )
    )


def parse_class_map(tsv_text: str) -> ClassMap:
    """Parse a two-column "child\\tparent" TSV (one header row permitted)."""
    entries = []
    for lineno, line in enumerate(tsv_text.splitlines(), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected 2 columns, got {len(cols)}", line=lineno)
        if lineno == 1 and (cols[0].lower(), cols[1].lower()) in {
            ("child", "parent"),
            ("child_class", "parent_class"),
        }:
            continue
        if not cols[0] or not cols[1]:
            raise ParseError("empty class name", line=lineno)
        entries.append((cols[0], cols[1]))
    return ClassMap(entries=tuple(entries))


def expand_targets(
    labels: list[SoftSegmentLabel], class_map: ClassMap
) -> list[SoftSegmentLabel]:
    """Add parent-class labels for every mapped child label.

    Input labels are returned unchanged, followed by derived parent labels.
    Where several mapped children of the same parent overlap in time, the
    parent evidence is merged piecewise with the maximum confidence, so the
    derived labels never overlap each other. A derived label that already
    exists verbatim in the input is not added again, which makes expansion
    idempotent when no map parent is itself a child.
    """
    children = {child for child, _ in class_map.entries}
    derived: dict[tuple[str, str], list[SoftSegmentLabel]] = defaultdict(list)
    for label in labels:
        if label.class_label in children:
            for parent in class_map.parents_of(label.class_label):
                derived[(label.clip_id, parent)].append(label)

    existing = set(labels)
    out = list(labels)
    for (clip_id, parent), sources in sorted(derived.items()):
        for merged in _merged_parent_labels(clip_id, parent, sources):
            if merged not in existing:
                out.append(merged)
    return out


def _merged_parent_labels(
    clip_id: str, parent: str, sources: list[SoftSegmentLabel]
) -> list[SoftSegmentLabel]:
    """Piecewise max-confidence merge of child intervals for one parent."""
    bps = sorted({t for s in sources for t in (s.onset, s.offset)})
    pieces = []  # (start, end, confidence)
    for start, end in zip(bps, bps[1:]):
        if end - start <= TIME_EPS:
            continue
        confs = [
            s.confidence
            for s in sources
            if s.onset <= start + TIME_EPS and s.offset >= end - TIME_EPS
        ]
        if not confs:
            continue
        conf = max(confs)
        if pieces and pieces[-1][2] == conf and abs(pieces[-1][1] - start) <= TIME_EPS:
            pieces[-1] = (pieces[-1][0], end, conf)
        else:
            pieces.append((start, end, conf))
    return [SoftSegmentLabel(clip_id, s, e, parent, c) for s, e, c in pieces]


def build_class_mask(
    tag: str,
    combined_classes: list[str] | tuple[str, ...],
    dataset_classes: dict[str, list[str] | tuple[str, ...]],
    class_map: ClassMap,
) -> ClassMask:
    """Supervision mask for clips of dataset ``tag`` over the combined vocabulary.

    A class is supervised iff it belongs to the clip's own dataset, or it is
    the mapped parent of one of that dataset's classes.
    """
    if tag not in dataset_classes:
        raise ValidationError(
            f"unknown dataset tag {tag!r}, expected one of {sorted(dataset_classes)}"
        )
    own = set(dataset_classes[tag])
    mapped_parents = {parent for child, parent in class_map.entries if child in own}
    supervised = tuple(c in own or c in mapped_parents for c in combined_classes)
    return ClassMask(tuple(combined_classes), supervised)
