import numpy as np
import pytest

from sedmetrics.data import Event, ScoreTimeline

# All randomized fixtures draw times from a 0.25 s grid and scores from a
# dyadic palette, so every intersection, sum, and ratio is exact in float64
# and naive-vs-production comparisons can demand exact equality.

SCORE_PALETTE = np.array([k / 8.0 for k in range(9)])
DURATIONS = (8.0, 10.0, 12.0, 16.0)


def make_timeline(clip_id, classes, breakpoints, scores) -> ScoreTimeline:
    return ScoreTimeline(
        clip_id=clip_id,
        class_labels=tuple(classes),
        breakpoints=np.asarray(breakpoints, dtype=np.float64),
        scores=np.asarray(scores, dtype=np.float64),
    )


def constant_timeline(clip_id, classes, duration, value) -> ScoreTimeline:
    return make_timeline(
        clip_id, classes, [0.0, duration], [[value] * len(classes)]
    )


def random_psds_instance(rng, max_classes=3, max_clips=5, max_events=6, max_values=8):
    """A small random corpus: (scores, references, durations, classes)."""
    n_classes = int(rng.integers(1, max_classes + 1))
    classes = [f"c{i}" for i in range(n_classes)]
    n_clips = int(rng.integers(1, max_clips + 1))
    palette = rng.choice(SCORE_PALETTE, size=int(rng.integers(2, max_values + 1)), replace=False)
    scores, references, durations = {}, {}, {}
    for k in range(n_clips):
        clip_id = f"clip{k}"
        duration = float(rng.choice(DURATIONS))
        durations[clip_id] = duration
        n_cuts = int(rng.integers(0, 7))
        grid = np.arange(0.25, duration, 0.25)
        cuts = np.sort(rng.choice(grid, size=min(n_cuts, grid.size), replace=False))
        breakpoints = np.concatenate(([0.0], cuts, [duration]))
        values = rng.choice(palette, size=(breakpoints.size - 1, n_classes))
        scores[clip_id] = make_timeline(clip_id, classes, breakpoints, values)
        events = []
        for _ in range(int(rng.integers(0, max_events + 1))):
            onset = float(rng.choice(np.arange(0.0, duration - 0.25, 0.25)))
            offset = float(
                rng.choice(np.arange(onset + 0.25, min(onset + 4.0, duration) + 1e-9, 0.25))
            )
            events.append(Event(clip_id, onset, offset, str(rng.choice(classes))))
        references[clip_id] = sorted(events, key=lambda e: (e.onset, e.offset))
    if not any(references.values()):
        clip_id = sorted(scores)[0]
        references[clip_id] = [Event(clip_id, 0.5, 2.0, classes[0])]
    return scores, references, durations, classes


def random_segments(rng, max_segments=40, max_values=8):
    """(score, label) pairs with at least one positive and one negative."""
    n = int(rng.integers(2, max_segments + 1))
    palette = rng.choice(SCORE_PALETTE, size=int(rng.integers(2, max_values + 1)), replace=False)
    scores = rng.choice(palette, size=n)
    labels = rng.integers(0, 2, size=n).astype(bool)
    labels[0] = True
    labels[1] = False
    return [(float(s), bool(y)) for s, y in zip(scores, labels)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240731)
