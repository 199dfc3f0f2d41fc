"""Balanced bootstrap resampling and metric aggregation.

The plan concatenates ``n_samples`` copies of every clip id, shuffles them
with a seeded generator, and partitions the result into ``n_samples``
consecutive blocks, so every clip is sampled equally often overall.
Resampled metrics weight each clip by its multiplicity in the sample, which
duplicates reference counts, detection counts, and audio duration alike.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import DurationMap, Event, ScoreTimeline
from .errors import ValidationError
from .event_metrics import CollarParams, PSDSEvaluator, PSDSParams, CollarF1Evaluator
from .longform import SegmentLabelMatrix, SegmentScoreMatrix, segment_labels_from_events, segment_scores_from_timeline
from .postprocess import extract_events
from .segment_metrics import SegmentEvaluator, SegMPAUCParams

GENERATOR_ID = "numpy-pcg64-permutation-v1"


@dataclass(frozen=True)
class BootstrapPlan:
    """n_samples clip-id multisets, each the size of the clip universe."""

    samples: tuple[tuple[str, ...], ...]
    n_samples: int
    seed: int
    generator_id: str = GENERATOR_ID

    def __post_init__(self):
        if len(self.samples) != self.n_samples:
            raise ValidationError("sample count does not match n_samples")

    @property
    def clip_ids(self) -> tuple[str, ...]:
        return tuple(sorted({c for s in self.samples for c in s}))

    def weights(self, sample_idx: int) -> dict[str, int]:
        return dict(Counter(self.samples[sample_idx]))


def balanced_bootstrap(clip_ids: Sequence[str], n_samples: int, seed: int) -> BootstrapPlan:
    """Shuffle-and-partition construction of a balanced bootstrap plan."""
    if not clip_ids:
        raise ValidationError("empty clip list")
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    ids = list(clip_ids)
    rng = np.random.default_rng(seed)
    pool = np.tile(np.arange(len(ids), dtype=np.int64), n_samples)
    shuffled = pool[rng.permutation(pool.size)]
    blocks = shuffled.reshape(n_samples, len(ids))
    samples = tuple(tuple(ids[i] for i in row) for row in blocks)
    return BootstrapPlan(samples=samples, n_samples=n_samples, seed=seed)


@dataclass
class MetricStats:
    mean: float
    std: float  # population
    results: tuple[float, ...]  # ordered by (run, sample)


@dataclass
class MetricReport:
    metrics: dict[str, MetricStats]
    n_runs: int
    n_samples: int
    seed: int
    generator_id: str = GENERATOR_ID
    ranking: float | None = None


def aggregate_bootstrap(
    run_metric_fns: Sequence[Callable[[Mapping[str, int]], Mapping[str, float]]],
    plan: BootstrapPlan,
    jobs: int = 1,
) -> MetricReport:
    """Evaluate every (run, sample) pair and aggregate mean/population std.

    ``run_metric_fns[r]`` maps a clip-multiplicity weighting to a dict of
    metric values. Results are gathered in (run, sample) order regardless of
    parallelism, so the report is identical for any ``jobs``.
    """
    tasks = [
        (run_idx, sample_idx)
        for run_idx in range(len(run_metric_fns))
        for sample_idx in range(plan.n_samples)
    ]

    def evaluate(task):
        run_idx, sample_idx = task
        return run_metric_fns[run_idx](plan.weights(sample_idx))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(evaluate, tasks))
    else:
        outputs = [evaluate(t) for t in tasks]

    names = list(outputs[0])
    metrics = {}
    for name in names:
        values = np.array([out[name] for out in outputs], dtype=np.float64)
        metrics[name] = MetricStats(
            mean=float(values.mean()),
            std=float(values.std()),
            results=tuple(float(v) for v in values),
        )
    return MetricReport(
        metrics=metrics,
        n_runs=len(run_metric_fns),
        n_samples=plan.n_samples,
        seed=plan.seed,
        generator_id=plan.generator_id,
    )


def ranking_metric(report: MetricReport) -> float:
    """Sum of the primary metrics' means: PSDS on events plus macro pAUC."""
    missing = [name for name in ("psds1", "segmpauc") if name not in report.metrics]
    if missing:
        raise ValidationError(f"report lacks primary metrics: {', '.join(missing)}")
    return report.metrics["psds1"].mean + report.metrics["segmpauc"].mean


# --- single-dataset bootstrap evaluation ------------------------------------


class EventDatasetEvaluator:
    """Prepared per-run evaluators for an event-labeled (strong) dataset:
    PSDS, collar F1, and per-clip segment F1/ER."""

    def __init__(
        self,
        run_scores: Sequence[Mapping[str, ScoreTimeline]],
        references: Mapping[str, Sequence[Event]],
        durations: DurationMap,
        psds_params: PSDSParams,
        collar_params: CollarParams | None = None,
        seg_params: SegMPAUCParams | None = None,
        class_labels: Sequence[str] | None = None,
        backend: str | None = None,
    ):
        self.psds_evaluators = [
            PSDSEvaluator(scores, references, psds_params, durations, class_labels, backend)
            for scores in run_scores
        ]
        self.collar_evaluators = []
        self.segment_evaluators = []
        self.seg_params = seg_params
        self.collar_params = collar_params
        if collar_params is not None:
            for scores in run_scores:
                detections = {
                    clip_id: extract_events(t, collar_params.threshold)
                    for clip_id, t in scores.items()
                }
                self.collar_evaluators.append(
                    CollarF1Evaluator(
                        detections,
                        references,
                        collar_params.onset_collar,
                        collar_params.offset_collar_rate,
                        class_labels,
                    )
                )
        if seg_params is not None:
            for scores in run_scores:
                seg_scores = {}
                seg_labels = {}
                for clip_id, t in scores.items():
                    seg_scores[clip_id] = segment_scores_from_timeline(
                        t, seg_params.segment_length
                    )
                    seg_labels[clip_id] = segment_labels_from_events(
                        list(references.get(clip_id, [])),
                        t.duration,
                        seg_params.segment_length,
                        t.class_labels,
                        recording_id=clip_id,
                    )
                self.segment_evaluators.append(SegmentEvaluator(seg_scores, seg_labels))

    def metric_fn(self, run_idx: int) -> Callable[[Mapping[str, int]], dict[str, float]]:
        def evaluate(weights: Mapping[str, int]) -> dict[str, float]:
            out = {"psds1": self.psds_evaluators[run_idx].psds(weights)}
            if self.collar_evaluators:
                out["collar_f1"] = self.collar_evaluators[run_idx].result(weights).macro_f1
            if self.segment_evaluators:
                seg = self.segment_evaluators[run_idx]
                fixed = seg.f1_er(self.seg_params.binarization_threshold, "fixed", weights)
                optimal = seg.f1_er(mode="optimal", weights=weights)
                out["segment_f1_fixed"] = fixed.macro_f1
                out["segment_er_fixed"] = fixed.macro_er
                out["segment_f1_optimal"] = optimal.macro_f1
                out["segment_er_optimal"] = optimal.macro_er
            return out

        return evaluate


class SegmentDatasetEvaluator:
    """Prepared per-run evaluators for a segment-labeled (soft) dataset:
    macro partial AUC and segment F1/ER over reconstructed recordings."""

    def __init__(
        self,
        run_scores: Sequence[Mapping[str, SegmentScoreMatrix]],
        references: Mapping[str, SegmentLabelMatrix],
        seg_params: SegMPAUCParams,
        class_labels: Sequence[str] | None = None,
    ):
        self.seg_params = seg_params
        self.evaluators = []
        for scores in run_scores:
            missing = sorted(set(references) - set(scores))
            if missing:
                raise ValidationError(
                    f"run missing scores for recordings: {', '.join(missing)}"
                )
            self.evaluators.append(SegmentEvaluator(scores, references, class_labels))

    def metric_fn(self, run_idx: int) -> Callable[[Mapping[str, int]], dict[str, float]]:
        def evaluate(weights: Mapping[str, int]) -> dict[str, float]:
            seg = self.evaluators[run_idx]
            macro, _, _ = seg.seg_mpauc(self.seg_params, weights, warn=False)
            fixed = seg.f1_er(self.seg_params.binarization_threshold, "fixed", weights)
            optimal = seg.f1_er(mode="optimal", weights=weights)
            return {
                "segmpauc": macro,
                "segment_f1_fixed": fixed.macro_f1,
                "segment_er_fixed": fixed.macro_er,
                "segment_f1_optimal": optimal.macro_f1,
                "segment_er_optimal": optimal.macro_er,
            }

        return evaluate


def evaluate_bootstrapped(
    run_outputs: Sequence[Mapping],
    references: Mapping,
    params,
    plan: BootstrapPlan,
    durations: DurationMap | None = None,
    collar_params: CollarParams | None = None,
    seg_params: SegMPAUCParams | None = None,
    class_labels: Sequence[str] | None = None,
    jobs: int = 1,
) -> MetricReport:
    """Bootstrap-aggregate all metrics of one dataset over runs x samples.

    Dispatches on ``params``: :class:`PSDSParams` treats ``run_outputs`` as
    per-clip score timelines with event references; :class:`SegMPAUCParams`
    treats them as per-recording segment score matrices with segment label
    references.
    """
    if not run_outputs:
        raise ValidationError("need at least one run")
    plan_clips = set(plan.clip_ids)
    for i, scores in enumerate(run_outputs):
        missing = sorted(plan_clips - set(scores))
        if missing:
            raise ValidationError(
                f"run {i} missing scores for clips: {', '.join(missing)}"
            )
    if isinstance(params, PSDSParams):
        if durations is None:
            raise ValidationError("durations are required for event-based evaluation")
        prepared = EventDatasetEvaluator(
            run_outputs, references, durations, params, collar_params, seg_params, class_labels
        )
    elif isinstance(params, SegMPAUCParams):
        prepared = SegmentDatasetEvaluator(run_outputs, references, params, class_labels)
    else:
        raise ValidationError(f"unsupported params bundle: {type(params).__name__}")
    fns = [prepared.metric_fn(i) for i in range(len(run_outputs))]
    return aggregate_bootstrap(fns, plan, jobs=jobs)
