"""Evaluation toolkit for polyphonic sound event detection over
heterogeneous datasets: intersection-based PSDS, segment-level macro
partial AUC, collar and segment F1/ER, long-form reconstruction,
class-wise median filtering, and balanced bootstrapped reporting."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    Event,
    ScoreTimeline,
    SoftSegmentLabel,
    parse_durations,
    parse_ground_truth,
    parse_scores,
    parse_soft_labels,
)
from .event_metrics import (  # noqa: F401
    CollarParams,
    PSDSParams,
    ROCCurve,
    collar_f1,
    compute_psd_roc,
    match_events_dtc_gtc,
    psds,
)
from .harmonize import ClassMap, build_class_mask, default_class_map, expand_targets  # noqa: F401
from .longform import (  # noqa: F401
    ClipWindow,
    SegmentLabelMatrix,
    SegmentScoreMatrix,
    reconstruct_segment_scores,
    segment_labels_from_events,
    segment_labels_from_soft,
    split_recording,
)
from .postprocess import FilterConfig, extract_events, median_filter, tune_filter_lengths  # noqa: F401
from .segment_metrics import SegMPAUCParams, partial_auc, seg_mpauc, segment_roc  # noqa: F401
from .bootstrap import (  # noqa: F401
    BootstrapPlan,
    MetricReport,
    balanced_bootstrap,
    evaluate_bootstrapped,
    ranking_metric,
)
