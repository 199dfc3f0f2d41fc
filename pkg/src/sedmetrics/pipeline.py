"""End-to-end evaluation: configuration, dataset routing, report emission,
and the hardware energy normalization utility.

Each configured dataset is evaluated only with its designated metric
family: event-labeled ("events") datasets get intersection-based PSDS plus
collar and segment F1/ER; soft-labeled ("soft_segments") datasets get the
macro partial AUC plus segment F1/ER over reconstructed recordings. The
ranking value is the sum of the two primary metric means.
"""

import datetime as _dt
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bootstrap import (
    GENERATOR_ID,
    EventDatasetEvaluator,
    MetricReport,
    MetricStats,
    SegmentDatasetEvaluator,
    aggregate_bootstrap,
    balanced_bootstrap,
)
from .data import (
    group_soft_labels,
    load_durations,
    load_ground_truth,
    load_score_dir,
    load_soft_labels,
)
from .errors import SchemaError, ValidationError
from .event_metrics import CollarParams, PSDSParams, roc_to_csv
from .harmonize import DESED_CLASSES, MAESTRO_CLASSES
from .longform import reconstruct_segment_scores, segment_labels_from_soft, split_recording
from .postprocess import FilterConfig, median_filter, parse_filter_config
from .segment_metrics import SegMPAUCParams

# Published baseline training energy on the reference hardware, kWh.
DEFAULT_BASELINE_TRAIN_KWH = 1.180

KIND_EVENTS = "events"
KIND_SOFT = "soft_segments"

_DEFAULT_CLASSES = {"desed": DESED_CLASSES, "maestro": MAESTRO_CLASSES}


@dataclass
class ReconstructionConfig:
    clip_length: float = 10.0
    overlap_fraction: float = 0.5


@dataclass
class DatasetConfig:
    name: str
    kind: str
    durations: Path
    ground_truth: Path | None = None
    soft_labels: Path | None = None
    classes: tuple[str, ...] | None = None
    psds: PSDSParams = field(default_factory=PSDSParams)
    collar: CollarParams = field(default_factory=CollarParams)
    segment: SegMPAUCParams = field(default_factory=SegMPAUCParams)
    filter_lengths: Path | str | None = None
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)

    def __post_init__(self):
        if self.kind not in (KIND_EVENTS, KIND_SOFT):
            raise SchemaError(f"dataset {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == KIND_EVENTS and self.ground_truth is None:
            raise SchemaError(f"dataset {self.name!r}: 'events' kind needs ground_truth")
        if self.kind == KIND_SOFT and self.soft_labels is None:
            raise SchemaError(f"dataset {self.name!r}: 'soft_segments' kind needs soft_labels")
        if self.classes is None:
            self.classes = _DEFAULT_CLASSES.get(self.name)


@dataclass
class EvalConfig:
    datasets: list[DatasetConfig]
    run_score_dirs: list[Path]
    n_samples: int = 20
    seed: int = 2024
    jobs: int = 1
    output_dir: Path = Path("report")
    fresh_plan_per_run: bool = False
    raw: dict = field(default_factory=dict)


def default_filter_lengths_path() -> Path:
    return Path(resources.files("sedmetrics").joinpath("defaults/filter_lengths.tsv"))


def load_eval_config(path) -> EvalConfig:
    """Load a YAML evaluation config; relative paths resolve against it."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SchemaError("config must be a YAML mapping")
    base = path.parent

    def respath(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    datasets = []
    for entry in raw.get("datasets", []):
        datasets.append(
            DatasetConfig(
                name=entry["name"],
                kind=entry.get("kind", KIND_EVENTS),
                durations=respath(entry["durations"]),
                ground_truth=respath(entry["ground_truth"]) if "ground_truth" in entry else None,
                soft_labels=respath(entry["soft_labels"]) if "soft_labels" in entry else None,
                classes=tuple(entry["classes"]) if "classes" in entry else None,
                psds=PSDSParams(**entry.get("psds", {})),
                collar=CollarParams(**entry.get("collar", {})),
                segment=SegMPAUCParams(**entry.get("segment", {})),
                filter_lengths=(
                    "default"
                    if entry.get("filter_lengths") == "default"
                    else respath(entry["filter_lengths"])
                    if entry.get("filter_lengths")
                    else None
                ),
                reconstruction=ReconstructionConfig(**entry.get("reconstruction", {})),
            )
        )
    if not datasets:
        raise SchemaError("config defines no datasets")
    runs = [respath(r["scores"] if isinstance(r, dict) else r) for r in raw.get("runs", [])]
    if not runs:
        raise SchemaError("config defines no runs")
    bootstrap = raw.get("bootstrap", {})
    return EvalConfig(
        datasets=datasets,
        run_score_dirs=runs,
        n_samples=int(bootstrap.get("n_samples", 20)),
        seed=int(raw.get("seed", 2024)),
        jobs=int(raw.get("jobs", 1)),
        output_dir=respath(raw.get("output_dir", "report")),
        fresh_plan_per_run=bool(bootstrap.get("fresh_plan_per_run", False)),
        raw=raw,
    )


def _load_filter_config(spec) -> FilterConfig | None:
    if spec is None:
        return None
    path = default_filter_lengths_path() if spec == "default" else Path(spec)
    return parse_filter_config(path.read_text(encoding="utf-8"))


def _evaluate_event_dataset(ds: DatasetConfig, config: EvalConfig):
    durations = load_durations(ds.durations)
    references = load_ground_truth(Path(ds.ground_truth))
    unknown = sorted(set(references) - set(durations))
    if unknown:
        raise ValidationError(
            f"dataset {ds.name!r}: ground truth names clips absent from durations: "
            f"{', '.join(unknown)}"
        )
    clip_ids = sorted(durations)
    classes = ds.classes or tuple(
        sorted({e.class_label for evs in references.values() for e in evs})
    )
    filter_config = _load_filter_config(ds.filter_lengths)
    run_scores = []
    for run_dir in config.run_score_dirs:
        scores = load_score_dir(run_dir, clip_ids, expected_classes=classes)
        if filter_config is not None:
            scores = {c: median_filter(t, filter_config) for c, t in scores.items()}
        run_scores.append(scores)
    prepared = EventDatasetEvaluator(
        run_scores, references, durations, ds.psds, ds.collar, ds.segment, classes
    )
    reports = _bootstrap_dataset(prepared, clip_ids, config, len(run_scores))
    per_class = _event_per_class_tables(prepared, len(run_scores))
    curves = [ev.curve(warn=False) for ev in prepared.psds_evaluators]
    return reports, per_class, curves


def _evaluate_segment_dataset(ds: DatasetConfig, config: EvalConfig):
    durations = load_durations(ds.durations)
    labels_flat = load_soft_labels(Path(ds.soft_labels))
    by_recording = group_soft_labels(labels_flat)
    unknown = sorted(set(by_recording) - set(durations))
    if unknown:
        raise ValidationError(
            f"dataset {ds.name!r}: soft labels name recordings absent from durations: "
            f"{', '.join(unknown)}"
        )
    recording_ids = sorted(durations)
    classes = ds.classes or tuple(sorted({l.class_label for l in labels_flat}))
    references = {
        rec: segment_labels_from_soft(
            by_recording.get(rec, []),
            durations[rec],
            ds.segment.segment_length,
            ds.segment.binarization_threshold,
            classes,
            recording_id=rec,
        )
        for rec in recording_ids
    }
    windows = {
        rec: split_recording(
            durations[rec],
            ds.reconstruction.clip_length,
            ds.reconstruction.overlap_fraction,
            recording_id=rec,
        )
        for rec in recording_ids
    }
    run_scores = []
    for run_dir in config.run_score_dirs:
        all_clips = [w.clip_id for rec in recording_ids for w in windows[rec]]
        timelines = load_score_dir(run_dir, all_clips, expected_classes=classes)
        per_rec = {}
        for rec in recording_ids:
            clip_timelines = [(w, timelines[w.clip_id]) for w in windows[rec]]
            per_rec[rec] = reconstruct_segment_scores(
                clip_timelines, durations[rec], ds.segment.segment_length
            )
        run_scores.append(per_rec)
    prepared = SegmentDatasetEvaluator(run_scores, references, ds.segment, classes)
    reports = _bootstrap_dataset(prepared, recording_ids, config, len(run_scores))
    per_class = _segment_per_class_tables(prepared, len(run_scores))
    return reports, per_class, []


def _bootstrap_dataset(prepared, unit_ids, config: EvalConfig, n_runs: int) -> MetricReport:
    if config.fresh_plan_per_run:
        reports = []
        for run_idx in range(n_runs):
            plan = balanced_bootstrap(unit_ids, config.n_samples, config.seed + run_idx)
            reports.append(
                aggregate_bootstrap([prepared.metric_fn(run_idx)], plan, jobs=config.jobs)
            )
        merged = {}
        for name in reports[0].metrics:
            results = tuple(v for r in reports for v in r.metrics[name].results)
            arr = np.array(results)
            merged[name] = MetricStats(float(arr.mean()), float(arr.std()), results)
        return MetricReport(
            metrics=merged,
            n_runs=n_runs,
            n_samples=config.n_samples,
            seed=config.seed,
            generator_id=reports[0].generator_id,
        )
    plan = balanced_bootstrap(unit_ids, config.n_samples, config.seed)
    fns = [prepared.metric_fn(i) for i in range(n_runs)]
    return aggregate_bootstrap(fns, plan, jobs=config.jobs)


def _mean_over_runs(per_run: list[dict]) -> dict:
    out: dict = {}
    for table in per_run:
        for cls, metrics in table.items():
            out.setdefault(cls, {})
            for name, value in metrics.items():
                out[cls].setdefault(name, []).append(value)
    return {
        cls: {name: sum(vals) / len(vals) for name, vals in metrics.items()}
        for cls, metrics in out.items()
    }


def _event_per_class_tables(prepared: EventDatasetEvaluator, n_runs: int) -> dict:
    per_run = []
    for i in range(n_runs):
        table: dict[str, dict[str, float]] = {}
        for cls, value in prepared.psds_evaluators[i].per_class_psds().items():
            table.setdefault(cls, {})["psds1"] = value
        if prepared.collar_evaluators:
            for cls, (f1, *_counts) in prepared.collar_evaluators[i].result().per_class.items():
                table.setdefault(cls, {})["collar_f1"] = f1
        if prepared.segment_evaluators:
            seg = prepared.segment_evaluators[i]
            fixed = seg.f1_er(prepared.seg_params.binarization_threshold, "fixed")
            optimal = seg.f1_er(mode="optimal")
            for cls, row in fixed.per_class.items():
                table.setdefault(cls, {})["segment_f1_fixed"] = row["f1"]
                table[cls]["segment_er_fixed"] = row["er"]
            for cls, row in optimal.per_class.items():
                table.setdefault(cls, {})["segment_f1_optimal"] = row["f1"]
                table[cls]["segment_er_optimal"] = row["er"]
        per_run.append(table)
    return _mean_over_runs(per_run)


def _segment_per_class_tables(prepared: SegmentDatasetEvaluator, n_runs: int) -> dict:
    per_run = []
    for i in range(n_runs):
        table: dict[str, dict[str, float]] = {}
        seg = prepared.evaluators[i]
        _, per_class, _ = seg.seg_mpauc(prepared.seg_params, warn=False)
        for cls, value in per_class.items():
            table.setdefault(cls, {})["segmpauc"] = value
        fixed = seg.f1_er(prepared.seg_params.binarization_threshold, "fixed")
        optimal = seg.f1_er(mode="optimal")
        for cls, row in fixed.per_class.items():
            table.setdefault(cls, {})["segment_f1_fixed"] = row["f1"]
            table[cls]["segment_er_fixed"] = row["er"]
        for cls, row in optimal.per_class.items():
            table.setdefault(cls, {})["segment_f1_optimal"] = row["f1"]
            table[cls]["segment_er_optimal"] = row["er"]
        per_run.append(table)
    return _mean_over_runs(per_run)


_PRIMARY_BY_KIND = {KIND_EVENTS: "psds1", KIND_SOFT: "segmpauc"}


def run_evaluate(config: EvalConfig, write: bool = True) -> dict:
    """Run the full two-family evaluation and return the report dict.

    When ``write`` is true, emits ``report.json``, per-class CSV tables, and
    PSD-ROC CSV exports under ``config.output_dir``.
    """
    primaries_seen = set()
    merged_metrics: dict[str, dict] = {}
    per_class_tables: dict[str, dict] = {}
    dataset_meta: dict[str, dict] = {}
    curves_by_dataset: dict[str, list] = {}
    n_runs = len(config.run_score_dirs)
    for ds in config.datasets:
        primary = _PRIMARY_BY_KIND[ds.kind]
        if primary in primaries_seen:
            raise SchemaError(
                f"two datasets claim the primary metric {primary!r}; "
                "at most one dataset per metric family is supported"
            )
        primaries_seen.add(primary)
        if ds.kind == KIND_EVENTS:
            report, per_class, curves = _evaluate_event_dataset(ds, config)
        else:
            report, per_class, curves = _evaluate_segment_dataset(ds, config)
        for name, stats in report.metrics.items():
            key = name if name == primary else f"{ds.name}.{name}"
            merged_metrics[key] = {
                "mean": stats.mean,
                "std": stats.std,
                "results": list(stats.results),
            }
        per_class_tables[ds.name] = per_class
        curves_by_dataset[ds.name] = curves
        dataset_meta[ds.name] = {"kind": ds.kind, "primary_metric": primary}

    ranking = None
    if {"psds1", "segmpauc"} <= set(merged_metrics):
        ranking = merged_metrics["psds1"]["mean"] + merged_metrics["segmpauc"]["mean"]

    report = {
        "schema_version": 1,
        "toolkit": {"name": "sedmetrics", "version": __version__},
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": _echo_config(config),
        "metrics": merged_metrics,
        "ranking": ranking,
        "bootstrap": {
            "seed": config.seed,
            "n_samples": config.n_samples,
            "n_runs": n_runs,
            "generator_id": GENERATOR_ID,
            "fresh_plan_per_run": config.fresh_plan_per_run,
        },
        "datasets": dataset_meta,
        "per_class": per_class_tables,
    }
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report_to_json(report), encoding="utf-8")
        for ds_name, table in per_class_tables.items():
            (out / f"per_class_{ds_name}.csv").write_text(
                per_class_to_csv(table), encoding="utf-8"
            )
        for ds_name, curves in curves_by_dataset.items():
            for run_idx, curve in enumerate(curves, start=1):
                (out / f"psd_roc_{ds_name}_run{run_idx}.csv").write_text(
                    roc_to_csv(curve), encoding="utf-8"
                )
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def per_class_to_csv(table: dict) -> str:
    names = sorted({name for metrics in table.values() for name in metrics})
    lines = [",".join(["class"] + names)]
    for cls in sorted(table):
        row = [cls] + [
            repr(float(table[cls][n])) if n in table[cls] else "" for n in names
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _echo_config(config: EvalConfig) -> dict:
    echo = {
        "seed": config.seed,
        "n_samples": config.n_samples,
        "jobs": config.jobs,
        "fresh_plan_per_run": config.fresh_plan_per_run,
        "runs": [str(p) for p in config.run_score_dirs],
        "datasets": [],
    }
    for ds in config.datasets:
        echo["datasets"].append(
            {
                "name": ds.name,
                "kind": ds.kind,
                "durations": str(ds.durations),
                "ground_truth": str(ds.ground_truth) if ds.ground_truth else None,
                "soft_labels": str(ds.soft_labels) if ds.soft_labels else None,
                "classes": list(ds.classes) if ds.classes else None,
                "psds": asdict(ds.psds),
                "collar": asdict(ds.collar),
                "segment": asdict(ds.segment),
                "filter_lengths": str(ds.filter_lengths) if ds.filter_lengths else None,
                "reconstruction": asdict(ds.reconstruction),
            }
        )
    return echo


def energy_normalize(
    system_kwh: float,
    baseline_measured_kwh: float,
    baseline_reference_kwh: float = DEFAULT_BASELINE_TRAIN_KWH,
) -> float:
    """Scale a measured energy figure by reference/measured baseline ratio."""
    if system_kwh < 0:
        raise ValidationError("system_kwh must be >= 0")
    if baseline_measured_kwh <= 0 or baseline_reference_kwh <= 0:
        raise ValidationError("baseline energies must be > 0")
    return system_kwh * (baseline_reference_kwh / baseline_measured_kwh)
