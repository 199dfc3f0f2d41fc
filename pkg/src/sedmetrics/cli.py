"""Command-line surface.

Exit codes: 0 success, 2 validation/schema error, 3 I/O error.
"""

import functools
import json
import sys
from pathlib import Path

import click

from . import __version__
from .bootstrap import balanced_bootstrap
from .data import (
    group_soft_labels,
    load_durations,
    load_ground_truth,
    load_score_dir,
    load_score_file,
    load_soft_labels,
    soft_labels_to_tsv,
)
from .errors import SedMetricsError
from .event_metrics import CollarF1Evaluator, PSDSEvaluator, PSDSParams, roc_to_csv
from .harmonize import default_class_map, expand_targets, parse_class_map
from .longform import (
    ScoreTimeline,
    reconstruct_segment_scores,
    segment_edges,
    segment_labels_from_events,
    segment_labels_from_soft,
    segment_scores_from_timeline,
    split_recording,
)
from .pipeline import (
    DEFAULT_BASELINE_TRAIN_KWH,
    _load_filter_config,
    energy_normalize,
    load_eval_config,
    run_evaluate,
)
from .postprocess import (
    extract_events,
    median_filter,
    tune_filter_lengths_detailed,
)
from .segment_metrics import SegmentEvaluator, SegMPAUCParams


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SedMetricsError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(2)
        except OSError as err:
            click.echo(f"i/o error: {err}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="sedmetrics")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Evaluation config (YAML).")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--jobs", type=int, default=None, help="Worker threads for parallel evaluation.")
@click.option("--output", "output_path", type=click.Path(), default=None, help="Override the output path.")
@click.pass_context
def main(ctx, config_path, seed, jobs, output_path):
    """Sound event detection evaluation over heterogeneous datasets."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, seed=seed, jobs=jobs, output=output_path)


def _global(ctx, key, fallback=None):
    value = ctx.obj.get(key) if ctx.obj else None
    return fallback if value is None else value


def _parse_classes(classes: str | None):
    if not classes:
        return None
    return tuple(c.strip() for c in classes.split(",") if c.strip())


def _filtered_scores(scores_dir, clip_ids, classes, filter_lengths):
    scores = load_score_dir(scores_dir, clip_ids, expected_classes=classes)
    config = _load_filter_config(filter_lengths)
    if config is not None:
        scores = {c: median_filter(t, config) for c, t in scores.items()}
    return scores


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.pass_context
@_handle_errors
def evaluate(ctx, config_path):
    """Run the full evaluation pipeline from a YAML config."""
    config_path = config_path or _global(ctx, "config")
    if config_path is None:
        raise SedMetricsError("no config given (use --config)")
    config = load_eval_config(config_path)
    if _global(ctx, "seed") is not None:
        config.seed = _global(ctx, "seed")
    if _global(ctx, "jobs") is not None:
        config.jobs = _global(ctx, "jobs")
    if _global(ctx, "output") is not None:
        config.output_dir = Path(_global(ctx, "output"))
    report = run_evaluate(config)
    for name in ("psds1", "segmpauc"):
        if name in report["metrics"]:
            stats = report["metrics"][name]
            click.echo(f"{name}: {stats['mean']:.6f} +- {stats['std']:.6f}")
    if report["ranking"] is not None:
        click.echo(f"ranking: {report['ranking']:.6f}")
    click.echo(f"report written to {config.output_dir}")


@main.command("psds")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--ground-truth", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True)
@click.option("--classes", default=None, help="Comma-separated class list.")
@click.option("--rho-dtc", type=float, default=0.7, show_default=True)
@click.option("--rho-gtc", type=float, default=0.7, show_default=True)
@click.option("--alpha-st", type=float, default=1.0, show_default=True)
@click.option("--e-max", type=float, default=100.0, show_default=True, help="Max FP rate (per hour).")
@click.option("--filter-lengths", default=None, help="Filter config TSV, or 'default'.")
@click.option("--roc-csv", type=click.Path(), default=None, help="Write the PSD-ROC as CSV.")
@_handle_errors
def psds_command(scores_dir, ground_truth, durations, classes, rho_dtc, rho_gtc, alpha_st, e_max, filter_lengths, roc_csv):
    """Intersection-based PSDS over all distinct score thresholds."""
    durations_map = load_durations(durations)
    references = load_ground_truth(ground_truth)
    params = PSDSParams(rho_dtc=rho_dtc, rho_gtc=rho_gtc, alpha_st=alpha_st, e_max=e_max)
    scores = _filtered_scores(scores_dir, sorted(durations_map), _parse_classes(classes), filter_lengths)
    evaluator = PSDSEvaluator(scores, references, params, durations_map, _parse_classes(classes))
    curve = evaluator.curve()
    value = evaluator.psds()
    if roc_csv:
        Path(roc_csv).write_text(roc_to_csv(curve), encoding="utf-8")
    for cls, v in evaluator.per_class_psds().items():
        click.echo(f"  {cls}: {v:.6f}")
    click.echo(f"psds: {value:.6f}")


@main.command("segmpauc")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--soft-labels", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True, help="Recording durations TSV.")
@click.option("--classes", default=None)
@click.option("--clip-length", type=float, default=10.0, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("--max-fpr", type=float, default=0.1, show_default=True)
@click.option("--segment-length", type=float, default=1.0, show_default=True)
@click.option("--binarization-threshold", type=float, default=0.5, show_default=True)
@_handle_errors
def segmpauc_command(scores_dir, soft_labels, durations, classes, clip_length, overlap, max_fpr, segment_length, binarization_threshold):
    """Macro partial AUC over reconstructed long-form recordings."""
    durations_map = load_durations(durations)
    labels = load_soft_labels(soft_labels)
    params = SegMPAUCParams(max_fpr=max_fpr, segment_length=segment_length, binarization_threshold=binarization_threshold)
    class_list = _parse_classes(classes) or tuple(sorted({l.class_label for l in labels}))
    by_rec = group_soft_labels(labels)
    seg_scores, seg_labels = {}, {}
    for rec in sorted(durations_map):
        windows = split_recording(durations_map[rec], clip_length, overlap, recording_id=rec)
        timelines = load_score_dir(scores_dir, [w.clip_id for w in windows], expected_classes=class_list)
        seg_scores[rec] = reconstruct_segment_scores(
            [(w, timelines[w.clip_id]) for w in windows], durations_map[rec], segment_length
        )
        seg_labels[rec] = segment_labels_from_soft(
            by_rec.get(rec, []), durations_map[rec], segment_length, binarization_threshold,
            class_list, recording_id=rec,
        )
    macro, per_class, skipped = SegmentEvaluator(seg_scores, seg_labels).seg_mpauc(params)
    for cls, v in per_class.items():
        click.echo(f"  {cls}: {v:.6f}")
    if skipped:
        click.echo(f"  skipped (undefined ROC): {', '.join(skipped)}")
    click.echo(f"segmpauc: {macro:.6f}")


@main.command("collar-f1")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--ground-truth", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True)
@click.option("--classes", default=None)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--onset-collar", type=float, default=0.2, show_default=True)
@click.option("--offset-collar-rate", type=float, default=0.2, show_default=True)
@click.option("--filter-lengths", default=None)
@_handle_errors
def collar_f1_command(scores_dir, ground_truth, durations, classes, threshold, onset_collar, offset_collar_rate, filter_lengths):
    """Collar-based event F1 at a fixed detection threshold."""
    durations_map = load_durations(durations)
    references = load_ground_truth(ground_truth)
    scores = _filtered_scores(scores_dir, sorted(durations_map), _parse_classes(classes), filter_lengths)
    detections = {c: extract_events(t, threshold) for c, t in scores.items()}
    result = CollarF1Evaluator(
        detections, references, onset_collar, offset_collar_rate, _parse_classes(classes)
    ).result()
    for cls, (f1, tp, fp, fn) in result.per_class.items():
        click.echo(f"  {cls}: f1={f1:.6f} (tp={tp} fp={fp} fn={fn})")
    click.echo(f"collar_f1: {result.macro_f1:.6f}")


@main.command("segment-f1")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--ground-truth", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True)
@click.option("--classes", default=None)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--optimal", is_flag=True, help="Use per-class optimal thresholds.")
@click.option("--segment-length", type=float, default=1.0, show_default=True)
@click.option("--filter-lengths", default=None)
@_handle_errors
def segment_f1_command(scores_dir, ground_truth, durations, classes, threshold, optimal, segment_length, filter_lengths):
    """Segment-based F1 and error rate on clip-level data."""
    durations_map = load_durations(durations)
    references = load_ground_truth(ground_truth)
    scores = _filtered_scores(scores_dir, sorted(durations_map), _parse_classes(classes), filter_lengths)
    seg_scores, seg_labels = {}, {}
    for clip_id, t in scores.items():
        seg_scores[clip_id] = segment_scores_from_timeline(t, segment_length)
        seg_labels[clip_id] = segment_labels_from_events(
            list(references.get(clip_id, [])), t.duration, segment_length,
            t.class_labels, recording_id=clip_id,
        )
    result = SegmentEvaluator(seg_scores, seg_labels).f1_er(
        threshold, "optimal" if optimal else "fixed"
    )
    for cls, row in result.per_class.items():
        click.echo(f"  {cls}: f1={row['f1']:.6f} er={row['er']:.6f} (tau={row['threshold']:g})")
    click.echo(f"segment_f1: {result.macro_f1:.6f}")
    click.echo(f"segment_er: {result.macro_er:.6f}")


@main.command("filter")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--filter-lengths", required=True, help="Filter config TSV, or 'default'.")
@click.option("--output", "output_dir", type=click.Path(), required=True)
@_handle_errors
def filter_command(scores_dir, filter_lengths, output_dir):
    """Median-filter every score file in a directory."""
    config = _load_filter_config(filter_lengths)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in sorted(Path(scores_dir).glob("*.tsv")):
        timeline = load_score_file(path)
        (out / path.name).write_text(median_filter(timeline, config).to_tsv(), encoding="utf-8")
        count += 1
    click.echo(f"filtered {count} score files into {out}")


@main.command("tune-filter")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--ground-truth", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True)
@click.option("--classes", default=None)
@click.option("--candidates", default="1,3,5,7,9,11,13", show_default=True, help="Comma-separated odd lengths.")
@click.option("--budget", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--frame-length", type=float, default=0.064, show_default=True)
@click.option("--output", "output_path", type=click.Path(), default=None, help="Write the tuned config TSV here.")
@click.pass_context
@_handle_errors
def tune_filter_command(ctx, scores_dir, ground_truth, durations, classes, candidates, budget, seed, frame_length, output_path):
    """Seeded random search over per-class median filter lengths."""
    durations_map = load_durations(durations)
    references = load_ground_truth(ground_truth)
    scores = load_score_dir(scores_dir, sorted(durations_map), expected_classes=_parse_classes(classes))
    seed = seed if seed is not None else _global(ctx, "seed", 2024)
    candidate_list = [int(c) for c in candidates.split(",") if c.strip()]
    result = tune_filter_lengths_detailed(
        scores, references, candidate_list, budget, seed, durations_map,
        frame_length=frame_length,
    )
    output_path = output_path or _global(ctx, "output")
    text = result.config.to_tsv()
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
        click.echo(f"tuned config written to {output_path}")
    else:
        click.echo(text, nl=False)
    click.echo(f"objective: {result.objective:.6f}")


@main.command("reconstruct")
@click.option("--scores", "scores_dir", type=click.Path(exists=True), required=True)
@click.option("--durations", type=click.Path(exists=True), required=True, help="Recording durations TSV.")
@click.option("--classes", default=None)
@click.option("--clip-length", type=float, default=10.0, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("--segment-length", type=float, default=1.0, show_default=True)
@click.option("--output", "output_dir", type=click.Path(), required=True)
@_handle_errors
def reconstruct_command(scores_dir, durations, classes, clip_length, overlap, segment_length, output_dir):
    """Rebuild recording-level segment scores from overlapping clip files."""
    durations_map = load_durations(durations)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    class_list = _parse_classes(classes)
    for rec in sorted(durations_map):
        windows = split_recording(durations_map[rec], clip_length, overlap, recording_id=rec)
        timelines = load_score_dir(scores_dir, [w.clip_id for w in windows], expected_classes=class_list)
        matrix = reconstruct_segment_scores(
            [(w, timelines[w.clip_id]) for w in windows], durations_map[rec], segment_length
        )
        edges = segment_edges(durations_map[rec], segment_length)
        timeline = ScoreTimeline(rec, matrix.class_labels, edges, matrix.scores)
        (out / f"{rec}.tsv").write_text(timeline.to_tsv(), encoding="utf-8")
    click.echo(f"reconstructed {len(durations_map)} recordings into {out}")


@main.command("split")
@click.option("--durations", type=click.Path(exists=True), required=True, help="Recording durations TSV.")
@click.option("--clip-length", type=float, default=10.0, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("--output", "output_path", type=click.Path(), default=None)
@_handle_errors
def split_command(durations, clip_length, overlap, output_path):
    """List the clip windows each recording splits into."""
    durations_map = load_durations(durations)
    lines = ["recording_id\tclip_id\tstart\tend"]
    for rec in sorted(durations_map):
        for w in split_recording(durations_map[rec], clip_length, overlap, recording_id=rec):
            lines.append(f"{rec}\t{w.clip_id}\t{w.start!r}\t{w.end!r}")
    text = "\n".join(lines) + "\n"
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(lines) - 1} windows to {output_path}")
    else:
        click.echo(text, nl=False)


@main.command("map-labels")
@click.option("--soft-labels", type=click.Path(exists=True), required=True)
@click.option("--class-map", "class_map_path", type=click.Path(exists=True), default=None,
              help="Two-column child->parent TSV; defaults to the built-in map.")
@click.option("--output", "output_path", type=click.Path(), required=True)
@_handle_errors
def map_labels_command(soft_labels, class_map_path, output_path):
    """Expand child-class labels onto their mapped parent classes."""
    labels = load_soft_labels(soft_labels)
    if class_map_path:
        class_map = parse_class_map(Path(class_map_path).read_text(encoding="utf-8"))
    else:
        class_map = default_class_map()
    expanded = expand_targets(labels, class_map)
    Path(output_path).write_text(soft_labels_to_tsv(expanded), encoding="utf-8")
    click.echo(f"wrote {len(expanded)} labels ({len(expanded) - len(labels)} derived) to {output_path}")


@main.command("bootstrap-plan")
@click.option("--durations", type=click.Path(exists=True), required=True,
              help="Durations TSV naming the clips to resample.")
@click.option("--n-samples", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--output", "output_path", type=click.Path(), default=None)
@click.pass_context
@_handle_errors
def bootstrap_plan_command(ctx, durations, n_samples, seed, output_path):
    """Emit a balanced bootstrap plan as JSON."""
    clip_ids = sorted(load_durations(durations))
    seed = seed if seed is not None else _global(ctx, "seed", 2024)
    plan = balanced_bootstrap(clip_ids, n_samples, seed)
    payload = {
        "seed": plan.seed,
        "n_samples": plan.n_samples,
        "generator_id": plan.generator_id,
        "samples": [list(s) for s in plan.samples],
    }
    text = json.dumps(payload, indent=2) + "\n"
    output_path = output_path or _global(ctx, "output")
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
        click.echo(f"plan written to {output_path}")
    else:
        click.echo(text, nl=False)


@main.command("energy-normalize")
@click.option("--system-kwh", type=float, required=True)
@click.option("--baseline-measured-kwh", type=float, required=True)
@click.option("--baseline-reference-kwh", type=float, default=DEFAULT_BASELINE_TRAIN_KWH,
              show_default=True, help="Published baseline figure on reference hardware.")
@_handle_errors
def energy_normalize_command(system_kwh, baseline_measured_kwh, baseline_reference_kwh):
    """Normalize a measured energy figure across hardware."""
    value = energy_normalize(system_kwh, baseline_measured_kwh, baseline_reference_kwh)
    click.echo(f"{value!r}")


if __name__ == "__main__":
    main()
