"""Naive end-to-end oracle for the golden bundle.

Re-implements the full evaluation with the naive primitives from
``naive.py``: bootstrap weighting is realized by materializing duplicated
clips, every threshold is re-swept from scratch, and aggregation uses plain
Python arithmetic. The bootstrap plans themselves are protocol inputs and
come from ``sedmetrics.balanced_bootstrap`` (same seed as the config).
"""

import math
from collections import defaultdict
from pathlib import Path

from naive import (
    naive_best_f1,
    naive_collar_counts,
    naive_interval_mean,
    naive_mean_std,
    naive_partial_auc,
    naive_psd_roc_and_psds,
    naive_reconstruct,
    naive_runs,
    naive_segment_f1_er,
    naive_segment_roc,
    naive_support,
)
from sedmetrics.bootstrap import balanced_bootstrap

E_MAX = 100.0
RHO = 0.7
COLLAR = 0.2
OFFSET_RATE = 0.2
TAU = 0.5
SEG_LEN = 1.0
MAX_FPR = 0.1
CLIP_LENGTH = 10.0
OVERLAP = 0.5
N_SAMPLES = 20
SEED = 2024


def read_rows(path):
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        if line.strip():
            rows.append(line.split("\t"))
    return rows


def read_score_file(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    classes = lines[0].split("\t")[2:]
    breakpoints, values = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        breakpoints.append(float(cells[0]))
        values.append([float(v) for v in cells[2:]])
    breakpoints.append(float(lines[-1].split("\t")[1]))
    return breakpoints, values, classes


def column(values, classes, cls):
    j = classes.index(cls)
    return [row[j] for row in values]


class GoldenOracle:
    def __init__(self, fixture_dir):
        d = Path(fixture_dir)
        self.desed_durations = {r[0]: float(r[1]) for r in read_rows(d / "desed/durations.tsv")}
        self.maestro_durations = {r[0]: float(r[1]) for r in read_rows(d / "maestro/durations.tsv")}
        self.desed_refs = defaultdict(list)
        for clip, on, off, cls in read_rows(d / "desed/ground_truth.tsv"):
            self.desed_refs[clip].append((float(on), float(off), cls))
        for refs in self.desed_refs.values():
            refs.sort()
        self.soft_labels = defaultdict(list)
        for rec, on, off, cls, conf in read_rows(d / "maestro/soft_labels.tsv"):
            self.soft_labels[rec].append((float(on), float(off), cls, float(conf)))
        self.desed_classes = ("speech", "dog", "dishes")
        self.maestro_classes = ("car", "people_talking", "birds_singing", "wind_blowing")

        self.runs = []
        for run_idx in (1, 2, 3):
            run = {"desed": {}, "maestro": {}}
            for clip in self.desed_durations:
                run["desed"][clip] = read_score_file(d / f"run{run_idx}" / f"{clip}.tsv")
            for rec, duration in self.maestro_durations.items():
                windows = []
                hop = CLIP_LENGTH * (1.0 - OVERLAP)
                k = 0
                while k * hop + CLIP_LENGTH <= duration + 1e-9:
                    windows.append((k * hop, k * hop + CLIP_LENGTH))
                    k += 1
                if duration - windows[-1][1] > 1e-9:
                    windows.append((duration - CLIP_LENGTH, duration))
                loaded = []
                for start, end in windows:
                    clip_id = f"{rec}@{round(start * 1000)}-{round(end * 1000)}"
                    bp, vals, classes = read_score_file(d / f"run{run_idx}" / f"{clip_id}.tsv")
                    loaded.append((start, end, bp, vals, classes))
                run["maestro"][rec] = loaded
            self.runs.append(run)

        # recording-level segment scores and labels, per run (sample-independent)
        self.maestro_segments = []  # run -> rec -> cls -> [(score, label)]
        for run in self.runs:
            per_rec = {}
            for rec, loaded in run["maestro"].items():
                duration = self.maestro_durations[rec]
                n_seg = math.ceil(duration - 1e-9)
                per_cls = {}
                for cls in self.maestro_classes:
                    windows = [
                        (start, end, bp, column(vals, classes, cls))
                        for start, end, bp, vals, classes in loaded
                    ]
                    seg_scores = naive_reconstruct(windows, duration, SEG_LEN)
                    labels = [False] * n_seg
                    for on, off, lcls, conf in self.soft_labels.get(rec, []):
                        if lcls != cls or conf < TAU:
                            continue
                        for j in range(n_seg):
                            s_lo, s_hi = j * SEG_LEN, min((j + 1) * SEG_LEN, duration)
                            if min(off, s_hi) - max(on, s_lo) > 1e-9:
                                labels[j] = True
                    per_cls[cls] = list(zip(seg_scores, labels))
                per_rec[rec] = per_cls
            self.maestro_segments.append(per_rec)

        # clip-level segment scores and labels for the strong dataset
        self.desed_segments = []  # run -> clip -> cls -> [(score, label)]
        for run in self.runs:
            per_clip = {}
            for clip, (bp, vals, classes) in run["desed"].items():
                duration = self.desed_durations[clip]
                n_seg = math.ceil(duration - 1e-9)
                per_cls = {}
                for cls in self.desed_classes:
                    col = column(vals, classes, cls)
                    seg_scores = [
                        naive_interval_mean(bp, col, j * SEG_LEN, min((j + 1) * SEG_LEN, duration))
                        for j in range(n_seg)
                    ]
                    labels = [False] * n_seg
                    for on, off, ecls in self.desed_refs.get(clip, []):
                        if ecls != cls:
                            continue
                        for j in range(n_seg):
                            s_lo, s_hi = j * SEG_LEN, min((j + 1) * SEG_LEN, duration)
                            if min(off, s_hi) - max(on, s_lo) > 1e-9:
                                labels[j] = True
                    per_cls[cls] = list(zip(seg_scores, labels))
                per_clip[clip] = per_cls
            self.desed_segments.append(per_clip)

    # --- strong dataset -----------------------------------------------------

    def desed_psds(self, run_idx, instances):
        class_ops = {}
        for cls in self.desed_classes:
            distinct = sorted(
                {
                    v
                    for clip in set(instances)
                    for v in column(*self._desed_cols(run_idx, clip), cls)
                }
            )
            thresholds = distinct + [math.inf]
            hours = sum(self.desed_durations[c] for c in instances) / 3600.0
            ref_count = sum(
                1 for c in instances for (on, off, ecls) in self.desed_refs.get(c, []) if ecls == cls
            )
            if ref_count == 0:
                continue
            fp_rates, tp_rates = [], []
            for tau in thresholds:
                tp_total, fp_total = 0, 0
                for clip in instances:
                    bp, vals, classes = self.runs[run_idx]["desed"][clip]
                    dets = naive_runs(bp, column(vals, classes, cls), tau)
                    refs = [
                        (on, off)
                        for on, off, ecls in self.desed_refs.get(clip, [])
                        if ecls == cls
                    ]
                    covered = [0.0] * len(refs)
                    for d_on, d_off in dets:
                        inter = sum(
                            max(0.0, min(d_off, r_off) - max(d_on, r_on)) for r_on, r_off in refs
                        )
                        if inter / (d_off - d_on) >= RHO:
                            for k, (r_on, r_off) in enumerate(refs):
                                covered[k] += max(0.0, min(d_off, r_off) - max(d_on, r_on))
                        else:
                            fp_total += 1
                    tp_total += sum(
                        1
                        for k, (r_on, r_off) in enumerate(refs)
                        if covered[k] / (r_off - r_on) >= RHO
                    )
                fp_rates.append(fp_total / hours)
                tp_rates.append(tp_total / ref_count)
            class_ops[cls] = (fp_rates, tp_rates)
        _, _, value = naive_psd_roc_and_psds(class_ops, alpha_st=1.0, e_max=E_MAX)
        return value, class_ops

    def _desed_cols(self, run_idx, clip):
        bp, vals, classes = self.runs[run_idx]["desed"][clip]
        return vals, classes

    def desed_collar(self, run_idx, instances):
        per_class = defaultdict(lambda: [0, 0, 0])
        for clip in instances:
            bp, vals, classes = self.runs[run_idx]["desed"][clip]
            for cls in self.desed_classes:
                dets = naive_runs(bp, column(vals, classes, cls), TAU)
                refs = [
                    (on, off) for on, off, ecls in self.desed_refs.get(clip, []) if ecls == cls
                ]
                tp, fp, fn = naive_collar_counts(dets, refs, COLLAR, OFFSET_RATE)
                per_class[cls][0] += tp
                per_class[cls][1] += fp
                per_class[cls][2] += fn
        f1s = {}
        for cls, (tp, fp, fn) in per_class.items():
            if tp + fn == 0:
                continue
            f1s[cls] = 2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
        macro = sum(f1s.values()) / len(f1s) if f1s else 0.0
        return macro, f1s

    def _pooled_segments(self, segment_store, run_idx, instances, classes):
        pooled = {cls: [] for cls in classes}
        for unit in instances:
            for cls in classes:
                pooled[cls].extend(segment_store[run_idx][unit][cls])
        return pooled

    @staticmethod
    def segment_metrics(pooled):
        fixed_f1, fixed_er, opt_f1, opt_er = {}, {}, {}, {}
        for cls, segments in pooled.items():
            if not any(y for _, y in segments):
                continue
            f1, er = naive_segment_f1_er(segments, TAU)
            fixed_f1[cls], fixed_er[cls] = f1, er
            _, f1o, ero = naive_best_f1(segments)
            opt_f1[cls], opt_er[cls] = f1o, ero
        macro = lambda d: sum(d.values()) / len(d) if d else 0.0
        return {
            "segment_f1_fixed": macro(fixed_f1),
            "segment_er_fixed": macro(fixed_er),
            "segment_f1_optimal": macro(opt_f1),
            "segment_er_optimal": macro(opt_er),
        }, fixed_f1, fixed_er, opt_f1, opt_er

    @staticmethod
    def segmpauc(pooled):
        values = {}
        for cls, segments in pooled.items():
            try:
                fpr, tpr = naive_segment_roc(segments)
            except ValueError:
                continue
            values[cls] = naive_partial_auc(fpr, tpr, MAX_FPR)
        macro = sum(sorted(values.values())) / len(values)
        return macro, values

    # --- full report ----------------------------------------------------------

    def build_report(self):
        desed_plan = balanced_bootstrap(sorted(self.desed_durations), N_SAMPLES, SEED)
        maestro_plan = balanced_bootstrap(sorted(self.maestro_durations), N_SAMPLES, SEED)
        series = defaultdict(list)
        for run_idx in range(3):
            for sample in desed_plan.samples:
                instances = list(sample)
                value, _ = self.desed_psds(run_idx, instances)
                series["psds1"].append(value)
                macro_collar, _ = self.desed_collar(run_idx, instances)
                series["desed.collar_f1"].append(macro_collar)
                pooled = self._pooled_segments(
                    self.desed_segments, run_idx, instances, self.desed_classes
                )
                macros, *_ = self.segment_metrics(pooled)
                for name, v in macros.items():
                    series[f"desed.{name}"].append(v)
        for run_idx in range(3):
            for sample in maestro_plan.samples:
                instances = list(sample)
                pooled = self._pooled_segments(
                    self.maestro_segments, run_idx, instances, self.maestro_classes
                )
                macro, _ = self.segmpauc(pooled)
                series["segmpauc"].append(macro)
                macros, *_ = self.segment_metrics(pooled)
                for name, v in macros.items():
                    series[f"maestro.{name}"].append(v)

        metrics = {}
        for name, values in series.items():
            mean, std = naive_mean_std(values)
            metrics[name] = {"mean": mean, "std": std, "results": values}
        ranking = metrics["psds1"]["mean"] + metrics["segmpauc"]["mean"]
        return {
            "metrics": metrics,
            "ranking": ranking,
            "per_class": {"desed": self.desed_per_class(), "maestro": self.maestro_per_class()},
        }

    def desed_per_class(self):
        clips = sorted(self.desed_durations)
        acc = defaultdict(lambda: defaultdict(list))
        for run_idx in range(3):
            _, class_ops = self.desed_psds(run_idx, clips)
            for cls, (fp_rates, tp_rates) in class_ops.items():
                grid = sorted(set(fp_rates))
                area = 0.0
                for i, e in enumerate(grid):
                    if e >= E_MAX:
                        break
                    right = grid[i + 1] if i + 1 < len(grid) else E_MAX
                    area += naive_support(fp_rates, tp_rates, e) * (min(right, E_MAX) - e)
                acc[cls]["psds1"].append(area / E_MAX)
            _, collar_per_class = self.desed_collar(run_idx, clips)
            for cls, f1 in collar_per_class.items():
                acc[cls]["collar_f1"].append(f1)
            pooled = self._pooled_segments(self.desed_segments, run_idx, clips, self.desed_classes)
            _, ff1, fer, of1, oer = self.segment_metrics(pooled)
            for cls in ff1:
                acc[cls]["segment_f1_fixed"].append(ff1[cls])
                acc[cls]["segment_er_fixed"].append(fer[cls])
                acc[cls]["segment_f1_optimal"].append(of1[cls])
                acc[cls]["segment_er_optimal"].append(oer[cls])
        return {
            cls: {name: sum(v) / len(v) for name, v in table.items()}
            for cls, table in acc.items()
        }

    def maestro_per_class(self):
        recs = sorted(self.maestro_durations)
        acc = defaultdict(lambda: defaultdict(list))
        for run_idx in range(3):
            pooled = self._pooled_segments(
                self.maestro_segments, run_idx, recs, self.maestro_classes
            )
            _, pauc_per_class = self.segmpauc(pooled)
            for cls, v in pauc_per_class.items():
                acc[cls]["segmpauc"].append(v)
            _, ff1, fer, of1, oer = self.segment_metrics(pooled)
            for cls in ff1:
                acc[cls]["segment_f1_fixed"].append(ff1[cls])
                acc[cls]["segment_er_fixed"].append(fer[cls])
                acc[cls]["segment_f1_optimal"].append(of1[cls])
                acc[cls]["segment_er_optimal"].append(oer[cls])
        return {
            cls: {name: sum(v) / len(v) for name, v in table.items()}
            for cls, table in acc.items()
        }


def build_report(fixture_dir):
    return GoldenOracle(fixture_dir).build_report()
