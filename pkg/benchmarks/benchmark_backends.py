#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels and a full PSD-ROC evaluation on a synthetic
corpus, once per backend, and prints a comparison table.

Usage:
    python benchmarks/benchmark_backends.py [--clips N] [--repeats N]
"""

import argparse
import time

import numpy as np

from sedmetrics.backend import numba_available
from sedmetrics.data import Event, ScoreTimeline
from sedmetrics.event_metrics import PSDSEvaluator, PSDSParams
from sedmetrics.kernels import interval_means, moving_median, sweep_clip_counts


def synthetic_corpus(n_clips, n_intervals, n_classes, seed=0):
    rng = np.random.default_rng(seed)
    classes = tuple(f"c{i}" for i in range(n_classes))
    scores, references, durations = {}, {}, {}
    duration = 10.0
    breakpoints = np.linspace(0.0, duration, n_intervals + 1)
    for k in range(n_clips):
        clip_id = f"clip{k:04d}"
        values = np.round(rng.beta(0.4, 0.6, size=(n_intervals, n_classes)), 3)
        scores[clip_id] = ScoreTimeline(clip_id, classes, breakpoints, values)
        events = []
        for _ in range(rng.integers(1, 5)):
            onset = float(rng.uniform(0, duration - 1.5))
            events.append(
                Event(clip_id, onset, onset + float(rng.uniform(0.3, 1.5)),
                      str(rng.choice(classes)))
            )
        references[clip_id] = sorted(events, key=lambda e: e.onset)
        durations[clip_id] = duration
    return scores, references, durations, classes


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--clips", type=int, default=100)
    parser.add_argument("--intervals", type=int, default=156, help="score rows per clip")
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not numba_available():
        print("numba is not importable; nothing to compare")
        return

    rng = np.random.default_rng(1)
    breakpoints = np.linspace(0.0, 10.0, args.intervals + 1)
    values = rng.random((args.intervals, args.classes))
    edges = np.arange(0.0, 10.0 + 1e-9, 0.064)
    frames = rng.random((edges.size - 1, args.classes))
    lengths = rng.choice([3, 7, 11, 19, 27], size=args.classes)
    col = np.round(values[:, 0], 3)
    ref_on = np.sort(rng.uniform(0, 8, size=4))
    ref_off = ref_on + rng.uniform(0.2, 1.5, size=4)
    thresholds = np.unique(col)
    scores, references, durations, classes = synthetic_corpus(
        args.clips, args.intervals, args.classes
    )

    workloads = {
        f"interval_means ({args.intervals} rows -> {edges.size - 1} frames, x{args.clips})": lambda b: [
            interval_means(breakpoints, values, edges, backend=b) for _ in range(args.clips)
        ],
        f"moving_median ({edges.size - 1} frames x {args.classes} classes, x{args.clips})": lambda b: [
            moving_median(frames, lengths, backend=b) for _ in range(args.clips)
        ],
        f"sweep_clip_counts ({thresholds.size} thresholds, x{args.clips})": lambda b: [
            sweep_clip_counts(breakpoints, col, ref_on, ref_off, thresholds, 0.7, 0.7, backend=b)
            for _ in range(args.clips)
        ],
        f"full PSD-ROC ({args.clips} clips, {args.classes} classes)": lambda b: PSDSEvaluator(
            scores, references, PSDSParams(), durations, classes, backend=b
        ).psds(),
    }

    # warm up the JIT so compilation is not measured
    for fn in workloads.values():
        fn("numba")

    name_width = max(len(n) for n in workloads)
    print(f"{'workload':<{name_width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name, fn in workloads.items():
        t_numba = timeit(lambda: fn("numba"), args.repeats)
        t_numpy = timeit(lambda: fn("numpy"), args.repeats)
        print(
            f"{name:<{name_width}}  {t_numba * 1e3:>8.1f}ms  {t_numpy * 1e3:>8.1f}ms  "
            f"{t_numpy / t_numba:>7.1f}x"
        )


if __name__ == "__main__":
    main()
