from collections import Counter

import pytest

from conftest import random_psds_instance
from naive import naive_mean_std
from sedmetrics.bootstrap import (
    GENERATOR_ID,
    MetricReport,
    MetricStats,
    aggregate_bootstrap,
    balanced_bootstrap,
    evaluate_bootstrapped,
    ranking_metric,
)
from sedmetrics.errors import ValidationError
from sedmetrics.event_metrics import CollarParams, PSDSParams
from sedmetrics.segment_metrics import SegMPAUCParams


class TestBalancedBootstrap:
    def test_every_clip_sampled_equally_often(self):
        plan = balanced_bootstrap(["a", "b", "c"], n_samples=20, seed=1)
        totals = Counter(c for sample in plan.samples for c in sample)
        assert totals == {"a": 20, "b": 20, "c": 20}

    def test_sample_sizes(self):
        plan = balanced_bootstrap(["a", "b", "c"], n_samples=20, seed=1)
        assert all(len(s) == 3 for s in plan.samples)
        assert plan.n_samples == 20

    def test_deterministic(self):
        a = balanced_bootstrap(["a", "b", "c", "d"], n_samples=10, seed=42)
        b = balanced_bootstrap(["a", "b", "c", "d"], n_samples=10, seed=42)
        assert a.samples == b.samples
        assert a.generator_id == GENERATOR_ID

    def test_seed_changes_plan(self):
        a = balanced_bootstrap(["a", "b", "c", "d"], n_samples=10, seed=1)
        b = balanced_bootstrap(["a", "b", "c", "d"], n_samples=10, seed=2)
        assert a.samples != b.samples

    def test_empty_clips_rejected(self):
        with pytest.raises(ValidationError):
            balanced_bootstrap([], n_samples=5, seed=0)


class TestAggregate:
    def test_mean_and_population_std(self):
        plan = balanced_bootstrap(["a", "b"], n_samples=2, seed=0)
        values = iter([0.4, 0.6])

        def fn(weights):
            return {"m": next(values)}

        report = aggregate_bootstrap([fn], plan)
        assert report.metrics["m"].mean == pytest.approx(0.5)
        assert report.metrics["m"].std == pytest.approx(0.1)

    def test_constant_results_have_zero_std(self):
        plan = balanced_bootstrap(["a"], n_samples=5, seed=0)
        report = aggregate_bootstrap([lambda w: {"m": 0.7}], plan)
        assert report.metrics["m"].mean == pytest.approx(0.7)
        assert report.metrics["m"].std == 0.0

    def test_result_count_runs_times_samples(self):
        plan = balanced_bootstrap(["a", "b"], n_samples=20, seed=0)
        report = aggregate_bootstrap([lambda w: {"m": 0.1}] * 3, plan)
        assert len(report.metrics["m"].results) == 60
        assert report.n_runs == 3

    def test_parallel_jobs_identical(self, rng):
        plan = balanced_bootstrap([f"c{i}" for i in range(6)], n_samples=10, seed=0)

        def make_fn(run_idx):
            def fn(weights):
                return {"m": sum(weights.get(f"c{i}", 0) * (i + run_idx) for i in range(6)) / 100}

            return fn

        fns = [make_fn(r) for r in range(3)]
        serial = aggregate_bootstrap(fns, plan, jobs=1)
        threaded = aggregate_bootstrap(fns, plan, jobs=4)
        assert serial.metrics["m"].results == threaded.metrics["m"].results

    def test_mean_std_match_naive(self, rng):
        plan = balanced_bootstrap(["a", "b", "c"], n_samples=8, seed=0)
        values = rng.uniform(0, 1, size=8).tolist()
        it = iter(values)
        report = aggregate_bootstrap([lambda w: {"m": next(it)}], plan)
        mean, std = naive_mean_std(values)
        assert report.metrics["m"].mean == pytest.approx(mean, abs=1e-15)
        assert report.metrics["m"].std == pytest.approx(std, abs=1e-15)


class TestEvaluateBootstrapped:
    def test_event_dataset_identity_sample_equals_unresampled(self, rng):
        import warnings

        from sedmetrics.bootstrap import EventDatasetEvaluator

        scores, references, durations, classes = random_psds_instance(rng, max_clips=4)
        clip_ids = sorted(scores)
        plan = balanced_bootstrap(clip_ids, n_samples=5, seed=9)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = evaluate_bootstrapped(
                [scores],
                references,
                PSDSParams(),
                plan,
                durations=durations,
                collar_params=CollarParams(),
                seg_params=SegMPAUCParams(),
                class_labels=classes,
            )
            prepared = EventDatasetEvaluator(
                [scores], references, durations, PSDSParams(), CollarParams(),
                SegMPAUCParams(), classes,
            )
            fn = prepared.metric_fn(0)
            unresampled = fn(None)
            identity = fn({c: 1 for c in clip_ids})
        for name, value in unresampled.items():
            assert identity[name] == value
        assert len(report.metrics["psds1"].results) == 5

    def test_sixty_results_with_three_runs(self, rng):
        import warnings

        scores, references, durations, classes = random_psds_instance(rng, max_clips=3)
        plan = balanced_bootstrap(sorted(scores), n_samples=20, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = evaluate_bootstrapped(
                [scores, scores, scores], references, PSDSParams(), plan,
                durations=durations, class_labels=classes,
            )
        assert len(report.metrics["psds1"].results) == 60

    def test_missing_clip_in_run_listed(self, rng):
        scores, references, durations, classes = random_psds_instance(rng, max_clips=3)
        plan = balanced_bootstrap(sorted(scores) + ["ghost"], n_samples=2, seed=0)
        with pytest.raises(ValidationError, match="ghost"):
            evaluate_bootstrapped(
                [scores], references, PSDSParams(), plan,
                durations=durations, class_labels=classes,
            )


class TestRankingMetric:
    def _report(self, psds_mean, segmpauc_mean):
        return MetricReport(
            metrics={
                "psds1": MetricStats(psds_mean, 0.0, (psds_mean,)),
                "segmpauc": MetricStats(segmpauc_mean, 0.0, (segmpauc_mean,)),
            },
            n_runs=1,
            n_samples=1,
            seed=0,
        )

    def test_published_baseline_fixture(self):
        assert ranking_metric(self._report(0.491, 0.731)) == pytest.approx(1.222, abs=1e-12)

    def test_zero(self):
        assert ranking_metric(self._report(0.0, 0.0)) == 0.0

    def test_random_init_fixture(self):
        assert ranking_metric(self._report(0.0, 0.02)) == pytest.approx(0.02, abs=1e-12)

    def test_missing_metric_rejected(self):
        report = MetricReport(
            metrics={"psds1": MetricStats(0.5, 0.0, (0.5,))}, n_runs=1, n_samples=1, seed=0
        )
        with pytest.raises(ValidationError, match="segmpauc"):
            ranking_metric(report)
