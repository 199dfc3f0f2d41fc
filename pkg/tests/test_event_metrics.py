import numpy as np
import pytest

from conftest import constant_timeline, make_timeline, random_psds_instance
from naive import (
    naive_collar_counts,
    naive_operating_points,
    naive_psd_roc_and_psds,
)
from sedmetrics.data import Event
from sedmetrics.errors import ValidationError
from sedmetrics.event_metrics import (
    PSDSEvaluator,
    PSDSParams,
    collar_f1,
    compute_psd_roc,
    match_events_dtc_gtc,
    psds,
)

PARAMS = PSDSParams(rho_dtc=0.7, rho_gtc=0.7, alpha_st=1.0, e_max=100.0)


class TestMatchEventsDtcGtc:
    def test_perfect_overlap(self):
        counts = match_events_dtc_gtc(
            [Event("a", 0.0, 5.0, "x")], [Event("a", 0.0, 5.0, "x")], 0.7, 0.7
        )
        assert counts["x"] == (1, 0, 1)

    def test_dtc_ratio_below_threshold(self):
        counts = match_events_dtc_gtc(
            [Event("a", 0.0, 10.0, "x")], [Event("a", 0.0, 6.0, "x")], 0.7, 0.7
        )
        assert counts["x"] == (0, 1, 1)

    def test_split_detection_covers_reference(self):
        counts = match_events_dtc_gtc(
            [Event("a", 0.0, 4.0, "x"), Event("a", 4.0, 8.0, "x")],
            [Event("a", 0.0, 8.0, "x")],
            0.7,
            0.7,
        )
        assert counts["x"] == (1, 0, 1)

    def test_cross_clip_and_cross_class_isolation(self):
        counts = match_events_dtc_gtc(
            [Event("a", 0.0, 5.0, "x"), Event("b", 0.0, 5.0, "y")],
            [Event("a", 0.0, 5.0, "y"), Event("b", 0.0, 5.0, "x")],
            0.7,
            0.7,
        )
        assert counts["x"] == (0, 1, 1)
        assert counts["y"] == (0, 1, 1)

    def test_counts_bounded(self, rng):
        for _ in range(20):
            scores, references, durations, classes = random_psds_instance(rng)
            detections = [
                Event(c, float(on), float(on + 0.5), str(rng.choice(classes)))
                for c in scores
                for on in rng.choice(np.arange(0.0, 7.5, 0.5), size=3, replace=False)
            ]
            refs = [e for evs in references.values() for e in evs]
            counts = match_events_dtc_gtc(detections, refs, 0.7, 0.7)
            per_class_dets = {}
            for d in detections:
                per_class_dets[d.class_label] = per_class_dets.get(d.class_label, 0) + 1
            for cls, (tp, fp, n_ref) in counts.items():
                assert tp <= n_ref
                assert fp <= per_class_dets.get(cls, 0)


def _clip_columns(scores, cls):
    return {
        clip_id: (t.breakpoints.tolist(), t.column(cls).tolist())
        for clip_id, t in scores.items()
    }


def _clip_refs(references, cls):
    return {
        clip_id: [(e.onset, e.offset) for e in evs if e.class_label == cls]
        for clip_id, evs in references.items()
    }


def _naive_full(scores, references, durations, classes, params):
    """Naive PSD-ROC + PSDS over all classes with references."""
    class_ops = {}
    per_class = {}
    for cls in classes:
        thr, fp, tp, n_ref = naive_operating_points(
            _clip_columns(scores, cls), _clip_refs(references, cls), durations,
            params.rho_dtc, params.rho_gtc,
        )
        if n_ref > 0:
            class_ops[cls] = (fp, tp)
            per_class[cls] = (thr, fp, tp)
    grid, etpr, value = naive_psd_roc_and_psds(class_ops, params.alpha_st, params.e_max)
    return per_class, value


class TestPsdRocBruteForce:
    def test_operating_points_and_psds_match_naive(self, rng):
        import warnings

        for _ in range(60):
            scores, references, durations, classes = random_psds_instance(rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                curve = compute_psd_roc(scores, references, PARAMS, durations, classes)
                value = psds(curve, PARAMS)
            naive_ops, naive_value = _naive_full(scores, references, durations, classes, PARAMS)
            assert set(curve.operating_points) == set(naive_ops)
            for cls, (thr, fp, tp) in naive_ops.items():
                ops = curve.operating_points[cls]
                assert np.array_equal(ops.thresholds, thr)
                assert np.array_equal(ops.fp_rates, fp)
                assert np.array_equal(ops.tp_rates, tp)
            assert value == pytest.approx(naive_value, abs=1e-12)


class TestPsdsOracles:
    def _oracle_corpus(self):
        # scores exactly 1 inside references, 0 elsewhere; events cover <70%
        classes = ("x", "y")
        scores, references = {}, {}
        durations = {"a": 10.0, "b": 10.0}
        layout = {
            "a": [("x", 1.0, 3.0), ("y", 5.0, 6.0)],
            "b": [("x", 4.0, 6.0), ("y", 0.0, 2.0), ("y", 7.0, 8.0)],
        }
        for clip_id, events in layout.items():
            breakpoints = np.arange(0.0, 10.5, 0.5)
            values = np.zeros((20, 2))
            refs = []
            for cls, on, off in events:
                col = classes.index(cls)
                values[int(on * 2) : int(off * 2), col] = 1.0
                refs.append(Event(clip_id, on, off, cls))
            scores[clip_id] = make_timeline(clip_id, classes, breakpoints, values)
            references[clip_id] = refs
        return scores, references, durations, classes

    def test_oracle_scores_give_one(self):
        scores, references, durations, classes = self._oracle_corpus()
        evaluator = PSDSEvaluator(scores, references, PARAMS, durations, classes)
        curve = evaluator.curve()
        assert np.allclose(curve.effective_tpr, 1.0, atol=1e-12)
        assert evaluator.psds() == pytest.approx(1.0, abs=1e-9)

    def test_all_zero_scores_give_zero(self):
        scores, references, durations, classes = self._oracle_corpus()
        zero_scores = {
            c: constant_timeline(c, classes, durations[c], 0.0) for c in scores
        }
        evaluator = PSDSEvaluator(zero_scores, references, PARAMS, durations, classes)
        assert evaluator.psds() == pytest.approx(0.0, abs=1e-9)

    def test_constant_half_tpr_integrates_to_half(self):
        # one class, one operating point at (fp=0, tp=0.5): curve is 0.5 on [0, e_max]
        classes = ("x",)
        scores = {"a": make_timeline("a", classes, [0.0, 1.0, 10.0], [[1.0], [0.0]])}
        references = {"a": [Event("a", 0.0, 1.0, "x"), Event("a", 4.0, 5.0, "x")]}
        evaluator = PSDSEvaluator(scores, references, PARAMS, {"a": 10.0}, classes)
        assert evaluator.psds() == pytest.approx(0.5, abs=1e-12)

    def test_two_class_alpha_penalty_zeroes_etpr(self):
        classes = ("good", "bad")
        values = np.zeros((20, 2))
        values[2:4, 0] = 1.0  # one perfect event for class "good"
        scores = {"a": make_timeline("a", classes, np.arange(0.0, 10.5, 0.5), values)}
        references = {
            "a": [Event("a", 1.0, 2.0, "good"), Event("a", 5.0, 6.0, "bad")]
        }
        evaluator = PSDSEvaluator(scores, references, PARAMS, {"a": 10.0}, classes)
        curve = evaluator.curve()
        tpr = {c: curve.class_tpr[:, i] for i, c in enumerate(curve.class_labels)}
        assert np.allclose(tpr["good"], 1.0)
        assert np.allclose(tpr["bad"], 0.0)
        # mean 0.5, population std 0.5, alpha 1 -> eTPR 0 at every budget
        assert np.allclose(curve.effective_tpr, 0.0, atol=1e-12)
        assert evaluator.psds() == pytest.approx(0.0, abs=1e-12)

    def test_single_class_alpha_has_no_effect(self, rng):
        scores, references, durations, classes = random_psds_instance(rng, max_classes=1)
        values = []
        for alpha in (0.0, 0.5, 1.0):
            params = PSDSParams(alpha_st=alpha)
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                values.append(PSDSEvaluator(scores, references, params, durations, classes).psds())
        assert values[0] == pytest.approx(values[1], abs=1e-15)
        assert values[0] == pytest.approx(values[2], abs=1e-15)

    def test_psds_bounds_and_param_monotonicity(self, rng):
        import warnings

        for _ in range(10):
            scores, references, durations, classes = random_psds_instance(rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                v_alpha = []
                for alpha in (0.0, 0.5, 1.0):
                    params = PSDSParams(alpha_st=alpha)
                    v_alpha.append(
                        PSDSEvaluator(scores, references, params, durations, classes).psds()
                    )
                assert all(0.0 <= v <= 1.0 for v in v_alpha)
                assert v_alpha[0] >= v_alpha[1] >= v_alpha[2] - 1e-15
                # with no std penalty the effective curve is non-decreasing,
                # so its prefix average grows with the FP budget
                v_emax = []
                for e_max in (10.0, 50.0, 100.0):
                    params = PSDSParams(alpha_st=0.0, e_max=e_max)
                    evaluator = PSDSEvaluator(scores, references, params, durations, classes)
                    v_emax.append(evaluator.psds())
                assert all(0.0 <= v <= 1.0 for v in v_emax)
                assert v_emax[0] <= v_emax[1] + 1e-15 and v_emax[1] <= v_emax[2] + 1e-15

    def test_zero_reference_class_warns_and_is_excluded(self):
        classes = ("x", "empty")
        scores = {"a": constant_timeline("a", classes, 10.0, 0.5)}
        references = {"a": [Event("a", 0.0, 8.0, "x")]}
        with pytest.warns(UserWarning, match="empty"):
            curve = compute_psd_roc(scores, references, PARAMS, {"a": 10.0}, classes)
        assert curve.class_labels == ("x",)
        assert curve.skipped_classes == ("empty",)

    def test_no_references_at_all_raises(self):
        classes = ("x",)
        scores = {"a": constant_timeline("a", classes, 10.0, 0.5)}
        with pytest.raises(ValidationError):
            compute_psd_roc(scores, {}, PARAMS, {"a": 10.0}, classes)

    def test_psds_rejects_mismatched_params(self):
        classes = ("x",)
        scores = {"a": constant_timeline("a", classes, 10.0, 0.5)}
        references = {"a": [Event("a", 0.0, 2.0, "x")]}
        curve = compute_psd_roc(scores, references, PARAMS, {"a": 10.0}, classes)
        with pytest.raises(ValidationError, match="alpha_st/e_max"):
            psds(curve, PSDSParams(alpha_st=0.0))


class TestMonotoneTransformInvariance:
    @staticmethod
    def _transform(scores, fn):
        return {
            clip_id: make_timeline(
                clip_id, t.class_labels, t.breakpoints.copy(), fn(t.scores.copy())
            )
            for clip_id, t in scores.items()
        }

    @pytest.mark.parametrize("fn", [lambda x: x**3, lambda x: 0.5 + 0.4 * x])
    def test_psds_invariant(self, rng, fn):
        import warnings

        for _ in range(15):
            scores, references, durations, classes = random_psds_instance(rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                base = PSDSEvaluator(scores, references, PARAMS, durations, classes).psds()
                mapped = PSDSEvaluator(
                    self._transform(scores, fn), references, PARAMS, durations, classes
                ).psds()
            assert mapped == pytest.approx(base, abs=1e-12)


class TestCollarF1:
    def test_identical_events_give_one(self):
        events = {"a": [Event("a", 0.0, 5.0, "x"), Event("a", 6.0, 8.0, "y")]}
        result = collar_f1(events, events)
        assert result.macro_f1 == pytest.approx(1.0)

    def test_offset_tolerance_expands_with_duration(self):
        dets = {"a": [Event("a", 0.15, 5.1, "x")]}
        refs = {"a": [Event("a", 0.0, 5.0, "x")]}
        result = collar_f1(dets, refs, onset_collar=0.2, offset_collar_rate=0.2)
        assert result.per_class["x"] == (pytest.approx(1.0), 1, 0, 0)

    def test_onset_outside_collar_fails(self):
        dets = {"a": [Event("a", 0.3, 5.0, "x")]}
        refs = {"a": [Event("a", 0.0, 5.0, "x")]}
        result = collar_f1(dets, refs, onset_collar=0.2, offset_collar_rate=0.2)
        assert result.per_class["x"] == (pytest.approx(0.0), 0, 1, 1)

    def test_one_to_one_matching(self):
        # two references, one qualifying detection: only one reference matches
        dets = {"a": [Event("a", 0.0, 1.0, "x")]}
        refs = {"a": [Event("a", 0.0, 1.0, "x"), Event("a", 0.1, 1.1, "x")]}
        result = collar_f1(dets, refs)
        f1, tp, fp, fn = result.per_class["x"]
        assert (tp, fp, fn) == (1, 0, 1)

    def test_matches_naive(self, rng):
        for _ in range(30):
            dets, refs = [], []
            for _ in range(int(rng.integers(1, 8))):
                on = float(rng.choice(np.arange(0.0, 8.0, 0.25)))
                dets.append((on, on + float(rng.choice([0.5, 1.0, 2.0]))))
            for _ in range(int(rng.integers(1, 6))):
                on = float(rng.choice(np.arange(0.0, 8.0, 0.25)))
                refs.append((on, on + float(rng.choice([0.5, 1.0, 2.0]))))
            det_events = {"a": [Event("a", on, off, "x") for on, off in dets]}
            ref_events = {"a": [Event("a", on, off, "x") for on, off in refs]}
            result = collar_f1(det_events, ref_events)
            tp, fp, fn = naive_collar_counts(dets, refs, 0.2, 0.2)
            assert result.per_class["x"][1:] == (tp, fp, fn)
