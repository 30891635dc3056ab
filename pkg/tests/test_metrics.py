"""Binary metrics, ROC, best-F1 sweep, and multi-policy comparison."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driveload import (
    ConfusionMatrix,
    InsufficientDataError,
    InvariantViolation,
    LabelWindow,
    best_f1_threshold,
    binary_metrics,
    compare_policies,
    fixed_policy,
    labeled_filter_scores,
    macro_f1,
    roc,
)
from driveload.experiments import run_adaptation_trial

from conftest import HIGH, LOW, flat_tables, label_lists, make_journey, prompt, score_lists
from oracles import best_f1_brute, counting_binary_metrics, mann_whitney_auc

# paired (labels, scores) of one length, both classes not guaranteed
paired_scored_labels = st.integers(min_value=1, max_value=50).flatmap(
    lambda n: st.tuples(
        st.lists(st.sampled_from([LOW, HIGH]), min_size=n, max_size=n),
        st.lists(
            st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
            min_size=n,
            max_size=n,
        ),
    )
)

# coarse score grid to provoke ties
tied_scored_labels = st.integers(min_value=2, max_value=40).flatmap(
    lambda n: st.tuples(
        st.lists(st.sampled_from([LOW, HIGH]), min_size=n, max_size=n),
        st.lists(st.integers(min_value=0, max_value=4), min_size=n, max_size=n),
    )
)


class TestBinaryMetrics:
    def test_hand_worked_counts(self):
        truth = [HIGH, HIGH, LOW, LOW, HIGH]
        pred = [HIGH, LOW, LOW, HIGH, HIGH]
        m = binary_metrics(truth, pred)
        assert m.accuracy == pytest.approx(3 / 5)
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)
        assert m.flags == ()

    def test_perfect_all_high(self):
        m = binary_metrics([HIGH] * 4, [HIGH] * 4)
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_never_predicting_high_is_flagged(self):
        m = binary_metrics([HIGH, LOW, HIGH], [LOW, LOW, LOW])
        assert m.precision == 0.0
        assert m.recall == 0.0
        assert m.f1 == 0.0
        assert "precision_zero_division" in m.flags
        assert "f1_zero_division" in m.flags

    def test_no_high_in_truth_flags_recall(self):
        m = binary_metrics([LOW, LOW], [HIGH, LOW])
        assert "recall_zero_division" in m.flags
        assert m.recall == 0.0

    def test_empty_and_misaligned_rejected(self):
        with pytest.raises(InvariantViolation):
            binary_metrics([], [])
        with pytest.raises(InvariantViolation):
            binary_metrics([HIGH], [HIGH, LOW])
        with pytest.raises(InvariantViolation):
            binary_metrics([HIGH, "bogus"], [HIGH, LOW])

    @given(truth=label_lists, data=st.data())
    def test_matches_counting_oracle(self, truth, data):
        pred = data.draw(
            st.lists(
                st.sampled_from([LOW, HIGH]),
                min_size=len(truth),
                max_size=len(truth),
            )
        )
        m = binary_metrics(truth, pred)
        t = [x == HIGH for x in truth]
        p = [x == HIGH for x in pred]
        acc, prec, rec, f1 = counting_binary_metrics(t, p)
        assert m.accuracy == pytest.approx(acc, abs=1e-12)
        assert m.precision == pytest.approx(prec, abs=1e-12)
        assert m.recall == pytest.approx(rec, abs=1e-12)
        assert m.f1 == pytest.approx(f1, abs=1e-12)

    @given(truth=label_lists, data=st.data())
    def test_f1_is_harmonic_mean(self, truth, data):
        pred = data.draw(
            st.lists(
                st.sampled_from([LOW, HIGH]),
                min_size=len(truth),
                max_size=len(truth),
            )
        )
        m = binary_metrics(truth, pred)
        if m.precision + m.recall > 0:
            want = 2 * m.precision * m.recall / (m.precision + m.recall)
            assert m.f1 == pytest.approx(want, abs=1e-12)


class TestConfusionMatrix:
    def test_counts_and_row_sums(self):
        cm = ConfusionMatrix.from_pairs(
            ["L", "M", "M", "H", "H", "H"],
            ["L", "M", "H", "H", "H", "L"],
            ("L", "M", "H"),
        )
        np.testing.assert_array_equal(
            cm.counts, [[1, 0, 0], [0, 1, 1], [1, 0, 2]]
        )
        np.testing.assert_array_equal(cm.row_sums(), [1, 2, 3])

    def test_unknown_label_rejected(self):
        with pytest.raises(InvariantViolation):
            ConfusionMatrix.from_pairs(["L"], ["X"], ("L", "M", "H"))

    def test_misaligned_rejected(self):
        with pytest.raises(InvariantViolation):
            ConfusionMatrix.from_pairs(["L", "M"], ["L"], ("L", "M"))


class TestMacroF1:
    def test_perfect_prediction(self):
        y = ["L", "L", "M", "M", "H", "H"]
        assert macro_f1(y, y, ("L", "M", "H")) == 1.0

    def test_hand_worked_average(self):
        truth = ["L", "L", "M"]
        pred = ["L", "M", "M"]
        # per-class F1: L -> 2/3, M -> 2/3, H absent -> 0
        assert macro_f1(truth, pred, ("L", "M", "H")) == pytest.approx(4 / 9)

    def test_degenerate_class_contributes_zero(self):
        truth = ["L", "L"]
        pred = ["L", "L"]
        assert macro_f1(truth, pred, ("L", "H")) == pytest.approx(0.5)


class TestRoc:
    def test_perfect_separation(self):
        curve = roc([LOW, LOW, HIGH, HIGH], [0.1, 0.2, 0.8, 0.9])
        assert curve.auc == pytest.approx(1.0)

    def test_constant_scores_are_chance(self):
        curve = roc([LOW, HIGH, LOW, HIGH], [0.5, 0.5, 0.5, 0.5])
        assert curve.auc == pytest.approx(0.5)
        np.testing.assert_allclose(curve.fpr, [0.0, 1.0])
        np.testing.assert_allclose(curve.tpr, [0.0, 1.0])

    def test_curve_shape_invariants(self):
        rng = np.random.default_rng(0)
        scores = rng.integers(0, 6, size=80) / 5.0
        truth = [HIGH if x else LOW for x in rng.integers(0, 2, size=80)]
        curve = roc(truth, scores)
        assert curve.fpr[0] == curve.tpr[0] == 0.0
        assert curve.fpr[-1] == curve.tpr[-1] == 1.0
        assert (np.diff(curve.fpr) >= 0).all()
        assert (np.diff(curve.tpr) >= 0).all()
        assert curve.thresholds[0] == np.inf
        assert (np.diff(curve.thresholds) < 0).all()

    @given(pair=tied_scored_labels)
    @settings(max_examples=150)
    def test_auc_equals_mann_whitney(self, pair):
        truth, scores = pair
        y = [lab == HIGH for lab in truth]
        if not (any(y) and not all(y)):
            return
        curve = roc(truth, [float(s) for s in scores])
        assert abs(curve.auc - mann_whitney_auc(y, scores)) <= 1e-9

    @given(pair=paired_scored_labels)
    @settings(max_examples=100)
    def test_score_reversal_flips_auc(self, pair):
        truth, scores = pair
        y = [lab == HIGH for lab in truth]
        if not (any(y) and not all(y)):
            return
        a = roc(truth, scores).auc
        b = roc(truth, [-s for s in scores]).auc
        assert a + b == pytest.approx(1.0, abs=1e-9)

    def test_single_class_rejected(self):
        with pytest.raises(InsufficientDataError):
            roc([HIGH, HIGH], [0.1, 0.9])
        with pytest.raises(InsufficientDataError):
            roc([LOW, LOW], [0.1, 0.9])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(InvariantViolation):
            roc([LOW, HIGH], [0.1, float("nan")])


class TestBestF1Threshold:
    def test_hand_worked_sweep(self):
        thr, f1 = best_f1_threshold([LOW, HIGH], [0.2, 0.8])
        assert thr == pytest.approx(0.5)
        assert f1 == pytest.approx(1.0)

    def test_tie_prefers_the_lower_threshold(self):
        # thresholds 1.0 (all High) and 3.5 both reach F1 = 2/3
        thr, f1 = best_f1_threshold([HIGH, LOW, LOW, HIGH], [1.0, 2.0, 3.0, 4.0])
        assert f1 == pytest.approx(2 / 3)
        assert thr == pytest.approx(1.0)

    def test_all_low_truth_scores_zero(self):
        thr, f1 = best_f1_threshold([LOW, LOW, LOW], [0.3, 0.6, 0.9])
        assert f1 == 0.0

    @given(pair=tied_scored_labels)
    @settings(max_examples=150)
    def test_matches_brute_force_sweep(self, pair):
        truth, scores = pair
        scores = [float(s) for s in scores]
        thr, f1 = best_f1_threshold(truth, scores)
        want_thr, want_f1 = best_f1_brute([lab == HIGH for lab in truth], scores)
        assert f1 == pytest.approx(want_f1, abs=1e-12)
        assert thr == pytest.approx(want_thr, abs=1e-12)

    @given(truth=label_lists, data=st.data())
    @settings(max_examples=100)
    def test_reported_f1_is_achieved_and_dominant(self, truth, data):
        scores = data.draw(
            st.lists(
                st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=len(truth),
                max_size=len(truth),
            )
        )
        thr, f1 = best_f1_threshold(truth, scores)
        pred_at = lambda t: [HIGH if s >= t else LOW for s in scores]
        assert binary_metrics(truth, pred_at(thr)).f1 == pytest.approx(f1, abs=1e-12)
        assert f1 + 1e-12 >= binary_metrics(truth, pred_at(0.5)).f1


def scored_journey(journey_id="j0", presses=(True, False, True)):
    """Journey with one sample per prompt so every instant gets labeled."""
    prompts = [prompt(10.0 + 20.0 * i, p) for i, p in enumerate(presses)]
    rows = [("a", p.t_prompt + 1.0, 0.5) for p in prompts]
    return make_journey(journey_id=journey_id, sample_rows=rows, prompts=prompts)


class TestLabeledFilterScores:
    def test_flat_tables_hold_the_stationary_score(self):
        j = scored_journey()
        tables = flat_tables(["a"])
        y, s = labeled_filter_scores(j, tables, fixed_policy("Standard"))
        assert y == [LOW, HIGH, LOW]
        for v in s:
            assert v == pytest.approx(5 / 7, abs=1e-9)

    def test_custom_window_drops_distant_samples(self):
        prompts = [prompt(10.0, True)]
        rows = [("a", 10.5, 0.5), ("a", 19.0, 0.5)]
        j = make_journey(sample_rows=rows, prompts=prompts)
        y, s = labeled_filter_scores(
            j, flat_tables(["a"]), fixed_policy("Standard"), LabelWindow(1.0, 1.0)
        )
        assert len(y) == len(s) == 1


class TestComparePolicies:
    def test_identical_policies_give_identical_results(self):
        journeys = [scored_journey("j0"), scored_journey("j1", (False, True, False))]
        tables = flat_tables(["a"])
        report = compare_policies(
            journeys,
            tables,
            {"first": fixed_policy("Standard"), "second": fixed_policy("Standard")},
        )
        a, b = report.policies
        assert (a.name, b.name) == ("first", "second")
        assert a.auc == b.auc
        assert a.f1 == b.f1
        assert a.threshold == b.threshold
        assert a.per_journey == b.per_journey
        assert report.n_journeys == 2

    def test_single_class_journey_has_no_auc(self):
        journeys = [scored_journey("lows", (True, True, True)), scored_journey("mix")]
        report = compare_policies(
            journeys,
            flat_tables(["a"]),
            {"a": fixed_policy("Standard"), "b": fixed_policy("H")},
        )
        rows = {r.journey_id: r for r in report.policies[0].per_journey}
        assert rows["lows"].auc is None
        assert rows["mix"].auc is not None
        assert rows["lows"].n_instances == 3

    def test_per_journey_tables_are_honored(self):
        journeys = [scored_journey("j0"), scored_journey("j1", (False, True, False))]
        tables = flat_tables(["a"])
        pooled = compare_policies(
            journeys, tables, {"a": fixed_policy("Standard"), "b": fixed_policy("L")}
        )
        split = compare_policies(
            journeys,
            None,
            {"a": fixed_policy("Standard"), "b": fixed_policy("L")},
            per_journey_tables={"j0": tables, "j1": tables},
        )
        assert pooled.policies[0].auc == split.policies[0].auc
        assert pooled.policies[1].f1 == split.policies[1].f1

    def test_fewer_than_two_policies_rejected(self):
        with pytest.raises(InvariantViolation):
            compare_policies(
                [scored_journey()], flat_tables(["a"]), {"only": fixed_policy("Standard")}
            )

    def test_no_journeys_rejected(self):
        with pytest.raises(InsufficientDataError):
            compare_policies(
                [], flat_tables(["a"]), {"a": fixed_policy("Standard"), "b": fixed_policy("L")}
            )


class TestAdaptationDirection:
    def test_context_awareness_beats_fixed_standard(self):
        result = run_adaptation_trial(0)
        assert result.road_auc > result.fixed_auc
        assert result.awp_f1 > result.fixed_f1
