"""Window features, random-kernel transform, classifier, fusion, decisions."""

from dataclasses import replace

import numpy as np
import pytest

from driveload import (
    ChannelSchema,
    InsufficientDataError,
    InvariantViolation,
    SimConfig,
    Window,
    apply_scale,
    build_kernel_bank,
    decide_awp,
    fit_bank_biases,
    fit_robust_scale,
    preprocess,
    run_profiling,
    sample_grid,
    score_windows,
    sequence_filter,
    simulate_population,
    train_classifier,
    transform,
    transform_many,
)

from conftest import make_journey
from oracles import ppv_oracle

TEST_SCHEMA = [
    ChannelSchema("speed", "mph", 0.0, 200.0),
    ChannelSchema("steer", "deg", -780.0, 780.0),
]


def grid_journey(duration_s=60.0, rate_hz=20.0, channels=("a",), value_fn=None):
    """Journey sampled exactly on the 20 Hz grid for clean interpolation."""
    n = int(duration_s * rate_hz) + 1
    times = np.arange(n) / rate_hz
    rows = []
    for ci, cid in enumerate(channels):
        for k, t in enumerate(times):
            v = value_fn(cid, float(t)) if value_fn else float(np.sin(k * 0.1) + ci)
            rows.append((cid, float(t), v))
    rows.sort(key=lambda r: r[1])
    return make_journey(sample_rows=rows, channel_ids=list(channels))


def random_windows(rng, n, q=3, length=32, channel_ids=None):
    channel_ids = channel_ids or tuple(f"c{i}" for i in range(q))
    return [
        Window(rng.normal(size=(q, length)), float(k), "j0", tuple(channel_ids))
        for k in range(n)
    ]


class TestSampleGrid:
    def test_interpolation_identity_at_sample_times(self):
        j = grid_journey(duration_s=10.0)
        times, matrix, channel_ids = sample_grid(j)
        samples = j.samples_for("a")
        assert channel_ids == ("a",)
        assert times.size == matrix.shape[1] == len(samples)
        for k, s in enumerate(samples):
            assert times[k] == s.t
            assert matrix[0, k] == s.value

    def test_linear_midpoint_between_samples(self):
        j = make_journey(sample_rows=[("a", 0.0, 0.0), ("a", 0.1, 1.0)])
        times, matrix, _ = sample_grid(j)
        assert times.size == 3
        assert matrix[0, 1] == pytest.approx(0.5)

    def test_edge_hold_outside_channel_extent(self):
        rows = [("a", float(t), float(t)) for t in range(11)]
        rows += [("b", 0.0, 7.0), ("b", 5.0, 9.0)]
        rows.sort(key=lambda r: r[1])
        j = make_journey(sample_rows=rows, channel_ids=["a", "b"])
        times, matrix, channel_ids = sample_grid(j)
        b = matrix[list(channel_ids).index("b")]
        assert b[times > 5.0].max() == b[times > 5.0].min() == 9.0

    def test_forty_minute_journey_grid_length(self):
        j = make_journey(
            sample_rows=[("a", float(t), 0.5) for t in range(0, 2401, 40)]
        )
        times, matrix, _ = sample_grid(j)
        assert times.size == 2400 * 20 + 1

    def test_empty_channel_rejected(self):
        j = make_journey(sample_rows=[("a", 0.0, 0.0), ("a", 1.0, 1.0)], channel_ids=["a", "b"])
        with pytest.raises(InsufficientDataError):
            sample_grid(j)


class TestPreprocess:
    def test_forty_minutes_at_default_length_gives_120_windows(self):
        j = make_journey(
            sample_rows=[("a", float(t), float(t % 7)) for t in range(0, 2401)]
        )
        windows = preprocess(j, 400)
        assert len(windows) == 120
        assert all(w.data.shape == (1, 400) for w in windows)
        # non-overlapping, contiguous starts every 20 s
        assert [w.t_start for w in windows] == [20.0 * k for k in range(120)]

    def test_journey_shorter_than_window_yields_nothing(self):
        j = grid_journey(duration_s=5.0)
        assert preprocess(j, 400) == []

    def test_ragged_tail_dropped(self):
        j = grid_journey(duration_s=50.0)  # 1001 grid points
        windows = preprocess(j, 400)
        assert len(windows) == 2

    def test_constant_channel_scales_to_zeros_with_flag(self):
        j = grid_journey(
            duration_s=30.0,
            channels=("flat", "vary"),
            value_fn=lambda c, t: 5.0 if c == "flat" else float(np.sin(t)),
        )
        windows = preprocess(j, 100)
        params = fit_robust_scale(windows)
        i_flat = windows[0].channel_ids.index("flat")
        assert bool(params.constant[i_flat])
        scaled = apply_scale(windows[0], params)
        np.testing.assert_array_equal(scaled.data[i_flat], 0.0)

    def test_scaling_centers_the_median(self):
        j = grid_journey(duration_s=30.0, channels=("a",))
        windows = preprocess(j, 100)
        params = fit_robust_scale(windows)
        pooled = np.concatenate([apply_scale(w, params).data for w in windows], axis=1)
        assert np.median(pooled[0]) == pytest.approx(0.0, abs=1e-12)

    def test_channel_layout_mismatch_rejected(self):
        j1 = grid_journey(duration_s=20.0, channels=("a",))
        j2 = grid_journey(duration_s=20.0, channels=("b",))
        w1 = preprocess(j1, 100)
        w2 = preprocess(j2, 100)
        with pytest.raises(InvariantViolation):
            fit_robust_scale(w1 + w2)


class TestKernelBank:
    def test_same_seed_reproduces_the_bank(self):
        a = build_kernel_bank(3, q=5, n_features=300, window_length=100)
        b = build_kernel_bank(3, q=5, n_features=300, window_length=100)
        assert np.array_equal(a.kernel_ids, b.kernel_ids)
        assert np.array_equal(a.dilations, b.dilations)
        assert np.array_equal(a.quantile_levels, b.quantile_levels)
        assert all(np.array_equal(x, y) for x, y in zip(a.channel_sets, b.channel_sets))

    def test_different_seeds_differ(self):
        a = build_kernel_bank(0, q=5, n_features=300, window_length=100)
        b = build_kernel_bank(1, q=5, n_features=300, window_length=100)
        assert not np.array_equal(a.kernel_ids, b.kernel_ids)

    def test_kernel_set_is_the_84_zero_sum_patterns(self):
        bank = build_kernel_bank(0, q=1, n_features=10, window_length=100)
        assert bank.kernels.shape == (84, 9)
        assert np.all(bank.kernels.sum(axis=1) == 0.0)
        for row in bank.kernels:
            assert sorted(row) == [-1.0] * 6 + [2.0] * 3
        # all placements are distinct
        assert len({tuple(r) for r in bank.kernels}) == 84

    @pytest.mark.parametrize(
        "length,expected",
        [(400, [1, 2, 4, 8, 16, 32]), (32, [1, 2]), (9, [1]), (100, [1, 2, 4, 8])],
    )
    def test_dilations_fit_the_window(self, length, expected):
        bank = build_kernel_bank(0, q=2, n_features=500, window_length=length)
        assert sorted(set(bank.dilations.tolist())) == expected

    def test_channel_subsets_bounded_by_four(self):
        bank = build_kernel_bank(0, q=9, n_features=800, window_length=64)
        sizes = {len(cs) for cs in bank.channel_sets}
        assert sizes == {1, 2, 3, 4}
        for cs in bank.channel_sets:
            assert len(set(cs.tolist())) == len(cs)
            assert cs.max() < 9

    def test_transform_requires_fitted_biases(self):
        bank = build_kernel_bank(0, q=1, n_features=10, window_length=32)
        w = random_windows(np.random.default_rng(0), 1, q=1)[0]
        with pytest.raises(InvariantViolation):
            transform(w, bank)

    def test_bias_fitting_is_deterministic(self):
        rng = np.random.default_rng(5)
        windows = random_windows(rng, 6)
        bank = build_kernel_bank(2, q=3, n_features=200, window_length=32)
        b1 = fit_bank_biases(bank, windows)
        b2 = fit_bank_biases(bank, windows)
        assert np.array_equal(b1.biases, b2.biases)


class TestTransform:
    def test_all_zero_window_ppv_extremes(self):
        bank = build_kernel_bank(1, q=2, n_features=64, window_length=32)
        zero = Window(np.zeros((2, 32)), 0.0, "j0", ("c0", "c1"))
        pos = replace(bank, biases=np.full(bank.n_features, 0.5))
        neg = replace(bank, biases=np.full(bank.n_features, -0.5))
        np.testing.assert_array_equal(transform(zero, pos), 0.0)
        np.testing.assert_array_equal(transform(zero, neg), 1.0)

    def test_features_live_in_unit_interval(self):
        rng = np.random.default_rng(7)
        windows = random_windows(rng, 8)
        bank = fit_bank_biases(
            build_kernel_bank(4, q=3, n_features=400, window_length=32), windows[:4]
        )
        feats = transform_many(windows, bank)
        assert feats.shape == (8, 400)
        assert feats.min() >= 0.0
        assert feats.max() <= 1.0

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(11)
        windows = random_windows(rng, 100)
        bank = fit_bank_biases(
            build_kernel_bank(9, q=3, n_features=200, window_length=32), windows[:10]
        )
        feats = transform_many(windows, bank)
        for wi in (0, 13, 57, 99):
            w = windows[wi]
            for f in range(0, 200, 17):
                want = ppv_oracle(
                    w.data,
                    bank.kernels[bank.kernel_ids[f]],
                    bank.channel_sets[f],
                    int(bank.dilations[f]),
                    float(bank.biases[f]),
                )
                assert abs(feats[wi, f] - want) <= 1e-9

    def test_level_shift_leaves_features_unchanged_on_dyadic_input(self):
        rng = np.random.default_rng(13)
        scale = 2.0**-10
        data = rng.integers(-512, 513, size=(3, 32)).astype(float) * scale
        base = Window(data, 0.0, "j0", ("c0", "c1", "c2"))
        shifted = replace(base, data=data + 1.0)
        bank = build_kernel_bank(6, q=3, n_features=300, window_length=32)
        bank = replace(
            bank, biases=rng.integers(-64, 65, size=bank.n_features).astype(float) * scale
        )
        np.testing.assert_array_equal(transform(base, bank), transform(shifted, bank))

    def test_window_shape_mismatch_rejected(self):
        bank = build_kernel_bank(0, q=3, n_features=16, window_length=32)
        bank = replace(bank, biases=np.zeros(16))
        bad = Window(np.zeros((3, 64)), 0.0, "j0", ("a", "b", "c"))
        with pytest.raises(InvariantViolation):
            transform(bad, bank)


class TestClassifier:
    def test_separable_clusters_reach_full_training_accuracy(self):
        rng = np.random.default_rng(0)
        lo = rng.normal(-4.0, 0.3, size=(30, 6))
        hi = rng.normal(4.0, 0.3, size=(30, 6))
        X = np.vstack([lo, hi])
        y = ["L"] * 30 + ["H"] * 30
        scorer = train_classifier(X, y)
        pred = [decide_awp(s) for s in score_windows(scorer, X)]
        assert pred == y

    def test_absent_class_scores_zero(self):
        rng = np.random.default_rng(1)
        X = np.vstack(
            [rng.normal(-3, 0.5, size=(20, 4)), rng.normal(3, 0.5, size=(20, 4))]
        )
        scorer = train_classifier(X, ["L"] * 20 + ["M"] * 20)
        scores = score_windows(scorer, X)
        np.testing.assert_array_equal(scores[:, 2], 0.0)  # H slot
        np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)

    def test_single_class_rejected(self):
        with pytest.raises(InsufficientDataError):
            train_classifier(np.zeros((10, 3)), ["M"] * 10)

    def test_unknown_label_rejected(self):
        with pytest.raises(InvariantViolation):
            train_classifier(np.zeros((4, 3)), ["L", "M", "X", "L"])

    def test_label_permutation_collapses_to_chance(self):
        rng = np.random.default_rng(3)
        n_per = 60
        X = np.vstack(
            [
                rng.normal(mu, 1.0, size=(n_per, 12))
                for mu in (-2.0, 0.0, 2.0)
            ]
        )
        y = np.array(["L"] * n_per + ["M"] * n_per + ["H"] * n_per)
        perm = rng.permutation(y.size)
        y_shuffled = y[perm]  # breaks the feature-label link
        train = np.concatenate([np.arange(k * n_per, k * n_per + 48) for k in range(3)])
        test = np.setdiff1d(np.arange(y.size), train)
        scorer = train_classifier(X[train], y_shuffled[train].tolist())
        pred = [decide_awp(s) for s in score_windows(scorer, X[test])]
        accuracy = np.mean([p == t for p, t in zip(pred, y_shuffled[test])])
        assert accuracy <= 0.45


class TestSequenceFilter:
    def test_arithmetic_mean_example(self):
        fused = sequence_filter([(0.2, 0.5, 0.3), (0.4, 0.3, 0.3)])
        np.testing.assert_allclose(fused, [0.3, 0.4, 0.3])

    def test_single_score_is_identity(self):
        np.testing.assert_allclose(sequence_filter([(0.1, 0.2, 0.7)]), [0.1, 0.2, 0.7])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        scores = rng.dirichlet([1, 1, 1], size=12)
        fused = sequence_filter(scores)
        np.testing.assert_allclose(fused, sequence_filter(scores[::-1]), atol=1e-15)

    def test_output_is_a_simplex_point(self):
        rng = np.random.default_rng(4)
        raw = rng.uniform(0.0, 5.0, size=(9, 3))
        fused = sequence_filter(raw)
        assert fused.sum() == pytest.approx(1.0, abs=1e-9)
        assert (fused >= 0).all()

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            sequence_filter(np.empty((0, 3)))

    def test_negative_scores_rejected(self):
        with pytest.raises(InvariantViolation):
            sequence_filter([(0.5, -0.1, 0.6)])

    def test_all_zero_rejected(self):
        with pytest.raises(InvariantViolation):
            sequence_filter([(0.0, 0.0, 0.0)])


class TestDecideAwp:
    def test_map_examples(self):
        assert decide_awp((0.1, 0.2, 0.7)) == "H"
        assert decide_awp((0.5, 0.5, 0.0)) == "M"
        assert decide_awp((0.6, 0.2, 0.2)) == "L"
        # three-way tie resolves to the highest workload
        assert decide_awp((1 / 3, 1 / 3, 1 / 3)) == "H"

    def test_positive_rescaling_is_irrelevant(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            s = rng.uniform(0.0, 1.0, size=3)
            assert decide_awp(s) == decide_awp(s * 7.25)

    def test_bad_shapes_rejected(self):
        with pytest.raises(InvariantViolation):
            decide_awp((0.5, 0.5))
        with pytest.raises(InvariantViolation):
            decide_awp((0.5, 0.4, float("nan")))


def small_population(seed=0, *, separation=3.0, style_offset=1.0, n_per_class=4):
    cfg = SimConfig(
        duration_s=120.0,
        channel_rates={"speed": 10.0, "steer": 10.0},
        seed=seed,
    )
    sims = simulate_population(
        n_per_class,
        cfg,
        separation=separation,
        style_offset=style_offset,
        schema=TEST_SCHEMA,
    )
    return [j for j, _ in sims]


class TestRunProfiling:
    def test_report_structure_and_determinism(self):
        journeys = small_population()
        a = run_profiling(journeys, length=200, seed=7, n_features=200)
        b = run_profiling(journeys, length=200, seed=7, n_features=200)
        assert a.fused_accuracy == b.fused_accuracy
        assert a.window_accuracy == b.window_accuracy
        assert [r.decision for r in a.rows] == [r.decision for r in b.rows]
        assert a.n_train_windows + a.n_test_windows == sum(
            r.n_test_windows for r in b.rows
        ) + a.n_train_windows
        for row in a.rows:
            assert row.window_scores.shape == (row.n_test_windows, 3)
            if row.n_test_windows:
                np.testing.assert_allclose(row.window_scores.sum(axis=1), 1.0, atol=1e-9)
                np.testing.assert_allclose(row.fused.sum(), 1.0, atol=1e-9)
        assert a.confusion.counts.sum() == sum(1 for r in a.rows if r.n_test_windows)

    def test_learnable_population_beats_chance_at_window_level(self):
        journeys = small_population()
        report = run_profiling(journeys, length=200, seed=7, n_features=200)
        assert report.window_accuracy > 0.5

    def test_journey_split_keeps_whole_journeys_apart(self):
        journeys = small_population(n_per_class=5)
        report = run_profiling(
            journeys, length=200, seed=3, n_features=200, split="journey"
        )
        scored = [r.journey_id for r in report.rows if r.n_test_windows > 0]
        # a journey contributes either train or test windows, never both
        assert report.n_unscored_journeys == len(journeys) - len(scored)
        assert 0 < len(scored) < len(journeys)

    def test_uninformative_emissions_collapse_to_chance(self):
        journeys = small_population(seed=1, separation=0.0, style_offset=0.0, n_per_class=6)
        report = run_profiling(journeys, length=200, seed=7, n_features=200)
        assert report.fused_accuracy <= 0.5
        assert report.window_accuracy <= 0.5

    def test_missing_awp_label_rejected(self):
        journeys = small_population(n_per_class=2)
        journeys[0].awp_label = None
        with pytest.raises(InsufficientDataError):
            run_profiling(journeys, length=200, n_features=100)

    def test_too_few_windows_rejected(self):
        # 120 s journeys hold 2401 grid points: no window of 3000 fits anywhere
        journeys = small_population(n_per_class=2)
        with pytest.raises(InsufficientDataError):
            run_profiling(journeys, length=3000, n_features=100)
