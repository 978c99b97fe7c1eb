"""Per-class statistics, kernel smoothing, calibration, epoch commits."""

import numpy as np
import pytest

from rankprompt.core import InputError, LabelVector, SimilarityMatrix, StateError
from rankprompt.sms import (
    VAR_FLOOR,
    CalibrationDisabled,
    KernelSpec,
    accumulate_class_stats,
    calibrate_rows,
    commit_epoch,
    init_class_stats,
    kernel_weights,
    smooth_stats,
    stats_from_dict,
    stats_to_dict,
)


def committed_from(rows, labels, k, kernel=None):
    """One accumulate + commit round, the normal route to usable stats."""
    stats = init_class_stats(k, kernel)
    stats = accumulate_class_stats(stats, SimilarityMatrix(np.asarray(rows, dtype=float)), LabelVector(labels))
    return commit_epoch(stats)


class TestKernelWeights:
    def test_flat_limit_excludes_self(self):
        """Huge sigma makes both neighbors equal; the self weight stays 0."""
        w = kernel_weights(KernelSpec(sigma=1e6), 1, 3)
        np.testing.assert_allclose(w, [0.5, 0.0, 0.5], atol=1e-9)

    def test_two_classes_single_neighbor(self):
        np.testing.assert_allclose(kernel_weights(KernelSpec(sigma=1.0), 0, 2), [0.0, 1.0])

    def test_unit_sigma_three_classes(self):
        w = kernel_weights(KernelSpec(sigma=1.0), 0, 3)
        np.testing.assert_allclose(w, [0.0, 0.8175744761936437, 0.18242552380635635], atol=1e-12)

    def test_raw_weights_symmetric(self):
        spec = KernelSpec(sigma=1.7, normalize=False, include_self=True)
        k = 6
        for a in range(k):
            wa = kernel_weights(spec, a, k)
            for b in range(k):
                wb = kernel_weights(spec, b, k)
                assert wa[b] == wb[a]

    def test_normalized_weights_sum_to_one(self):
        for sigma in (0.3, 1.0, 4.0):
            for j in range(5):
                w = kernel_weights(KernelSpec(sigma=sigma), j, 5)
                np.testing.assert_allclose(w.sum(), 1.0, atol=1e-9)

    def test_rejects_single_class(self):
        with pytest.raises(InputError):
            kernel_weights(KernelSpec(), 0, 1)

    def test_rejects_bad_sigma(self):
        with pytest.raises(InputError):
            KernelSpec(sigma=0.0)


class TestAccumulate:
    def test_hand_mean_and_variance(self):
        stats = init_class_stats(2)
        s = SimilarityMatrix(np.array([[1.0, 3.0], [3.0, 5.0]]))
        stats = accumulate_class_stats(stats, s, LabelVector([1, 1]))
        np.testing.assert_allclose(stats.mean[1], [2.0, 4.0])
        np.testing.assert_allclose(stats.var[1], [1.0, 1.0])

    def test_single_row_floors_variance(self):
        stats = init_class_stats(2)
        stats = accumulate_class_stats(stats, SimilarityMatrix(np.array([[7.0, 7.0]])), LabelVector([0]))
        np.testing.assert_allclose(stats.mean[0], [7.0, 7.0])
        np.testing.assert_allclose(stats.var[0], [VAR_FLOOR, VAR_FLOOR])

    def test_empty_class_is_undefined(self):
        stats = init_class_stats(3, dim=3)
        stats = accumulate_class_stats(stats, SimilarityMatrix(np.ones((2, 3))), LabelVector([0, 0]))
        assert stats.count[1] == 0
        assert np.isnan(stats.mean[1]).all()

    def test_accumulation_spans_batches(self):
        stats = init_class_stats(2)
        a = SimilarityMatrix(np.array([[1.0, 3.0]]))
        b = SimilarityMatrix(np.array([[3.0, 5.0]]))
        stats = accumulate_class_stats(stats, a, LabelVector([1]))
        stats = accumulate_class_stats(stats, b, LabelVector([1]))
        np.testing.assert_allclose(stats.mean[1], [2.0, 4.0])

    def test_order_invariance(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(40, 5))
        labels = rng.integers(0, 5, 40)
        perm = rng.permutation(40)
        one = accumulate_class_stats(init_class_stats(5), SimilarityMatrix(rows), LabelVector(labels))
        two = accumulate_class_stats(init_class_stats(5), SimilarityMatrix(rows[perm]), LabelVector(labels[perm]))
        np.testing.assert_allclose(one.mean, two.mean, atol=1e-12)
        np.testing.assert_allclose(one.var, two.var, atol=1e-12)

    def test_rejects_shape_mismatch(self):
        stats = init_class_stats(3, dim=3)
        with pytest.raises(InputError):
            accumulate_class_stats(stats, SimilarityMatrix(np.ones((2, 4))), LabelVector([0, 1]))
        with pytest.raises(InputError):
            accumulate_class_stats(stats, SimilarityMatrix(np.ones((2, 3))), LabelVector([0]))


class TestSmoothStats:
    def test_symmetric_neighbors_average(self):
        """With flat weights the middle class lands on the neighbor mean.
        Smoothing is element-wise, so the scalar case rides in column 0."""
        stats = init_class_stats(3, KernelSpec(sigma=1e6), dim=2)
        rows = np.array([[0.0, 5.0], [1.0, 7.0], [2.0, 9.0]])
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows), LabelVector([0, 1, 2]))
        smoothed = smooth_stats(stats)
        np.testing.assert_allclose(smoothed.smoothed_mean[1], [1.0, 7.0], atol=1e-9)

    def test_unit_sigma_value(self):
        stats = init_class_stats(3, KernelSpec(sigma=1.0), dim=2)
        rows = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows), LabelVector([0, 1, 2]))
        smoothed = smooth_stats(stats)
        np.testing.assert_allclose(smoothed.smoothed_mean[0], [1.1824255238063563] * 2, atol=1e-12)

    def test_constant_field_fixed_point(self):
        stats = init_class_stats(3, dim=2)
        rows = np.full((3, 2), 4.25)
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows), LabelVector([0, 1, 2]))
        smoothed = smooth_stats(stats)
        for j in range(3):
            np.testing.assert_allclose(smoothed.smoothed_mean[j], [4.25, 4.25], atol=1e-12)

    def test_absent_class_renormalization(self):
        """A class never seen contributes nothing; weights renormalize."""
        stats = init_class_stats(3, KernelSpec(sigma=1e6), dim=2)
        rows = np.array([[0.0, 0.5], [2.0, 4.5]])
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows), LabelVector([0, 2]))
        smoothed = smooth_stats(stats)
        # class 0's only observed non-self neighbor is class 2
        np.testing.assert_allclose(smoothed.smoothed_mean[0], [2.0, 4.5], atol=1e-9)

    def test_too_few_classes_signals(self):
        stats = init_class_stats(3, dim=3)
        stats = accumulate_class_stats(stats, SimilarityMatrix(np.ones((4, 3)) * 2), LabelVector([1, 1, 1, 1]))
        with pytest.raises(CalibrationDisabled):
            smooth_stats(stats)


class TestCalibrateRows:
    def test_degenerate_smoothing_is_identity(self):
        """Tiny sigma with the self weight kept reproduces each class's own
        statistics, so standard calibration is the identity map."""
        rng = np.random.default_rng(4)
        rows = rng.normal(size=(30, 5))
        labels = rng.integers(0, 5, 30)
        stats = committed_from(rows, labels, 5, KernelSpec(sigma=1e-3, include_self=True))
        fresh = SimilarityMatrix(rng.normal(size=(8, 5)))
        fresh_labels = LabelVector(rng.integers(0, 5, 8))
        out = calibrate_rows(fresh, fresh_labels, stats)
        np.testing.assert_allclose(out.data, fresh.data, atol=1e-12)
        assert out.calibrated

    def test_centered_input_maps_to_smoothed_mean(self):
        rng = np.random.default_rng(5)
        rows = rng.normal(size=(40, 4))
        labels = rng.integers(0, 4, 40)
        stats = committed_from(rows, labels, 4)
        for variant in ("standard", "literal"):
            for c in range(4):
                s = SimilarityMatrix(stats.frozen_mean[c][None, :])
                out = calibrate_rows(s, LabelVector([c]), stats, variant)
                np.testing.assert_allclose(out.data[0], stats.smoothed_mean[c], atol=1e-12)

    def test_scalar_standard_case(self):
        """mean 1, var 1, smoothed mean 3, smoothed var 4 sends 2 to 5.
        Calibration is element-wise, so the scalar case rides in column 0."""
        stats = init_class_stats(2, KernelSpec(sigma=1.0), dim=2)
        # class 0 rows give mean 1 var 1 in column 0; class 1 mean 3 var 4
        rows0 = np.array([[0.0, 0.0], [2.0, 2.0]])
        rows1 = np.array([[1.0, 1.0], [5.0, 5.0]])
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows0), LabelVector([0, 0]))
        stats = accumulate_class_stats(stats, SimilarityMatrix(rows1), LabelVector([1, 1]))
        stats = commit_epoch(stats)
        # the only non-self neighbor of class 0 is class 1
        np.testing.assert_allclose(stats.smoothed_mean[0], [3.0, 3.0])
        np.testing.assert_allclose(stats.smoothed_var[0], [4.0, 4.0])
        out = calibrate_rows(SimilarityMatrix(np.array([[2.0, 2.0]])), LabelVector([0]), stats)
        np.testing.assert_allclose(out.data, [[5.0, 5.0]], atol=1e-12)

    def test_affine_property(self):
        """calibrate(a*s + (1-a)*mean_c) == a*calibrate(s) + (1-a)*smoothed_mean_c."""
        rng = np.random.default_rng(6)
        for case in range(50):
            k = int(rng.integers(2, 6))
            rows = rng.normal(rng.normal(0, 2), rng.uniform(0.5, 2), size=(30, k))
            labels = rng.integers(0, k, 30)
            stats = committed_from(rows, labels, k)
            c = int(rng.integers(0, k))
            s = rng.normal(size=(1, k))
            alpha = float(rng.uniform(-1.5, 1.5))
            lhs = calibrate_rows(
                SimilarityMatrix(alpha * s + (1 - alpha) * stats.frozen_mean[c]), LabelVector([c]), stats
            ).data[0]
            rhs = alpha * calibrate_rows(SimilarityMatrix(s), LabelVector([c]), stats).data[0] + (
                1 - alpha
            ) * stats.smoothed_mean[c]
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_cold_start_is_identity(self):
        stats = init_class_stats(3)
        s = SimilarityMatrix(np.array([[1.0, 2.0, 3.0]]))
        out = calibrate_rows(s, LabelVector([0]), stats)
        np.testing.assert_array_equal(out.data, s.data)
        assert out.calibrated

    def test_uncommitted_accumulation_rejected(self):
        stats = init_class_stats(2)
        stats = accumulate_class_stats(stats, SimilarityMatrix(np.ones((2, 2))), LabelVector([0, 1]))
        with pytest.raises(StateError):
            calibrate_rows(SimilarityMatrix(np.ones((1, 2))), LabelVector([0]), stats)

    def test_disabled_commit_passes_through(self):
        stats = init_class_stats(3, dim=3)
        stats = accumulate_class_stats(stats, SimilarityMatrix(np.ones((3, 3))), LabelVector([1, 1, 1]))
        stats = commit_epoch(stats)
        assert stats.committed and not stats.calibration_active
        s = SimilarityMatrix(np.array([[1.0, 2.0, 3.0]]))
        out = calibrate_rows(s, LabelVector([1]), stats)
        np.testing.assert_array_equal(out.data, s.data)

    def test_unseen_class_rows_pass_through(self):
        rng = np.random.default_rng(7)
        rows = rng.normal(size=(20, 4))
        labels = rng.integers(0, 3, 20)  # class 3 never observed
        stats = committed_from(rows, labels, 4)
        s = SimilarityMatrix(rng.normal(size=(2, 4)))
        out = calibrate_rows(s, LabelVector([3, 0]), stats)
        np.testing.assert_array_equal(out.data[0], s.data[0])
        assert not np.allclose(out.data[1], s.data[1])

    def test_repeated_calls_bit_identical(self):
        rng = np.random.default_rng(8)
        rows = rng.normal(size=(25, 5))
        labels = rng.integers(0, 5, 25)
        stats = committed_from(rows, labels, 5)
        s = SimilarityMatrix(rng.normal(size=(6, 5)))
        lab = LabelVector(rng.integers(0, 5, 6))
        first = calibrate_rows(s, lab, stats).data
        second = calibrate_rows(s, lab, stats).data
        assert np.array_equal(first, second)

    def test_unknown_variant_rejected(self):
        stats = committed_from(np.ones((4, 2)) + np.arange(4)[:, None], [0, 0, 1, 1], 2)
        with pytest.raises(InputError):
            calibrate_rows(SimilarityMatrix(np.ones((1, 2))), LabelVector([0]), stats, variant="robust")


class TestCommitEpoch:
    def test_cold_start_not_committed(self):
        stats = init_class_stats(5)
        assert not stats.committed

    def test_commit_on_empty_epoch_is_noop(self):
        stats = init_class_stats(5)
        assert commit_epoch(stats) is stats

    def test_commit_freezes_and_resets(self):
        rng = np.random.default_rng(9)
        rows = rng.normal(size=(12, 3))
        labels = rng.integers(0, 3, 12)
        stats = committed_from(rows, labels, 3)
        assert stats.committed
        assert stats.epoch_count.sum() == 0
        assert stats.frozen_count.sum() == 12

    def test_replay_gives_identical_commits(self):
        rng = np.random.default_rng(10)
        rows = rng.normal(size=(18, 4))
        labels = rng.integers(0, 4, 18)
        first = committed_from(rows, labels, 4)
        second = commit_epoch(
            accumulate_class_stats(first, SimilarityMatrix(rows), LabelVector(labels))
        )
        assert np.array_equal(first.frozen_mean, second.frozen_mean)
        assert np.array_equal(first.smoothed_mean, second.smoothed_mean)
        assert np.array_equal(first.smoothed_var, second.smoothed_var)

    def test_frozen_stats_survive_next_epoch_accumulation(self):
        rng = np.random.default_rng(11)
        rows = rng.normal(size=(10, 3))
        labels = rng.integers(0, 3, 10)
        stats = committed_from(rows, labels, 3)
        s = SimilarityMatrix(rng.normal(size=(4, 3)))
        lab = LabelVector(rng.integers(0, 3, 4))
        before = calibrate_rows(s, lab, stats).data
        mid_epoch = accumulate_class_stats(stats, SimilarityMatrix(rng.normal(size=(5, 3))), LabelVector([0] * 5))
        after = calibrate_rows(s, lab, mid_epoch).data
        assert np.array_equal(before, after)


class TestSerialization:
    def test_round_trip_preserves_calibration(self):
        import json

        rng = np.random.default_rng(12)
        rows = rng.normal(size=(30, 5))
        labels = rng.integers(0, 5, 30)
        stats = committed_from(rows, labels, 5)
        loaded = stats_from_dict(json.loads(json.dumps(stats_to_dict(stats))))
        s = SimilarityMatrix(rng.normal(size=(7, 5)))
        lab = LabelVector(rng.integers(0, 5, 7))
        assert np.array_equal(calibrate_rows(s, lab, stats).data, calibrate_rows(s, lab, loaded).data)

    def test_round_trip_pristine(self):
        stats = init_class_stats(4)
        loaded = stats_from_dict(stats_to_dict(stats))
        assert not loaded.committed
        assert loaded.k == 4 and loaded.dim == 4
