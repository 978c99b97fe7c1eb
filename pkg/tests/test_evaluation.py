"""Metric oracles: macro F1, one-vs-rest AUC, ranking diagnostics."""

import numpy as np
import pytest

from rankprompt.core import InputError, LabelVector, SimilarityMatrix
from rankprompt.evaluation import (
    auc_macro_ovr,
    class_mean_similarity,
    confusion_matrix,
    macro_f1,
    metrics_report,
    predict,
    rank_monotonicity,
)


def smat(rows):
    return SimilarityMatrix(np.asarray(rows, dtype=np.float64))


class TestMacroF1:
    def test_perfect(self):
        y = LabelVector([0, 1, 2, 0, 1, 2])
        assert macro_f1(y, y, 3) == 1.0

    def test_all_wrong(self):
        truth = LabelVector([0, 0, 1, 1])
        pred = LabelVector([1, 1, 0, 0])
        assert macro_f1(pred, truth, 2) == 0.0

    def test_hand_computed_mixed(self):
        # class 0: tp=2 fp=1 fn=0 -> f1 = 4/5
        # class 1: tp=1 fp=0 fn=1 -> f1 = 2/3
        truth = LabelVector([0, 0, 1, 1])
        pred = LabelVector([0, 0, 0, 1])
        expected = 0.5 * (0.8 + 2.0 / 3.0)
        assert macro_f1(pred, truth, 2) == pytest.approx(expected, abs=1e-12)

    def test_absent_class_scores_zero(self):
        # class 2 never appears in truth or prediction: 0/0 counts as 0
        truth = LabelVector([0, 1])
        pred = LabelVector([0, 1])
        assert macro_f1(pred, truth, 3) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_order_invariance(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 4, size=50)
        pred = rng.integers(0, 4, size=50)
        base = macro_f1(LabelVector(pred), LabelVector(y), 4)
        perm = rng.permutation(50)
        shuffled = macro_f1(LabelVector(pred[perm]), LabelVector(y[perm]), 4)
        assert shuffled == pytest.approx(base, abs=1e-12)


class TestAuc:
    def test_perfect_separation(self):
        scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.1, 0.9], [0.2, 0.8]])
        auc, per = auc_macro_ovr(scores, LabelVector([0, 0, 1, 1]), 2)
        assert auc == 1.0
        assert per == [1.0, 1.0]

    def test_all_tied_scores_half(self):
        scores = np.full((6, 2), 0.5)
        auc, _ = auc_macro_ovr(scores, LabelVector([0, 1, 0, 1, 0, 1]), 2)
        assert auc == pytest.approx(0.5, abs=1e-12)

    def test_hand_computed(self):
        # class-0 scores: pos {0.9, 0.4}, neg {0.6, 0.3}
        # pairs won 3, lost 1 -> auc_0 = 0.75; symmetric column -> auc_1 = 0.75
        scores = np.array([[0.9, 0.1], [0.4, 0.6], [0.6, 0.4], [0.3, 0.7]])
        auc, per = auc_macro_ovr(scores, LabelVector([0, 0, 1, 1]), 2)
        assert per[0] == pytest.approx(0.75, abs=1e-12)
        assert per[1] == pytest.approx(0.75, abs=1e-12)
        assert auc == pytest.approx(0.75, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        raw = rng.normal(size=(30, 3))
        y = LabelVector(rng.integers(0, 3, size=30))
        a, _ = auc_macro_ovr(raw, y, 3)
        b, _ = auc_macro_ovr(np.tanh(raw) * 5.0 + 2.0, y, 3)
        assert a == pytest.approx(b, abs=1e-12)

    def test_absent_class_skipped(self):
        scores = np.array([[0.9, 0.1, 0.0], [0.1, 0.9, 0.0], [0.8, 0.2, 0.0], [0.2, 0.8, 0.0]])
        auc, per = auc_macro_ovr(scores, LabelVector([0, 1, 0, 1]), 3)
        assert np.isnan(per[2])
        assert auc == pytest.approx(1.0, abs=1e-12)

    def test_single_class_rejected(self):
        scores = np.array([[0.9, 0.1], [0.8, 0.2]])
        with pytest.raises(InputError):
            auc_macro_ovr(scores, LabelVector([0, 0]), 2)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            auc_macro_ovr(np.zeros((2, 2)), LabelVector([0, 1, 0]), 2)


class TestRankMonotonicity:
    def test_perfect_rows(self):
        s = smat([[3.0, 2.0, 1.0], [1.0, 3.0, 2.0], [0.0, 1.0, 2.0]])
        assert rank_monotonicity(s, LabelVector([0, 1, 2])) == 1.0

    def test_flat_rows_fail(self):
        s = smat([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
        assert rank_monotonicity(s, LabelVector([0, 2])) == 0.0

    def test_half_and_half(self):
        # row 0 descends from class 0; row 1 peaks at 1 but carries a tie
        s = smat([[3.0, 2.0, 1.0], [1.0, 3.0, 1.0]])
        assert rank_monotonicity(s, LabelVector([0, 1])) == 0.5

    def test_tie_on_far_side_still_counts_as_violation(self):
        # strictly rising toward class 2 but first two entries tie
        s = smat([[1.0, 1.0, 2.0]])
        assert rank_monotonicity(s, LabelVector([2])) == 0.0

    def test_shift_scale_invariance(self):
        rng = np.random.default_rng(2)
        raw = rng.normal(size=(20, 4))
        y = LabelVector(rng.integers(0, 4, size=20))
        base = rank_monotonicity(smat(raw), y)
        assert rank_monotonicity(smat(raw * 3.0 - 7.0), y) == base

    def test_interior_peak(self):
        s = smat([[0.1, 0.5, 0.9, 0.4, 0.2]])
        assert rank_monotonicity(s, LabelVector([2])) == 1.0
        assert rank_monotonicity(s, LabelVector([1])) == 0.0


class TestClassMeanSimilarity:
    def test_hand_means(self):
        s = smat([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        m = class_mean_similarity(s, LabelVector([0, 0, 1]), 2)
        np.testing.assert_allclose(m, [[2.0, 3.0], [5.0, 6.0]])

    def test_absent_class_nan_row(self):
        s = smat([[1.0, 2.0]])
        m = class_mean_similarity(s, LabelVector([0]), 3)
        assert np.all(np.isnan(m[1])) and np.all(np.isnan(m[2]))
        np.testing.assert_allclose(m[0], [1.0, 2.0])


class TestConfusionAndPredict:
    def test_predict_argmax_first_wins(self):
        s = smat([[0.5, 0.5, 0.1], [0.0, 0.2, 0.9]])
        np.testing.assert_array_equal(predict(s).labels, [0, 2])

    def test_confusion_counts(self):
        truth = LabelVector([0, 0, 1, 2])
        pred = LabelVector([0, 1, 1, 0])
        cm = confusion_matrix(pred, truth, 3)
        np.testing.assert_array_equal(cm, [[1, 1, 0], [0, 1, 0], [1, 0, 0]])
        assert cm.sum() == 4

    def test_confusion_rows_sum_to_class_counts(self):
        rng = np.random.default_rng(3)
        y = rng.integers(0, 5, size=200)
        pred = rng.integers(0, 5, size=200)
        cm = confusion_matrix(LabelVector(pred), LabelVector(y), 5)
        np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(y, minlength=5))


class TestMetricsReport:
    def test_report_fields_and_serialization(self):
        rng = np.random.default_rng(4)
        s = smat(rng.normal(size=(40, 5)))
        y = LabelVector(rng.integers(0, 5, size=40))
        rep = metrics_report(s, y, 5)
        assert rep.n_eval == 40
        assert 0.0 <= rep.macro_f1 <= 1.0
        assert 0.0 <= rep.rank_monotonicity <= 1.0
        d = rep.to_dict()
        assert set(d) == {
            "macro_f1",
            "macro_auc",
            "per_class_auc",
            "rank_monotonicity",
            "confusion",
            "n_eval",
        }
        assert d["confusion"] == rep.confusion.tolist()

    def test_report_nan_auc_serializes_none(self):
        s = smat([[0.9, 0.1, 0.0], [0.1, 0.9, 0.0], [0.5, 0.2, 0.0], [0.2, 0.5, 0.0]])
        rep = metrics_report(s, LabelVector([0, 1, 0, 1]), 3)
        d = rep.to_dict()
        assert d["per_class_auc"][2] is None

    def test_auc_uses_softmax_not_raw(self):
        # softmax is rowwise monotone so per-class AUC matches raw columns
        rng = np.random.default_rng(5)
        raw = rng.normal(size=(30, 3))
        y = LabelVector(rng.integers(0, 3, size=30))
        rep = metrics_report(smat(raw), y, 3)
        assert np.isfinite(rep.macro_auc)
