"""Metric implementations against counting and confusion-matrix oracles."""

from fractions import Fraction

import numpy as np
import pytest

from kdiag.metrics import (
    EvalRecord,
    balanced_accuracy,
    macro_f1,
    pearson_corr,
    roc_auc,
    sequential_accuracy,
    sequential_auc,
    three_class_prediction,
    three_class_truth,
)


def pairwise_auc_oracle(labels, scores):
    """Direct pairwise counting: wins + half-ties over all pos/neg pairs."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (pos.size * neg.size)


def confusion_f1_oracle(labels, preds, n_classes):
    """Exact rational per-class F1 from the confusion matrix, then the float mean."""
    cm = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(labels, preds):
        cm[t, p] += 1
    f1s = []
    for k in range(n_classes):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        denom = 2 * tp + fp + fn
        f1s.append(float(Fraction(2 * tp, denom)) if denom else 0.0)
    return float(np.mean(f1s))


def confusion_bacc_oracle(labels, preds):
    """Exact rational per-class recalls from the confusion matrix, then the float mean."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    recalls = [
        float(Fraction(int(np.sum(preds[labels == k] == k)), int(np.sum(labels == k))))
        for k in np.unique(labels)
    ]
    return float(np.mean(recalls))


class TestBalancedAccuracy:
    def test_all_correct(self):
        assert balanced_accuracy([0, 1, 1, 0], [0, 1, 1, 0]) == 1.0

    def test_tpr_tnr_average(self):
        labels = [1] * 10 + [0] * 10
        preds = [1] * 8 + [0] * 2 + [0] * 6 + [1] * 4
        assert balanced_accuracy(labels, preds) == pytest.approx(0.7)

    def test_constant_predictor(self):
        assert balanced_accuracy([0, 0, 1, 1, 1], [1, 1, 1, 1, 1]) == pytest.approx(0.5)

    def test_duplication_invariance(self, rng):
        labels = rng.integers(0, 3, 30)
        preds = rng.integers(0, 3, 30)
        before = balanced_accuracy(labels, preds)
        dup_labels = np.concatenate([labels, labels[labels == 1]])
        dup_preds = np.concatenate([preds, preds[labels == 1]])
        assert balanced_accuracy(dup_labels, dup_preds) == pytest.approx(before, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            balanced_accuracy([], [])


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.7, 0.9]) == 1.0

    def test_known_pairwise_value(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == pytest.approx(0.75)

    def test_all_ties(self):
        assert roc_auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == pytest.approx(0.5)

    def test_matches_pairwise_oracle_exactly(self, rng):
        for _ in range(50):
            n = int(rng.integers(3, 21))
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 2)  # coarse grid forces ties
            assert roc_auc(labels, scores) == pairwise_auc_oracle(labels, scores)

    def test_complement_identity_for_tie_free_scores(self, rng):
        labels = rng.integers(0, 2, 15)
        labels[:2] = [0, 1]
        scores = rng.permutation(15).astype(float)
        assert roc_auc(labels, scores) + roc_auc(labels, -scores) == pytest.approx(1.0, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([1, 1, 1], [0.4, 0.2, 0.9])


class TestMacroF1:
    def test_all_correct_all_present(self):
        assert macro_f1([0, 1, 2, 0], [0, 1, 2, 0], 3) == 1.0

    def test_documented_example(self):
        assert macro_f1([0, 1, 2], [0, 2, 1], 3) == pytest.approx(1 / 3)

    def test_matches_confusion_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 25))
            labels = rng.integers(0, 3, n)
            preds = rng.integers(0, 3, n)
            assert macro_f1(labels, preds, 3) == confusion_f1_oracle(labels, preds, 3)

    def test_collapsed_predictor_against_oracle(self):
        labels = [0, 1, 2, 0, 1, 2]
        preds = [1, 1, 1, 1, 1, 1]
        assert macro_f1(labels, preds, 3) == confusion_f1_oracle(labels, preds, 3)

    def test_balanced_accuracy_against_oracle(self, rng):
        for _ in range(20):
            labels = rng.integers(0, 3, 20)
            preds = rng.integers(0, 3, 20)
            assert balanced_accuracy(labels, preds) == confusion_bacc_oracle(labels, preds)


class TestPearson:
    def test_self_correlation_is_exactly_one(self, rng):
        for _ in range(20):
            x = rng.standard_normal(int(rng.integers(2, 40)))
            assert pearson_corr(x, x) == 1.0

    def test_exact_anticorrelation(self):
        assert pearson_corr([1, 2, 3], [3, 2, 1]) == -1.0

    def test_direct_formula_value(self):
        assert pearson_corr([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819805060619659, abs=1e-12)

    def test_matches_direct_formula_oracle(self, rng):
        for _ in range(25):
            a = rng.standard_normal(12)
            b = rng.standard_normal(12)
            da, db = a - a.mean(), b - b.mean()
            expected = (da * db).sum() / np.sqrt((da**2).sum() * (db**2).sum())
            assert pearson_corr(a, b) == pytest.approx(expected, abs=1e-12)

    def test_constant_input_rejected(self):
        with pytest.raises(ValueError):
            pearson_corr([1.0, 1.0, 1.0], [1, 2, 3])


def record(g_d, g_s, probs_d, probs_s):
    return EvalRecord(0, g_d, g_s, [np.asarray(probs_d)], [np.asarray(probs_s)], [3])


class TestSequential:
    def test_both_stages_correct(self):
        r = record(1, 1, (0.2, 0.8), (0.3, 0.7))
        assert three_class_truth(r.g_d, r.g_s) == 2
        assert three_class_prediction(r.probs_d[0], r.probs_s[0]) == 2
        assert sequential_accuracy([r]) == 1.0

    def test_false_positive_is_incorrect(self):
        r = record(0, None, (0.4, 0.6), (0.9, 0.1))
        assert sequential_accuracy([r]) == 0.0

    def test_severity_failure_invalidates_trajectory(self):
        r = record(1, 0, (0.1, 0.9), (0.2, 0.8))
        assert sequential_accuracy([r]) == 0.0

    def test_correct_sequential_implies_correct_disease(self, rng):
        for _ in range(50):
            g_d = int(rng.integers(0, 2))
            g_s = int(rng.integers(0, 2)) if g_d else None
            pd = rng.random(2)
            pd /= pd.sum()
            ps = rng.random(2)
            ps /= ps.sum()
            truth = three_class_truth(g_d, g_s)
            pred = three_class_prediction(pd, ps)
            if truth == pred:
                assert int(np.argmax(pd)) == g_d

    def test_sequential_auc_in_range(self, rng):
        records = []
        for i in range(30):
            g_d = int(rng.integers(0, 2))
            g_s = int(rng.integers(0, 2)) if g_d else None
            pd = rng.random(2)
            pd /= pd.sum()
            ps = rng.random(2)
            ps /= ps.sum()
            records.append(record(g_d, g_s, pd, ps))
        auc = sequential_auc(records)
        assert 0.0 <= auc <= 1.0
