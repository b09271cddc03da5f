import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import confusion_accuracy, pairwise_auc
from specae.errors import ContractError
from specae.metrics import accuracy_at_k, n_flagged, precision_recall_f1, roc_auc


def five_percent(n=100):
    truth = np.zeros(n, dtype=int)
    truth[: n // 20] = 1
    return truth


class TestAUC:
    def test_perfect(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[1] == 1.0

    def test_all_equal(self):
        assert roc_auc(np.ones(6), [1, 0, 1, 0, 0, 0])[1] == 0.5

    def test_hand_example(self):
        scores, truth = [0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0]
        assert roc_auc(scores, truth)[1] == 0.75
        assert pairwise_auc(scores, truth) == 0.75

    def test_degenerate(self):
        with pytest.raises(ContractError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_points(self):
        points, _ = roc_auc([0.9, 0.8, 0.8, 0.1], [1, 0, 1, 0])
        assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
        fpr, tpr = zip(*points)
        assert all(np.diff(fpr) >= 0) and all(np.diff(tpr) >= 0)
        assert len(points) == 4

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 60))
    def test_matches_pair_counting(self, seed, n):
        rng = np.random.default_rng(seed)
        scores = rng.integers(0, 8, size=n).astype(float)  # plenty of ties
        truth = rng.integers(0, 2, size=n)
        truth[0], truth[1] = 0, 1
        assert roc_auc(scores, truth)[1] == pytest.approx(pairwise_auc(scores, truth), abs=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31))
    def test_monotone_invariance_and_complement(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.standard_normal(40)
        truth = np.r_[0, 1, rng.integers(0, 2, size=38)]
        auc = roc_auc(scores, truth)[1]
        assert roc_auc(np.exp(scores), truth)[1] == auc
        assert roc_auc(5 * scores - 2, truth)[1] == auc
        assert auc + roc_auc(-scores, truth)[1] == pytest.approx(1.0, abs=1e-12)


class TestAccuracyAtK:
    def test_perfect_ranking(self):
        truth = five_percent()
        assert abs(accuracy_at_k(np.arange(100), truth, 5) - 1.0) <= 1 / 100

    def test_reversed_ranking(self):
        truth = five_percent()
        ranking = np.arange(100)[::-1]
        acc = accuracy_at_k(ranking, truth, 5)
        assert abs(acc - 0.90) <= 1 / 100
        assert acc == confusion_accuracy(ranking, truth, n_flagged(100, 5))

    def test_k20_ceiling(self, rng):
        truth = five_percent()
        for _ in range(50):
            assert accuracy_at_k(rng.permutation(100), truth, 20) <= 0.85 + 1 / 100

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(10, 300),
           ratio=st.floats(0.01, 0.3), k=st.sampled_from([5, 10, 15, 20]))
    def test_ceiling_and_oracle(self, seed, n, ratio, k):
        rng = np.random.default_rng(seed)
        truth = (rng.random(n) < ratio).astype(int)
        truth_ratio = truth.mean()
        ranking = rng.permutation(n)
        ranking_best = np.argsort(-truth, kind="stable")
        for r in (ranking, ranking_best):
            acc = accuracy_at_k(r, truth, k)
            assert acc == pytest.approx(confusion_accuracy(r, truth, n_flagged(n, k)), abs=1e-15)
            assert acc <= 1 - max(0.0, k / 100 - truth_ratio) + 1 / n + 1e-12

    def test_flag_count(self):
        assert [n_flagged(150, k) for k in (5, 10, 15, 20)] == [8, 15, 23, 30]

    def test_empty(self):
        with pytest.raises(ContractError):
            accuracy_at_k([], [], 5)

    def test_bad_k(self):
        with pytest.raises(ContractError):
            accuracy_at_k([0, 1], [0, 1], 0)


class TestPrecisionRecall:
    def test_matched_budget_equalises(self, rng):
        truth = (rng.random(80) < 0.1).astype(int)
        out = precision_recall_f1(rng.permutation(80), truth)
        assert out["precision"] == out["recall"] == out["f1"]

    def test_values(self):
        out = precision_recall_f1([0, 1, 2, 3], [1, 0, 1, 0], n_flag=1)
        assert out == {"accuracy": 0.75, "precision": 1.0, "recall": 0.5, "f1": 2 / 3}
