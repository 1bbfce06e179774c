import numpy as np
import pytest
from sklearn.metrics import adjusted_mutual_info_score, adjusted_rand_score

from aspectdeid.errors import InvalidInputError
from aspectdeid.evaluation import (
    adjusted_mutual_information,
    adjusted_rand_index,
    metrics_report,
    partition_agreement_scores,
    top_n_accuracy,
)


class TestMetricsReport:
    def test_weighted_recall_equals_accuracy(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 60))
            y_true = rng.integers(0, 4, size=n).tolist()
            y_pred = rng.integers(0, 4, size=n).tolist()
            rep = metrics_report(y_true, y_pred)
            assert abs(rep.weighted_recall - rep.accuracy) < 1e-9

    def test_f1_harmonic_per_class(self, rng):
        y_true = rng.integers(0, 3, size=50).tolist()
        y_pred = rng.integers(0, 3, size=50).tolist()
        rep = metrics_report(y_true, y_pred)
        for stats in rep.per_class.values():
            p, r = stats["precision"], stats["recall"]
            if p + r > 0:
                assert abs(stats["f1"] - 2 * p * r / (p + r)) < 1e-9

    def test_all_bounded(self, rng):
        rep = metrics_report(rng.integers(0, 4, 30).tolist(), rng.integers(0, 4, 30).tolist())
        for v in (
            rep.accuracy,
            rep.macro_precision,
            rep.macro_recall,
            rep.macro_f1,
            rep.weighted_precision,
            rep.weighted_recall,
            rep.weighted_f1,
        ):
            assert 0.0 <= v <= 1.0

    def test_perfect(self):
        rep = metrics_report([0, 1, 2, 3], [0, 1, 2, 3])
        assert rep.accuracy == rep.macro_f1 == rep.weighted_f1 == 1.0

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            metrics_report([], [])


class TestAri:
    def test_identical_partitions(self):
        labels = [0, 0, 1, 1, 2, 2]
        assert adjusted_rand_index(labels, labels) == 1.0

    def test_relabeling_invariance(self, rng):
        a = rng.integers(0, 4, 100).tolist()
        b = rng.integers(0, 4, 100).tolist()
        remap = {0: 7, 1: 3, 2: 9, 3: 0}
        assert abs(
            adjusted_rand_index(a, b) - adjusted_rand_index(a, [remap[x] for x in b])
        ) < 1e-12

    def test_symmetry(self, rng):
        a = rng.integers(0, 3, 80).tolist()
        b = rng.integers(0, 5, 80).tolist()
        assert abs(adjusted_rand_index(a, b) - adjusted_rand_index(b, a)) < 1e-12

    def test_independent_random_near_zero(self):
        rng = np.random.default_rng(77)
        a = rng.integers(0, 5, 1000).tolist()
        b = rng.integers(0, 5, 1000).tolist()
        assert abs(adjusted_rand_index(a, b)) < 0.05

    def test_both_constant(self):
        assert adjusted_rand_index([1] * 10, [2] * 10) == 1.0

    def test_matches_sklearn(self, rng):
        for _ in range(25):
            n = int(rng.integers(5, 150))
            a = rng.integers(0, int(rng.integers(2, 7)), n).tolist()
            b = rng.integers(0, int(rng.integers(2, 7)), n).tolist()
            assert abs(adjusted_rand_index(a, b) - adjusted_rand_score(a, b)) < 1e-10

    def test_single_element_rejected(self):
        with pytest.raises(InvalidInputError):
            adjusted_rand_index([1], [1])


class TestAmi:
    def test_identical_partitions(self):
        labels = [0, 1, 1, 2, 0, 2]
        assert abs(adjusted_mutual_information(labels, labels) - 1.0) < 1e-9

    def test_both_constant(self):
        assert adjusted_mutual_information([1] * 8, [0] * 8) == 1.0

    def test_symmetry(self, rng):
        a = rng.integers(0, 4, 60).tolist()
        b = rng.integers(0, 3, 60).tolist()
        assert abs(
            adjusted_mutual_information(a, b) - adjusted_mutual_information(b, a)
        ) < 1e-9

    def test_matches_sklearn_max_normalization(self, rng):
        for _ in range(25):
            n = int(rng.integers(5, 120))
            a = rng.integers(0, int(rng.integers(2, 6)), n).tolist()
            b = rng.integers(0, int(rng.integers(2, 6)), n).tolist()
            mine = adjusted_mutual_information(a, b)
            theirs = adjusted_mutual_info_score(a, b, average_method="max")
            assert abs(mine - theirs) < 1e-8

    def test_partition_agreement_bundle(self):
        labels = [0, 0, 1, 1]
        scores = partition_agreement_scores(labels, labels)
        assert scores == {"ari": 1.0, "ami": 1.0}


class TestTopN:
    def test_monotone_in_n(self, rng):
        probs = rng.random((50, 120))
        true_idx = rng.integers(0, 120, 50)
        out = top_n_accuracy(probs, true_idx, (1, 5, 10, 100))
        assert out[1] <= out[5] <= out[10] <= out[100]

    def test_perfect_when_top(self):
        probs = np.eye(4)
        out = top_n_accuracy(probs, np.arange(4), (1,))
        assert out[1] == 1.0

    def test_n_larger_than_classes(self, rng):
        probs = rng.random((10, 5))
        out = top_n_accuracy(probs, rng.integers(0, 5, 10), (100,))
        assert out[100] == 1.0
