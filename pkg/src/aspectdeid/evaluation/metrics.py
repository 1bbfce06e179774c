"""Classification reports, partition agreement (ARI/AMI), and top-n scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ..errors import InvalidInputError


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    n: int
    per_class: dict = field(default_factory=dict)
    missing_train_classes: tuple = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "n": self.n,
            "per_class": self.per_class,
            "missing_train_classes": list(self.missing_train_classes),
        }


def metrics_report(
    y_true, y_pred, missing_train_classes: tuple = ()
) -> MetricsReport:
    """Accuracy plus macro and support-weighted P/R/F1.

    Macro and weighted averages run over the classes present in y_true, so
    weighted recall equals accuracy exactly.
    """
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred) or not y_true:
        raise InvalidInputError("label sequences must be equal-length and non-empty")
    n = len(y_true)
    classes = sorted(set(y_true), key=str)
    per_class = {}
    macro = np.zeros(3)
    weighted = np.zeros(3)
    correct = sum(1 for t, p in zip(y_true, y_pred) if t == p)
    for cls in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[str(cls)] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
        }
        macro += (precision, recall, f1)
        weighted += np.array((precision, recall, f1)) * (support / n)
    macro /= len(classes)
    return MetricsReport(
        accuracy=correct / n,
        macro_precision=float(macro[0]),
        macro_recall=float(macro[1]),
        macro_f1=float(macro[2]),
        weighted_precision=float(weighted[0]),
        weighted_recall=float(weighted[1]),
        weighted_f1=float(weighted[2]),
        n=n,
        per_class=per_class,
        missing_train_classes=missing_train_classes,
    )


def _contingency(labels_a, labels_b) -> np.ndarray:
    a_ids = {v: i for i, v in enumerate(sorted(set(labels_a), key=str))}
    b_ids = {v: i for i, v in enumerate(sorted(set(labels_b), key=str))}
    table = np.zeros((len(a_ids), len(b_ids)), dtype=np.int64)
    for a, b in zip(labels_a, labels_b):
        table[a_ids[a], b_ids[b]] += 1
    return table


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Pair-counting Rand index adjusted for chance under the permutation model."""
    labels_a, labels_b = list(labels_a), list(labels_b)
    if len(labels_a) != len(labels_b):
        raise InvalidInputError("partitions must have equal length")
    if len(labels_a) < 2:
        raise InvalidInputError("need at least 2 elements")
    table = _contingency(labels_a, labels_b)
    n = table.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb2(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # Degenerate contingency (e.g. both partitions trivial): identical
        # pair structure counts as perfect agreement.
        return 1.0
    return float((index - expected) / (max_index - expected))


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _expected_mutual_information(a_counts: np.ndarray, b_counts: np.ndarray, n: int) -> float:
    """Expectation of MI over random contingency tables with fixed margins."""
    emi = 0.0
    log_n = np.log(n)
    for ai in a_counts:
        for bj in b_counts:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for nij in range(lo, hi + 1):
                log_term = np.log(nij) + log_n - np.log(ai) - np.log(bj)
                log_prob = (
                    gammaln(ai + 1)
                    + gammaln(bj + 1)
                    + gammaln(n - ai + 1)
                    + gammaln(n - bj + 1)
                    - gammaln(n + 1)
                    - gammaln(nij + 1)
                    - gammaln(ai - nij + 1)
                    - gammaln(bj - nij + 1)
                    - gammaln(n - ai - bj + nij + 1)
                )
                emi += (nij / n) * log_term * np.exp(log_prob)
    return float(emi)


def adjusted_mutual_information(labels_a, labels_b) -> float:
    """Mutual information adjusted for chance, normalized by max(H_a, H_b)."""
    labels_a, labels_b = list(labels_a), list(labels_b)
    if len(labels_a) != len(labels_b):
        raise InvalidInputError("partitions must have equal length")
    if len(labels_a) < 2:
        raise InvalidInputError("need at least 2 elements")
    table = _contingency(labels_a, labels_b)
    n = int(table.sum())
    a_counts = table.sum(axis=1)
    b_counts = table.sum(axis=0)
    h_a = _entropy(a_counts, n)
    h_b = _entropy(b_counts, n)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0  # both partitions trivial
    mi = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            nij = table[i, j]
            if nij > 0:
                mi += (nij / n) * np.log(n * nij / (a_counts[i] * b_counts[j]))
    emi = _expected_mutual_information(a_counts, b_counts, n)
    normalizer = max(h_a, h_b)
    denominator = normalizer - emi
    if abs(denominator) < 1e-15:
        denominator = 1e-15 if denominator >= 0 else -1e-15
    return float((mi - emi) / denominator)


def partition_agreement_scores(labels_a, labels_b) -> dict[str, float]:
    """ARI and AMI between two partitions of the same elements."""
    return {
        "ari": adjusted_rand_index(labels_a, labels_b),
        "ami": adjusted_mutual_information(labels_a, labels_b),
    }


def top_n_accuracy(probs: np.ndarray, true_idx: np.ndarray, ns: tuple[int, ...]) -> dict[int, float]:
    """Fraction of rows whose true class is among the n highest-probability
    classes (ties broken by class index, deterministic)."""
    probs = np.asarray(probs, dtype=np.float64)
    true_idx = np.asarray(true_idx, dtype=np.int64)
    order = np.argsort(-probs, axis=1, kind="stable")
    out = {}
    for n in ns:
        hits = (order[:, : min(n, probs.shape[1])] == true_idx[:, None]).any(axis=1)
        out[n] = float(hits.mean())
    return out
