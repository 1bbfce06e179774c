"""Evaluation protocols: downstream utility, clustering fidelity, re-identification.

Document vectors are the mean of sub-sentence embeddings. Because original
documents and substituted summaries have very different lengths (a summary
keeps only extracted sub-sentences), raw mean vectors of different variants
live at different scales. Classification and clustering therefore run on
per-variant rank/CDF features (each feature mapped through its variant's
empirical CDF), which are scale-free; attack summary vectors are
L2-normalized instead. Both choices are recorded in the evaluation bundle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..corpus import EmbeddedCorpus, GradeClass, SensitiveDocument
from ..errors import InvalidInputError
from ..linmodels import fit_multinomial_logistic, predict_multinomial_proba
from .boosting import GradientBoostingClassifier
from .kmeans import kmeans_fit, kmeans_predict
from .metrics import MetricsReport, metrics_report, top_n_accuracy

_GRADE_ORDER = (GradeClass.F, GradeClass.C, GradeClass.B, GradeClass.A)
_TOP_NS = (1, 5, 10, 100)


def _docs(variant) -> list[SensitiveDocument]:
    if isinstance(variant, EmbeddedCorpus):
        return variant.documents
    return list(variant)


def mean_vectors(docs: list[SensitiveDocument]) -> np.ndarray:
    return np.stack(
        [
            np.mean([ss.embedding for ss in doc.sub_sentences], axis=0).astype(np.float64)
            for doc in docs
        ]
    )


def variant_features(docs: list[SensitiveDocument]) -> np.ndarray:
    """Per-variant rank/CDF features for the tree classifier: each dimension
    of the mean-embedding matrix is replaced by its within-variant empirical
    CDF value, making the representation invariant to the variant's scale."""
    x = mean_vectors(docs)
    n = x.shape[0]
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        ranks = np.argsort(np.argsort(x[:, j], kind="stable"), kind="stable")
        out[:, j] = (ranks + 0.5) / n
    return out


def standardized_vectors(docs: list[SensitiveDocument]) -> np.ndarray:
    """Per-variant z-scored mean embeddings for clustering: removes the
    variant's scale/offset while preserving cluster geometry."""
    x = mean_vectors(docs)
    return (x - x.mean(axis=0)) / np.maximum(x.std(axis=0), 1e-9)


def evaluate_utility(
    train_variant,
    test_variant,
    labels: dict[str, GradeClass],
    seed: int = 0,
    classifier: str = "gbdt",
) -> MetricsReport:
    """Train a grade classifier on one corpus variant, test on another.

    Classifier is gradient-boosted trees (100 x depth 3, shrinkage 0.1,
    early stopping 10) or a multinomial-logistic fallback.
    """
    train_docs = _docs(train_variant)
    test_docs = _docs(test_variant)
    missing = [d.person_id for d in train_docs + test_docs if d.person_id not in labels]
    if missing:
        raise InvalidInputError(f"labels missing for persons: {missing[:5]}")
    x_train = variant_features(train_docs)
    x_test = variant_features(test_docs)
    y_train = np.array([labels[d.person_id].rank for d in train_docs])
    y_test = [labels[d.person_id].rank for d in test_docs]
    present = tuple(sorted(set(int(v) for v in y_train)))
    missing_classes = tuple(
        _GRADE_ORDER[i].value for i in range(4) if i not in present
    )
    if classifier == "gbdt":
        model = GradientBoostingClassifier(n_classes=4, seed=seed).fit(x_train, y_train)
        y_pred = model.predict(x_test)
    elif classifier == "logistic":
        theta = fit_multinomial_logistic(x_train, y_train, n_classes=4)
        y_pred = predict_multinomial_proba(x_test, theta).argmax(axis=1)
    else:
        raise InvalidInputError(f"unknown classifier {classifier!r}")
    return metrics_report(list(y_test), [int(p) for p in y_pred], missing_classes)


def utility_self_test(
    variant, labels: dict[str, GradeClass], seed: int = 0, max_depth: int | None = None
) -> MetricsReport:
    """Degenerate overfit check: train and evaluate on the same documents
    with depth-unbounded trees and no early stopping."""
    docs = _docs(variant)
    x = variant_features(docs)
    y = np.array([labels[d.person_id].rank for d in docs])
    model = GradientBoostingClassifier(
        n_classes=4, max_depth=max_depth, early_stopping_rounds=None, seed=seed
    ).fit(x, y)
    pred = model.predict(x)
    return metrics_report([int(v) for v in y], [int(p) for p in pred])


def _match_clusters(labels_true: np.ndarray, labels_pred: np.ndarray, k: int) -> np.ndarray:
    """Hungarian assignment of predicted cluster ids onto reference ids."""
    weight = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(labels_true, labels_pred):
        weight[int(t), int(p)] += 1
    rows, cols = linear_sum_assignment(-weight)
    mapping = {int(c): int(r) for r, c in zip(rows, cols)}
    return np.array([mapping[int(p)] for p in labels_pred])


def clustering_fidelity(
    train_variant,
    test_variant_a,
    test_variant_b,
    k: int = 8,
    seed: int = 0,
) -> MetricsReport:
    """Fit k-means on the training variant; compare cluster labels it assigns
    to two aligned test variants (variant_a labels act as ground truth)."""
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    docs_a = {d.person_id: d for d in _docs(test_variant_a)}
    docs_b = {d.person_id: d for d in _docs(test_variant_b)}
    persons = sorted(set(docs_a) & set(docs_b))
    if not persons:
        raise InvalidInputError("test variants share no persons")
    centers = kmeans_fit(standardized_vectors(_docs(train_variant)), k, seed)
    labels_a = kmeans_predict(centers, standardized_vectors([docs_a[p] for p in persons]))
    labels_b = kmeans_predict(centers, standardized_vectors([docs_b[p] for p in persons]))
    matched_b = _match_clusters(labels_a, labels_b, k)
    return metrics_report([int(v) for v in labels_a], [int(v) for v in matched_b])


def cluster_labels(variant, k: int = 8, seed: int = 0) -> list[int]:
    """Fit-and-assign cluster ids for one variant (for ARI/AMI comparisons)."""
    x = standardized_vectors(_docs(variant))
    centers = kmeans_fit(x, k, seed)
    return [int(v) for v in kmeans_predict(centers, x)]


@dataclass(frozen=True)
class ReidReport:
    top_n: dict[int, float]
    n_persons: int
    chance_top1: float
    attacker_holdout_accuracy: float
    reached_target: bool

    def as_dict(self) -> dict:
        return {
            "top_n": {str(k): v for k, v in self.top_n.items()},
            "n_persons": self.n_persons,
            "chance_top1": self.chance_top1,
            "attacker_holdout_accuracy": self.attacker_holdout_accuracy,
            "reached_target": self.reached_target,
        }


def _sample_summary_vector(
    doc: SensitiveDocument, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    n = len(doc.sub_sentences)
    size = max(1, round(ratio * n))
    idx = rng.choice(n, size=min(size, n), replace=False)
    vec = np.mean([doc.sub_sentences[i].embedding for i in idx], axis=0).astype(np.float64)
    return _unit(vec)


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def reid_attack(
    original,
    variants: dict[str, list[SensitiveDocument]],
    sample_ratio: float = 0.1,
    seed: int = 0,
    samples_per_person: int = 20,
    target_accuracy: float = 0.98,
    max_rounds: int = 8,
) -> dict[str, ReidReport]:
    """Train a person-identification attacker on random original sub-samples.

    The attacker is a multinomial logistic model over L2-normalized mean
    embeddings of sampled summaries, trained in rounds until held-out
    accuracy reaches the target (or the round cap, flagged in the report).
    Returns a report keyed by variant name, plus "original" for fresh
    original-document samples.
    """
    docs = _docs(original)
    if len(docs) < 2:
        raise InvalidInputError("re-identification needs at least 2 persons")
    persons = sorted(d.person_id for d in docs)
    person_idx = {p: i for i, p in enumerate(persons)}
    by_person = {d.person_id: d for d in docs}
    n_persons = len(persons)

    rng = np.random.default_rng(seed)
    x_train, y_train, x_hold, y_hold = [], [], [], []
    for p in persons:
        doc = by_person[p]
        for _ in range(samples_per_person):
            x_train.append(_sample_summary_vector(doc, sample_ratio, rng))
            y_train.append(person_idx[p])
        for _ in range(max(2, samples_per_person // 4)):
            x_hold.append(_sample_summary_vector(doc, sample_ratio, rng))
            y_hold.append(person_idx[p])
    x_train = np.stack(x_train)
    y_train = np.array(y_train)
    x_hold = np.stack(x_hold)
    y_hold = np.array(y_hold)

    theta = None
    holdout_acc = 0.0
    for _ in range(max_rounds):
        theta = fit_multinomial_logistic(
            x_train, y_train, n_classes=n_persons, l2=1e-4, max_iter=100, init=theta
        )
        holdout_acc = float(
            (predict_multinomial_proba(x_hold, theta).argmax(axis=1) == y_hold).mean()
        )
        if holdout_acc >= target_accuracy:
            break
    reached = holdout_acc >= target_accuracy

    reports = {}
    eval_rng = np.random.default_rng(seed + 1)
    x_orig = np.stack(
        [_sample_summary_vector(by_person[p], sample_ratio, eval_rng) for p in persons]
    )
    y_orig = np.array([person_idx[p] for p in persons])
    reports["original"] = ReidReport(
        top_n=top_n_accuracy(predict_multinomial_proba(x_orig, theta), y_orig, _TOP_NS),
        n_persons=n_persons,
        chance_top1=1.0 / n_persons,
        attacker_holdout_accuracy=holdout_acc,
        reached_target=reached,
    )
    for name, variant_docs in variants.items():
        usable = [d for d in variant_docs if d.person_id in person_idx]
        if not usable:
            continue
        x_var = np.stack(
            [
                _unit(np.mean([ss.embedding for ss in d.sub_sentences], axis=0).astype(np.float64))
                for d in usable
            ]
        )
        y_var = np.array([person_idx[d.person_id] for d in usable])
        reports[name] = ReidReport(
            top_n=top_n_accuracy(predict_multinomial_proba(x_var, theta), y_var, _TOP_NS),
            n_persons=n_persons,
            chance_top1=1.0 / n_persons,
            attacker_holdout_accuracy=holdout_acc,
            reached_target=reached,
        )
    return reports
