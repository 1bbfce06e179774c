"""Multiclass gradient-boosted regression trees with softmax log-loss.

Small exact-greedy implementation matching the downstream-classifier shape
used throughout the evaluation protocols: one depth-limited tree per class
per round, shrinkage, and early stopping on a held-out log-loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..errors import InvalidInputError


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _leaf_value(residual: np.ndarray, n_classes: int) -> float:
    # Newton step for the softmax objective on one leaf.
    denom = np.sum(np.abs(residual) * (1.0 - np.abs(residual)))
    if denom < 1e-12:
        return 0.0
    return ((n_classes - 1) / n_classes) * residual.sum() / denom


def _best_split(x: np.ndarray, r: np.ndarray) -> tuple[int, float] | None:
    """Exact greedy least-squares split: maximize variance reduction of the
    residuals. Ties resolve to the first (lowest feature, lowest threshold)."""
    n, _ = x.shape
    total = r.sum()
    best = None
    best_gain = 1e-12
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        csum = np.cumsum(r[order])
        for i in range(n - 1):
            if xs[i + 1] <= xs[i]:
                continue
            nl = i + 1
            left_sum = csum[i]
            right_sum = total - left_sum
            gain = left_sum**2 / nl + right_sum**2 / (n - nl) - total**2 / n
            if gain > best_gain:
                best_gain = gain
                best = (f, (xs[i] + xs[i + 1]) / 2.0)
    return best


def _fit_tree(
    x: np.ndarray, residual: np.ndarray, depth: int | None, n_classes: int
) -> _Node:
    node = _Node()
    if (
        len(residual) < 2
        or (depth is not None and depth <= 0)
        or np.allclose(residual, residual[0])
    ):
        node.value = _leaf_value(residual, n_classes)
        return node
    split = _best_split(x, residual)
    if split is None:
        node.value = _leaf_value(residual, n_classes)
        return node
    feature, threshold = split
    mask = x[:, feature] <= threshold
    node.feature = feature
    node.threshold = threshold
    child_depth = None if depth is None else depth - 1
    node.left = _fit_tree(x[mask], residual[mask], child_depth, n_classes)
    node.right = _fit_tree(x[~mask], residual[~mask], child_depth, n_classes)
    return node


def _predict_tree(node: _Node, x: np.ndarray) -> np.ndarray:
    if node.is_leaf:
        return np.full(x.shape[0], node.value)
    mask = x[:, node.feature] <= node.threshold
    out = np.empty(x.shape[0])
    out[mask] = _predict_tree(node.left, x[mask])
    out[~mask] = _predict_tree(node.right, x[~mask])
    return out


@dataclass
class GradientBoostingClassifier:
    """Softmax gradient boosting; deterministic for a fixed seed."""

    n_estimators: int = 100
    max_depth: int | None = 3
    learning_rate: float = 0.1
    n_classes: int = 4
    early_stopping_rounds: int | None = 10
    validation_fraction: float = 0.2
    seed: int = 0

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GradientBoostingClassifier":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise InvalidInputError("x must be (n, d) and y (n,)")
        n = x.shape[0]
        val_x = val_y = None
        if self.early_stopping_rounds is not None and n >= 10:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(n)
            n_val = max(1, int(self.validation_fraction * n))
            val_idx, train_idx = order[:n_val], order[n_val:]
            val_x, val_y = x[val_idx], y[val_idx]
            x, y = x[train_idx], y[train_idx]
            n = x.shape[0]
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0
        scores = np.zeros((n, self.n_classes))
        self.trees_: list[list[_Node]] = []
        best_loss = np.inf
        best_round = 0
        val_scores = None if val_x is None else np.zeros((val_x.shape[0], self.n_classes))
        for _ in range(self.n_estimators):
            probs = softmax(scores, axis=1)
            round_trees = []
            for cls in range(self.n_classes):
                tree = _fit_tree(x, onehot[:, cls] - probs[:, cls], self.max_depth, self.n_classes)
                round_trees.append(tree)
                scores[:, cls] += self.learning_rate * _predict_tree(tree, x)
            self.trees_.append(round_trees)
            if val_x is not None:
                for cls in range(self.n_classes):
                    val_scores[:, cls] += self.learning_rate * _predict_tree(
                        round_trees[cls], val_x
                    )
                val_probs = softmax(val_scores, axis=1)
                loss = -np.mean(
                    np.log(val_probs[np.arange(len(val_y)), val_y] + 1e-12)
                )
                if loss < best_loss - 1e-12:
                    best_loss = loss
                    best_round = len(self.trees_)
                elif len(self.trees_) - best_round >= self.early_stopping_rounds:
                    self.trees_ = self.trees_[:best_round]
                    break
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        scores = np.zeros((x.shape[0], self.n_classes))
        for round_trees in self.trees_:
            for cls in range(self.n_classes):
                scores[:, cls] += self.learning_rate * _predict_tree(round_trees[cls], x)
        return softmax(scores, axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)
