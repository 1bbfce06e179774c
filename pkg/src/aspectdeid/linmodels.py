"""Deterministic logistic models fit by L-BFGS with analytic gradients."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, softmax

from .errors import InvalidInputError


def fit_binary_logistic(
    x: np.ndarray, y: np.ndarray, l2: float = 1e-3, max_iter: int = 200
) -> tuple[np.ndarray, float]:
    """Binary logistic regression; returns (weights, bias)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise InvalidInputError("x must be (n, d) and y (n,)")
    if not (set(np.unique(y)) <= {0.0, 1.0}):
        raise InvalidInputError("labels must be 0/1")
    n, d = x.shape

    def objective(theta):
        w, b = theta[:d], theta[d]
        logits = x @ w + b
        p = expit(logits)
        eps = 1e-12
        nll = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
        nll += 0.5 * l2 * (w @ w)
        grad_logits = (p - y) / n
        grad_w = x.T @ grad_logits + l2 * w
        grad_b = grad_logits.sum()
        return nll, np.concatenate([grad_w, [grad_b]])

    res = minimize(
        objective,
        np.zeros(d + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter},
    )
    return res.x[:d].copy(), float(res.x[d])


def predict_binary_proba(x: np.ndarray, weights: np.ndarray, bias: float) -> np.ndarray:
    return expit(np.asarray(x, dtype=np.float64) @ weights + bias)


def fit_multinomial_logistic(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    l2: float = 1e-3,
    max_iter: int = 200,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Softmax regression; returns a (d+1, n_classes) matrix (last row = bias)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = x.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    def objective(theta):
        mat = theta.reshape(d + 1, n_classes)
        w, b = mat[:d], mat[d]
        p = softmax(x @ w + b, axis=1)
        eps = 1e-12
        nll = -np.mean(np.log(p[np.arange(n), y] + eps))
        nll += 0.5 * l2 * np.sum(w * w)
        grad_logits = (p - onehot) / n
        grad = np.vstack([x.T @ grad_logits + l2 * w, grad_logits.sum(axis=0)])
        return nll, grad.reshape(-1)

    x0 = np.zeros((d + 1) * n_classes) if init is None else init.reshape(-1).copy()
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter})
    return res.x.reshape(d + 1, n_classes).copy()


def predict_multinomial_proba(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return softmax(x @ theta[:-1] + theta[-1], axis=1)
