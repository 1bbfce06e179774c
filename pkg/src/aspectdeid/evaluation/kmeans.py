"""Deterministic k-means with k-means++ style seeding and a fixed Lloyd cap."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

MAX_ITER = 100


def _plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centers[i] = x[rng.integers(n)]
        else:
            r = rng.random() * total
            centers[i] = x[int(np.searchsorted(np.cumsum(closest), r).clip(0, n - 1))]
        closest = np.minimum(closest, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    assign = None
    had_empty = False
    for _ in range(MAX_ITER):
        dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        if assign is not None and (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(centers.shape[0]):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                had_empty = True
    return centers, assign, had_empty


def kmeans_fit(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fit cluster centers; on an empty cluster, re-seed once and accept."""
    x = np.asarray(x, dtype=np.float64)
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if x.shape[0] < k:
        raise InvalidInputError(f"need at least k={k} points, got {x.shape[0]}")
    rng = np.random.default_rng(seed)
    centers, _, had_empty = _lloyd(x, _plus_plus_init(x, k, rng))
    if had_empty:
        rng = np.random.default_rng(seed + 1)
        centers, _, _ = _lloyd(x, _plus_plus_init(x, k, rng))
    return centers


def kmeans_predict(centers: np.ndarray, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return dists.argmin(axis=1)
