"""Finite-difference verification of the hand-derived gradients."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .config import XAlignConfig
from .losses import batch_losses_and_grads
from .params import TRAINABLE, XAlignParams
from .train import TrainInstance, forward_batch


def _batch_loss(
    batch: list[TrainInstance],
    params: XAlignParams,
    config: XAlignConfig,
    aspect_idx: list[np.ndarray],
) -> float:
    e_branch, a_branch = forward_batch(
        batch, params, config, rng=None, train=True, aspect_idx=aspect_idx
    )
    report, _ = batch_losses_and_grads(
        e_branch, a_branch, [b.label for b in batch], params, config, want_grads=False
    )
    return report.l_total


def gradient_check(
    params: XAlignParams,
    batch: list[TrainInstance],
    config: XAlignConfig,
    epsilon: float = 1e-4,
    aspect_idx: list[np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Dropout must be disabled: its mask would differ between the two loss
    evaluations of each central difference.
    """
    if config.dropout_p != 0.0:
        raise InvalidInputError("gradient check requires dropout_p == 0")
    if aspect_idx is None:
        rng = np.random.default_rng(config.seed + 17)
        aspect_idx = [
            np.sort(rng.choice(config.t, size=config.m, replace=False)) for _ in batch
        ]

    e_branch, a_branch = forward_batch(
        batch, params, config, rng=None, train=True, aspect_idx=aspect_idx
    )
    _, grads = batch_losses_and_grads(
        e_branch, a_branch, [b.label for b in batch], params, config
    )

    worst = 0.0
    work = params.copy()
    for name in TRAINABLE:
        tensor = work[name]
        flat = tensor.reshape(-1)
        analytic = grads[name].reshape(-1)
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + epsilon
            up = _batch_loss(batch, work, config, aspect_idx)
            flat[idx] = keep - epsilon
            down = _batch_loss(batch, work, config, aspect_idx)
            flat[idx] = keep
            numeric = (up - down) / (2.0 * epsilon)
            denom = abs(analytic[idx]) + abs(numeric)
            if denom < 1e-10:
                continue
            worst = max(worst, abs(analytic[idx] - numeric) / max(denom, 1e-8))
    return worst
