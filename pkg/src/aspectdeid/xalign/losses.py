"""Reconstruction, label-prediction, and contrastive alignment losses.

Batch layout for the alignment loss: expert-branch pooled vectors occupy
slots 1..N and aspect-branch pooled vectors slots N+1..2N, so instance k's
positive pair is (k, N+k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InvalidInputError
from .config import XAlignConfig
from .model import BranchBatch, ForwardResult, branch_batch_backward, head_backward, zero_grads
from .params import XAlignParams


def reconstruction_loss(h: np.ndarray, targets: np.ndarray) -> float:
    """Mean over rows of the per-row MSE between hidden states and the query."""
    return float(np.mean((h - targets) ** 2))


def cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Stable softmax cross-entropy; returns (loss, dloss/dlogits)."""
    shifted = logits - logits.max()
    log_probs = shifted - np.log(np.exp(shifted).sum())
    probs = np.exp(log_probs)
    grad = probs.copy()
    grad[label] -= 1.0
    return float(-log_probs[label]), grad


def alignment_loss(z: np.ndarray, tau_c: float) -> float:
    """Pairwise contrastive loss over 2N pooled vectors (positives k <-> N+k)."""
    loss, _ = _alignment_loss_grad(np.asarray(z, dtype=np.float64), tau_c, want_grad=False)
    return loss


def _alignment_loss_grad(
    z: np.ndarray, tau_c: float, want_grad: bool = True
) -> tuple[float, np.ndarray | None]:
    m = z.shape[0]
    if m < 2 or m % 2 != 0:
        raise InvalidInputError("alignment loss needs an even number of pooled vectors")
    n = m // 2
    if n < 2:
        raise ConfigError("alignment loss degenerates for batch size 1")
    norms = np.linalg.norm(z, axis=1)
    if (norms == 0.0).any():
        raise InvalidInputError("alignment loss undefined for a zero pooled vector")
    zhat = z / norms[:, None]
    sim = zhat @ zhat.T

    loss = 0.0
    coeff = np.zeros((m, m))  # dL/dsim, diagonal untouched
    others = ~np.eye(m, dtype=bool)
    for k in range(n):
        for i, j in ((k, n + k), (n + k, k)):
            row = sim[i, others[i]] / tau_c
            mx = row.max()
            lse = mx + np.log(np.exp(row - mx).sum())
            loss += (lse - sim[i, j] / tau_c) / (2 * n)
            if want_grad:
                w = np.zeros(m)
                w[others[i]] = np.exp(sim[i, others[i]] / tau_c - lse)
                coeff[i] += w / (tau_c * 2 * n)
                coeff[i, j] -= 1.0 / (tau_c * 2 * n)
    if not want_grad:
        return float(loss), None
    csym = coeff + coeff.T
    dzhat = csym @ zhat
    dz = (dzhat - (dzhat * zhat).sum(axis=1, keepdims=True) * zhat) / norms[:, None]
    return float(loss), dz


@dataclass
class LossReport:
    l_rec: float
    l_aux: float
    l_align: float
    l_total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "l_rec": self.l_rec,
            "l_aux": self.l_aux,
            "l_align": self.l_align,
            "l_total": self.l_total,
        }


def compute_losses(
    pairs: list[tuple[ForwardResult, ForwardResult]],
    labels: list[int | None],
    config: XAlignConfig,
    ablate_align: bool = False,
) -> LossReport:
    """Loss values for a batch of (expert-view, aspect-view) forward passes.

    Value-level only; training gradients flow through batch_losses_and_grads,
    whose batch norm couples the instances of a batch.
    """
    n = len(pairs)
    if n == 0:
        raise InvalidInputError("empty batch")
    if n == 1 and config.align_weight != 0.0 and not ablate_align:
        raise ConfigError("alignment loss needs batch size >= 2")
    l_rec = float(
        np.mean([reconstruction_loss(e.hidden.h, e.query_embeddings) for e, _ in pairs])
    )
    l_aux = 0.0
    if config.aux_enabled:
        ces = []
        for (e, a_res), label in zip(pairs, labels):
            if label is None:
                raise InvalidInputError("aux loss enabled but an instance has no label")
            ces.append(
                0.5 * (cross_entropy(e.logits, label)[0] + cross_entropy(a_res.logits, label)[0])
            )
        l_aux = float(np.mean(ces))
    l_align = 0.0
    if not ablate_align and n >= 2:
        z = np.stack([e.hidden.z for e, _ in pairs] + [a.hidden.z for _, a in pairs])
        l_align = alignment_loss(z, config.tau_c)
    l_total = l_rec + config.aux_weight * l_aux + config.align_weight * l_align
    return LossReport(l_rec=l_rec, l_aux=l_aux, l_align=l_align, l_total=l_total)


def batch_losses_and_grads(
    e_branch: BranchBatch,
    a_branch: BranchBatch,
    labels: list[int | None],
    params: XAlignParams,
    config: XAlignConfig,
    want_grads: bool = True,
    ablate_align: bool = False,
) -> tuple[LossReport, dict[str, np.ndarray] | None]:
    """Batch loss and, optionally, hand-derived gradients for every parameter."""
    n = len(e_branch.attn)
    if n == 0:
        raise InvalidInputError("empty batch")
    if n == 1 and config.align_weight != 0.0 and not ablate_align:
        raise ConfigError("alignment loss needs batch size >= 2")

    grads = zero_grads(params) if want_grads else None
    dh_e = [np.zeros_like(h) for h in e_branch.h]
    dh_a = [np.zeros_like(h) for h in a_branch.h]

    rec_terms = []
    for i in range(n):
        h = e_branch.h[i]
        target = e_branch.attn[i].query_raw
        rec_terms.append(reconstruction_loss(h, target))
        if want_grads:
            rows, width = h.shape
            dh_e[i] += (2.0 / (n * rows * width)) * (h - target)
    l_rec = float(np.mean(rec_terms))

    l_aux = 0.0
    if config.aux_enabled:
        ce_terms = []
        for i, label in enumerate(labels):
            if label is None:
                raise InvalidInputError("aux loss enabled but an instance has no label")
            for branch, dh in ((e_branch, dh_e), (a_branch, dh_a)):
                head = branch.heads[i]
                ce, dlogits = cross_entropy(head.logits, label)
                ce_terms.append(ce)
                if want_grads:
                    dz = head_backward(
                        head, dlogits * (config.aux_weight / (2.0 * n)), params, grads
                    )
                    dh[i] += dz / branch.h[i].shape[0]
        l_aux = float(np.mean(ce_terms))

    l_align = 0.0
    if not ablate_align and n >= 2:
        z = np.concatenate([e_branch.z, a_branch.z], axis=0)
        l_align, dz_align = _alignment_loss_grad(z, config.tau_c, want_grad=want_grads)
        if want_grads and config.align_weight != 0.0:
            for i in range(n):
                dh_e[i] += config.align_weight * dz_align[i] / e_branch.h[i].shape[0]
                dh_a[i] += config.align_weight * dz_align[n + i] / a_branch.h[i].shape[0]

    if want_grads:
        branch_batch_backward(e_branch, dh_e, params, config, grads)
        branch_batch_backward(a_branch, dh_a, params, config, grads)

    l_total = l_rec + config.aux_weight * l_aux + config.align_weight * l_align
    return LossReport(l_rec=l_rec, l_aux=l_aux, l_align=l_align, l_total=l_total), grads
