"""Training loop: per-note instances, Adam with decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import EmbeddedCorpus, grade_to_class
from ..errors import EngineError, InvalidInputError, MissingLabelError
from .config import XAlignConfig
from .losses import LossReport, batch_losses_and_grads
from .model import BranchBatch, branch_batch_forward
from .params import DECAYED, TRAINABLE, XAlignParams, init_params

_BN_MOMENTUM = 0.1
_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


@dataclass
class TrainInstance:
    """One (person, expert-note) pair: shared document, note-specific query."""

    person_id: str
    expert_id: str
    doc: np.ndarray     # (k, D)
    expert: np.ndarray  # (n, D)
    label: int | None


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: XAlignParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float,
) -> None:
    """AdamW update; decay is decoupled and skipped for biases/norm parameters."""
    if not state.m:
        for name in TRAINABLE:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
    state.step += 1
    bc1 = 1.0 - _ADAM_B1**state.step
    bc2 = 1.0 - _ADAM_B2**state.step
    for name in TRAINABLE:
        g = grads[name]
        state.m[name] = _ADAM_B1 * state.m[name] + (1.0 - _ADAM_B1) * g
        state.v[name] = _ADAM_B2 * state.v[name] + (1.0 - _ADAM_B2) * g * g
        update = (state.m[name] / bc1) / (np.sqrt(state.v[name] / bc2) + _ADAM_EPS)
        params[name] = params[name] - lr * update
        if name in DECAYED and weight_decay != 0.0:
            params[name] = params[name] - lr * weight_decay * params[name]


def build_instances(corpus: EmbeddedCorpus, config: XAlignConfig) -> list[TrainInstance]:
    """One training instance per (person, expert) note, deterministic order."""
    docs = {d.person_id: d for d in corpus.documents}
    instances = []
    for note in sorted(corpus.notes, key=lambda n: (n.person_id, n.expert_id)):
        doc = docs.get(note.person_id)
        if doc is None:
            continue
        if note.grade_score is not None:
            label = grade_to_class(note.grade_score).rank
        elif note.person_id in corpus.labels:
            label = corpus.labels[note.person_id].rank
        else:
            label = None
        if label is None and config.aux_enabled:
            raise MissingLabelError(
                f"aux loss enabled but note {note.person_id}/{note.expert_id} has no label"
            )
        instances.append(
            TrainInstance(
                person_id=note.person_id,
                expert_id=note.expert_id,
                doc=np.stack([ss.embedding for ss in doc.sub_sentences]).astype(np.float64),
                expert=np.stack([ss.embedding for ss in note.sub_sentences]).astype(np.float64),
                label=label,
            )
        )
    if not instances:
        raise InvalidInputError("corpus yields no training instances")
    return instances


def _update_running(params: XAlignParams, norm_cache) -> None:
    params["bn_running_mean"] = (
        (1.0 - _BN_MOMENTUM) * params["bn_running_mean"] + _BN_MOMENTUM * norm_cache.bn_mu
    )
    params["bn_running_var"] = (
        (1.0 - _BN_MOMENTUM) * params["bn_running_var"] + _BN_MOMENTUM * norm_cache.bn_var
    )


def forward_batch(
    batch: list[TrainInstance],
    params: XAlignParams,
    config: XAlignConfig,
    rng: np.random.Generator | None,
    train: bool = True,
    aspect_idx: list[np.ndarray] | None = None,
    update_running: bool = False,
) -> tuple[BranchBatch, BranchBatch]:
    """Expert then aspect branch forwards for a batch; batch norm spans each branch."""
    docs = [inst.doc for inst in batch]
    e_branch = branch_batch_forward(
        [inst.expert for inst in batch], docs, params, config, train=train, rng=rng
    )
    if aspect_idx is None:
        if train:
            aspect_idx = [
                np.sort(rng.choice(config.t, size=config.m, replace=False)) for _ in batch
            ]
        else:
            aspect_idx = [np.arange(config.t) for _ in batch]
    a_branch = branch_batch_forward(
        [params["aspect_tokens"][idx] for idx in aspect_idx],
        docs,
        params,
        config,
        train=train,
        rng=rng,
        aspect_idx=aspect_idx,
    )
    if update_running:
        _update_running(params, e_branch.norm)
        _update_running(params, a_branch.norm)
    return e_branch, a_branch


def train(
    corpus: EmbeddedCorpus, config: XAlignConfig, ablate_align: bool = False
) -> tuple[XAlignParams, list[dict[str, float]]]:
    """Train from scratch on a corpus; deterministic for a fixed config seed.

    Returns the trained parameters and the per-epoch loss history.
    `ablate_align` drops the alignment term from the graph entirely (kept for
    verifying that a zero alignment weight has no gradient effect).
    """
    config.validate()
    params = init_params(config)
    instances = build_instances(corpus, config)
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState()
    history: list[dict[str, float]] = []
    align_on = config.align_weight != 0.0

    for epoch in range(config.epochs):
        order = rng.permutation(len(instances))
        epoch_losses: list[LossReport] = []
        for start in range(0, len(order), config.batch_size):
            batch = [instances[i] for i in order[start : start + config.batch_size]]
            if len(batch) == 1 and align_on:
                continue  # a singleton tail batch cannot form contrastive pairs
            e_branch, a_branch = forward_batch(
                batch, params, config, rng, train=True, update_running=True
            )
            report, grads = batch_losses_and_grads(
                e_branch, a_branch, [b.label for b in batch], params, config,
                ablate_align=ablate_align,
            )
            if not np.isfinite(report.l_total):
                raise EngineError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: "
                    f"{report.as_dict()}"
                )
            adam_step(params, grads, state, config.lr, config.weight_decay)
            epoch_losses.append(report)
        history.append(
            {
                "epoch": epoch,
                "l_rec": float(np.mean([r.l_rec for r in epoch_losses])),
                "l_aux": float(np.mean([r.l_aux for r in epoch_losses])),
                "l_align": float(np.mean([r.l_align for r in epoch_losses])),
                "l_total": float(np.mean([r.l_total for r in epoch_losses])),
            }
        )
    params.trained = True
    return params, history
