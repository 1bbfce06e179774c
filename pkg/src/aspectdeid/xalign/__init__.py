"""Cross-attention alignment model: forward passes, losses, training."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import XAlignConfig
from .gradcheck import gradient_check
from .losses import (
    LossReport,
    alignment_loss,
    batch_losses_and_grads,
    compute_losses,
    cross_entropy,
    reconstruction_loss,
)
from .model import (
    AttnCache,
    BranchBatch,
    CasMatrix,
    ForwardResult,
    HiddenStates,
    attend,
    attn_forward,
    branch_batch_forward,
    compute_cas,
    forward_pass,
)
from .params import TENSOR_ORDER, TRAINABLE, XAlignParams, init_params
from .train import AdamState, TrainInstance, adam_step, build_instances, forward_batch, train

__all__ = [
    "AdamState",
    "AttnCache",
    "BranchBatch",
    "CasMatrix",
    "ForwardResult",
    "HiddenStates",
    "LossReport",
    "TENSOR_ORDER",
    "TRAINABLE",
    "TrainInstance",
    "XAlignConfig",
    "XAlignParams",
    "adam_step",
    "alignment_loss",
    "attend",
    "attn_forward",
    "batch_losses_and_grads",
    "branch_batch_forward",
    "build_instances",
    "compute_cas",
    "compute_losses",
    "cross_entropy",
    "forward_batch",
    "forward_pass",
    "gradient_check",
    "init_params",
    "load_checkpoint",
    "reconstruction_loss",
    "save_checkpoint",
    "train",
]
