"""Learnable parameter state and initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import XAlignConfig

# Tensor order is part of the checkpoint contract.
TENSOR_ORDER = (
    "aspect_tokens",
    "w_q",
    "w_k",
    "w_v",
    "bn_gamma",
    "bn_beta",
    "bn_running_mean",
    "bn_running_var",
    "mlp_w1",
    "mlp_b1",
    "mlp_w2",
    "mlp_b2",
)

TRAINABLE = (
    "aspect_tokens",
    "w_q",
    "w_k",
    "w_v",
    "bn_gamma",
    "bn_beta",
    "mlp_w1",
    "mlp_b1",
    "mlp_w2",
    "mlp_b2",
)

# Decoupled weight decay applies to weight matrices only, not biases/norm params.
DECAYED = ("aspect_tokens", "w_q", "w_k", "w_v", "mlp_w1", "mlp_w2")

BN_EPS = 1e-5


@dataclass
class XAlignParams:
    tensors: dict[str, np.ndarray]
    trained: bool = False

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = value

    @property
    def t(self) -> int:
        return self.tensors["aspect_tokens"].shape[0]

    @property
    def dimension(self) -> int:
        return self.tensors["aspect_tokens"].shape[1]

    def copy(self) -> "XAlignParams":
        return XAlignParams(
            tensors={k: v.copy() for k, v in self.tensors.items()}, trained=self.trained
        )

    def allclose(self, other: "XAlignParams", atol: float = 0.0) -> bool:
        return all(
            np.allclose(self.tensors[k], other.tensors[k], rtol=0.0, atol=atol)
            for k in TENSOR_ORDER
        )


def init_params(config: XAlignConfig) -> XAlignParams:
    """Deterministic initialization for a given config seed.

    Aspect tokens are i.i.d. normal with variance 1/D; projections start at
    identity plus small noise so initial attention logits stay near the
    sigmoid mid-range.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    d = config.dimension
    scale = 1.0 / np.sqrt(d)
    tensors = {
        "aspect_tokens": rng.normal(0.0, scale, size=(config.t, d)),
        "w_q": np.eye(d) + rng.normal(0.0, 0.02, size=(d, d)),
        "w_k": np.eye(d) + rng.normal(0.0, 0.02, size=(d, d)),
        "w_v": np.eye(d) + rng.normal(0.0, 0.02, size=(d, d)),
        "bn_gamma": np.ones(d),
        "bn_beta": np.zeros(d),
        "bn_running_mean": np.zeros(d),
        "bn_running_var": np.ones(d),
        "mlp_w1": rng.normal(0.0, scale, size=(d, d)),
        "mlp_b1": np.zeros(d),
        "mlp_w2": rng.normal(0.0, scale, size=(d, config.n_classes)),
        "mlp_b2": np.zeros(config.n_classes),
    }
    return XAlignParams(tensors={k: v.astype(np.float64) for k, v in tensors.items()})
