"""Training/model configuration for the cross-attention alignment model."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass
class XAlignConfig:
    t: int = 10               # total aspect tokens
    m: int = 5                # aspect tokens sampled per training instance
    dimension: int = 384      # embedding dim (also the attention key dim)
    tau: float = 0.007        # sigmoid attention scaling factor
    tau_c: float = 0.5        # contrastive temperature
    dropout_p: float = 0.7
    aux_weight: float = 1.0   # weight of the label-prediction loss
    align_weight: float = 0.01
    lr: float = 1e-4
    weight_decay: float = 0.015
    epochs: int = 150
    batch_size: int = 64
    seed: int = 0
    aux_enabled: bool = True
    n_classes: int = 4

    def validate(self) -> None:
        if not (1 <= self.m <= self.t):
            raise ConfigError(f"need 1 <= m <= t, got m={self.m}, t={self.t}")
        if self.tau <= 0 or self.tau_c <= 0:
            raise ConfigError("tau and tau_c must be positive")
        if not (0.0 <= self.dropout_p < 1.0):
            raise ConfigError(f"dropout_p must be in [0,1), got {self.dropout_p}")
        if self.dimension <= 0:
            raise ConfigError("dimension must be positive")
        if self.align_weight != 0.0 and self.batch_size < 2:
            raise ConfigError("alignment loss needs batch size >= 2")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "XAlignConfig":
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        cfg.validate()
        return cfg
