"""Pipeline configuration: YAML file + dotted-key overrides, hashed for provenance."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .xalign import XAlignConfig


@dataclass
class SynthConfig:
    n_persons: int = 200
    t_true: int = 10
    subs_per_doc: int = 30
    psa_fraction: float = 0.06
    dimension: int = 32


@dataclass
class CorpusConfig:
    path: str = "corpus.aspcorp.jsonl"
    test_fraction: float = 0.2


@dataclass
class ExtractionConfig:
    alpha: float = 1.0
    beta: int = 5


@dataclass
class ArcssConfig:
    k_keep: int = 3
    mode: str = "fraction"  # "fraction" | "threshold"
    fraction: float = 0.25
    prob_threshold: float = 0.5
    iterations: int = 1

    def removal(self) -> dict:
        if self.mode == "fraction":
            return {"fraction": self.fraction}
        if self.mode == "threshold":
            return {"prob_threshold": self.prob_threshold}
        raise ConfigError(f"unknown arcss mode {self.mode!r}")


@dataclass
class AksConfig:
    k: int = 5
    class_mode: str = "on"  # "on" | "off" | "relax"


@dataclass
class EvalConfig:
    kmeans_k: int = 8
    reid_ratio: float = 0.1
    reid_samples_per_person: int = 20
    reid_target_accuracy: float = 0.98
    classifier: str = "gbdt"  # "gbdt" | "logistic"


@dataclass
class PipelineConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    xalign: XAlignConfig = field(default_factory=XAlignConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    arcss: ArcssConfig = field(default_factory=ArcssConfig)
    aks: AksConfig = field(default_factory=AksConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.xalign.validate()
        if self.aks.class_mode not in ("on", "off", "relax"):
            raise ConfigError(f"unknown aks.class_mode {self.aks.class_mode!r}")
        if self.arcss.mode not in ("fraction", "threshold"):
            raise ConfigError(f"unknown arcss.mode {self.arcss.mode!r}")
        if not (0.0 < self.eval.reid_ratio <= 1.0):
            raise ConfigError("eval.reid_ratio must be in (0, 1]")
        if self.eval.classifier not in ("gbdt", "logistic"):
            raise ConfigError(f"unknown eval.classifier {self.eval.classifier!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()


_SECTIONS = {
    "synth": SynthConfig,
    "corpus": CorpusConfig,
    "xalign": XAlignConfig,
    "extraction": ExtractionConfig,
    "arcss": ArcssConfig,
    "aks": AksConfig,
    "eval": EvalConfig,
}


def _coerce(current, value, keyname: str):
    """Coerce a parsed YAML scalar to the type of the field it overrides."""
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, str):
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {keyname}: {value!r}") from exc
    return value


def _apply(config: PipelineConfig, data: dict) -> None:
    for key, value in data.items():
        if key == "seed":
            config.seed = _coerce(config.seed, value, "seed")
        elif key in _SECTIONS:
            section = getattr(config, key)
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for k, v in value.items():
                if k not in section.__dataclass_fields__:
                    raise ConfigError(f"unknown config key {key}.{k}")
                setattr(section, k, _coerce(getattr(section, k), v, f"{key}.{k}"))
        else:
            raise ConfigError(f"unknown config key {key!r}")


def load_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> PipelineConfig:
    """Build a config from defaults, an optional YAML file, and --set overrides."""
    config = PipelineConfig()
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        _apply(config, data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        value = yaml.safe_load(raw)
        if len(parts) == 1 and parts[0] == "seed":
            config.seed = int(value)
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            _apply(config, {parts[0]: {parts[1]: value}})
        else:
            raise ConfigError(f"unknown override key {dotted!r}")
    if seed is not None:
        config.seed = seed
    # the model seed follows the pipeline seed unless set explicitly
    if config.xalign.seed == 0 and config.seed != 0:
        config.xalign.seed = config.seed
    config.validate()
    return config
