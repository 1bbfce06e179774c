"""Sentence encoders behind one small interface."""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

DEFAULT_MODEL = "sentence-transformers/paraphrase-multilingual-MiniLM-L12-v2"


class EncoderUnavailable(RuntimeError):
    pass


class SentenceEncoder(Protocol):
    name: str
    dim: int

    def encode(self, texts: list[str]) -> np.ndarray: ...


class HashEncoder:
    """Deterministic offline encoder: hashed character n-grams, L2-normalized.

    Not semantic, but fixed-dimension and reproducible, which is enough to
    exercise the corpus format and downstream machinery without model files.
    """

    def __init__(self, dim: int = 384, seed: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.name = f"hash://{dim}?seed={seed}"

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        salt = self.seed.to_bytes(8, "little", signed=True)
        for row, text in enumerate(texts):
            vec = np.zeros(self.dim, dtype=np.float64)
            padded = f"\x02{text}\x03"
            for n in (1, 2, 3):
                for i in range(len(padded) - n + 1):
                    digest = hashlib.blake2b(
                        padded[i : i + n].encode("utf-8"), digest_size=16, salt=salt
                    ).digest()
                    bucket = int.from_bytes(digest[:8], "little") % self.dim
                    vec[bucket] += 1.0 if digest[8] & 1 else -1.0
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                vec[0] = 1.0
                norm = 1.0
            out[row] = (vec / norm).astype(np.float32)
        return out


class SbertEncoder:
    """sentence-transformers wrapper (multilingual models supported)."""

    def __init__(self, model_name: str = DEFAULT_MODEL):
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderUnavailable(f"cannot load encoder {model_name!r}: {exc}") from exc
        self.name = model_name
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(texts, show_progress_bar=False), dtype=np.float32
        )


def get_encoder(model_name: str) -> SentenceEncoder:
    """`hash://<dim>[?seed=<n>]` for the offline encoder, else a model name."""
    if model_name.startswith("hash://"):
        spec = model_name[len("hash://") :]
        seed = 0
        if "?seed=" in spec:
            spec, seed_part = spec.split("?seed=", 1)
            seed = int(seed_part)
        return HashEncoder(dim=int(spec), seed=seed)
    return SbertEncoder(model_name)
