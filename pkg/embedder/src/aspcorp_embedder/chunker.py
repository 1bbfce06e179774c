"""Sub-sentence chunking: split on punctuation, merge with a next-sentence
predictor (or a length-threshold fallback when no predictor is available)."""

from __future__ import annotations

import re
from typing import Callable, Protocol

# Sub-sentence boundaries: Latin and CJK sentence-final and clause punctuation.
_SPLIT_RE = re.compile(r"([。．.!！?？;；,，、:：…\n]+)")

DEFAULT_MIN_MERGE_LEN = 8


class NextSentencePredictor(Protocol):
    def __call__(self, first: str, second: str) -> int:
        """1 when `second` should continue `first`, else 0."""


def split_chunks(text: str) -> list[str]:
    """Raw punctuation chunks, each keeping its trailing punctuation."""
    parts = _SPLIT_RE.split(text)
    chunks = []
    for i in range(0, len(parts), 2):
        body = parts[i]
        punct = parts[i + 1] if i + 1 < len(parts) else ""
        merged = (body + punct).strip()
        if body.strip():
            chunks.append(merged)
    return chunks


def merge_chunks(
    chunks: list[str],
    predictor: NextSentencePredictor | None,
    min_len: int = DEFAULT_MIN_MERGE_LEN,
) -> tuple[list[str], str]:
    """Merge adjacent chunks; returns (merged chunks, strategy flag).

    With a predictor, chunk i+1 joins chunk i exactly when the predictor
    labels the pair 1. Without one, chunks shorter than `min_len` characters
    merge into the following chunk (the last short chunk merges backward).
    """
    if not chunks:
        return [], "none"
    if predictor is not None:
        merged = [chunks[0]]
        for nxt in chunks[1:]:
            if predictor(merged[-1], nxt) == 1:
                merged[-1] = merged[-1] + nxt
            else:
                merged.append(nxt)
        return merged, "nsp"
    merged = []
    carry = ""
    for chunk in chunks:
        candidate = carry + chunk
        if len(candidate) < min_len:
            carry = candidate
        else:
            merged.append(candidate)
            carry = ""
    if carry:
        if merged:
            merged[-1] = merged[-1] + carry
        else:
            merged = [carry]
    return merged, "length-fallback"


def chunk_and_merge(
    text: str,
    predictor: NextSentencePredictor | None = None,
    min_len: int = DEFAULT_MIN_MERGE_LEN,
) -> tuple[list[str], str]:
    """Split a document into sub-sentences. Returns (chunks, merge strategy)."""
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    return merge_chunks(split_chunks(text), predictor, min_len)


def load_nsp_predictor(model_name: str) -> Callable[[str, str], int] | None:
    """Next-sentence predictor from a pretrained model; None when unavailable."""
    try:
        import torch
        from transformers import AutoTokenizer, BertForNextSentencePrediction

        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = BertForNextSentencePrediction.from_pretrained(model_name)
        model.eval()
    except Exception:
        return None

    def predict(first: str, second: str) -> int:
        with torch.no_grad():
            inputs = tokenizer(first, second, return_tensors="pt", truncation=True)
            logits = model(**inputs).logits[0]
        # label 0 = "is next sentence" in the pretraining convention
        return 1 if int(logits.argmax()) == 0 else 0

    return predict
