"""Aspect sub-sentence extraction from inference-time attention scores.

The aspect-query CAS (t rows, one per aspect token; k_len columns, one per
sub-sentence) is standardized per aspect row along the document, binarized at
the attention threshold, and reduced over aspects with a consensus count to
decide which sub-sentences to keep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddedCorpus, GradeClass, SensitiveDocument
from .errors import DegenerateDocumentError, InvalidInputError
from .xalign import XAlignConfig, XAlignParams, forward_pass

_GRADE_BY_RANK = {0: GradeClass.F, 1: GradeClass.C, 2: GradeClass.B, 3: GradeClass.A}


@dataclass(frozen=True)
class AspectLabels:
    """Per-sub-sentence aspect bit vector (one bit per aspect token)."""

    bits: np.ndarray  # bool, length t

    def __post_init__(self):
        if self.bits.dtype != np.bool_ or self.bits.ndim != 1:
            raise InvalidInputError("aspect labels must be a 1-d boolean vector")

    def as_int(self) -> int:
        value = 0
        for i, bit in enumerate(self.bits):
            if bit:
                value |= 1 << i
        return value

    def as_hex(self) -> str:
        return format(self.as_int(), "x")

    @classmethod
    def from_int(cls, value: int, t: int) -> "AspectLabels":
        return cls(bits=np.array([(value >> i) & 1 == 1 for i in range(t)], dtype=bool))


@dataclass(frozen=True)
class KeptSubSentence:
    sub_id: int
    labels: AspectLabels
    ars: float


@dataclass(frozen=True)
class ExtractionResult:
    doc_id: str
    person_id: str
    kept: tuple[KeptSubSentence, ...]
    predicted_class: GradeClass
    extraction_ratio: float
    doc_length: int

    def kept_ids(self) -> list[int]:
        return [k.sub_id for k in self.kept]


def standardize_and_binarize(cas: np.ndarray, alpha: float) -> np.ndarray:
    """Z-score each aspect row over the sub-sentences and threshold at alpha.

    Rows with zero variance carry no selection signal and yield all-false.
    Population (not sample) standard deviation, so alpha is comparable
    across documents and runs.
    """
    cas = np.asarray(cas, dtype=np.float64)
    if cas.ndim != 2:
        raise InvalidInputError("CAS must be 2-d")
    if cas.shape[1] < 2:
        raise DegenerateDocumentError("standardization needs at least 2 sub-sentences")
    mean = cas.mean(axis=1, keepdims=True)
    std = cas.std(axis=1, keepdims=True)
    bits = np.zeros(cas.shape, dtype=bool)
    nonzero = std[:, 0] > 0.0
    z = (cas[nonzero] - mean[nonzero]) / std[nonzero]
    bits[nonzero] = z >= alpha
    return bits


def extraction_mask(bits: np.ndarray, beta: int) -> np.ndarray:
    """Keep sub-sentences whose aspect consensus count reaches beta."""
    bits = np.asarray(bits, dtype=bool)
    if not (0 <= beta):
        raise InvalidInputError("beta must be non-negative")
    return bits.sum(axis=0) >= beta


def aspect_relevance_score(cas: np.ndarray, sub_index: int) -> float:
    """Mean raw (pre-standardization) CAS over all aspect rows for one column."""
    cas = np.asarray(cas, dtype=np.float64)
    if not (0 <= sub_index < cas.shape[1]):
        raise InvalidInputError(f"sub-sentence index {sub_index} out of range")
    return float(cas[:, sub_index].mean())


def aspect_relevance_scores(cas: np.ndarray) -> np.ndarray:
    """All column means at once."""
    return np.asarray(cas, dtype=np.float64).mean(axis=0)


def extract_document(
    document: SensitiveDocument,
    params: XAlignParams,
    config: XAlignConfig,
    alpha: float,
    beta: int,
) -> ExtractionResult:
    """Run the aspect-query pass in inference mode and apply both thresholds."""
    result = forward_pass(
        "aspect", None, document, params, config, mode="infer", require_trained=True
    )
    cas = result.cas.scores  # (t, k_len)
    bits = standardize_and_binarize(cas, alpha)
    mask = extraction_mask(bits, beta)
    ars = aspect_relevance_scores(cas)
    kept = tuple(
        KeptSubSentence(
            sub_id=document.sub_sentences[j].id,
            labels=AspectLabels(bits=bits[:, j].copy()),
            ars=float(ars[j]),
        )
        for j in range(cas.shape[1])
        if mask[j]
    )
    if result.logits is not None:
        predicted = _GRADE_BY_RANK[int(np.argmax(result.logits))]
    else:
        predicted = GradeClass.F
    return ExtractionResult(
        doc_id=document.doc_id,
        person_id=document.person_id,
        kept=kept,
        predicted_class=predicted,
        extraction_ratio=len(kept) / cas.shape[1],
        doc_length=cas.shape[1],
    )


def extract_corpus(
    corpus: EmbeddedCorpus,
    params: XAlignParams,
    config: XAlignConfig,
    alpha: float,
    beta: int,
) -> list[ExtractionResult]:
    return [extract_document(doc, params, config, alpha, beta) for doc in corpus.documents]


@dataclass(frozen=True)
class ExtractionScore:
    precision: float
    recall: float
    f1: float
    mean_extraction_ratio: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    averaging: str = "micro"

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mean_extraction_ratio": self.mean_extraction_ratio,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "averaging": self.averaging,
        }


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # Empty prediction sets score zero precision rather than undefined.
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def score_extraction(
    results: list[ExtractionResult],
    truth: dict[tuple[str, int], bool],
    doc_lengths: dict[str, list[int]] | None = None,
) -> ExtractionScore:
    """Precision/recall/F1 of kept sub-sentences against ground truth.

    Micro-averaged over all sub-sentence decisions (primary), with macro
    (per-document mean) reported alongside. `truth` must cover every scored
    document. When results come from a filtered corpus, pass the original
    per-document sub-sentence id lists so recall counts dropped positives.
    """
    tp = fp = fn = 0
    per_doc = []
    ratios = []
    for res in results:
        doc_truth = {sid: flag for (doc_id, sid), flag in truth.items() if doc_id == res.doc_id}
        if not doc_truth:
            raise InvalidInputError(f"no ground truth for document {res.doc_id}")
        all_ids = doc_lengths[res.doc_id] if doc_lengths else sorted(doc_truth)
        kept = set(res.kept_ids())
        dtp = dfp = dfn = 0
        for sid in all_ids:
            is_true = doc_truth.get(sid, False)
            is_kept = sid in kept
            if is_kept and is_true:
                dtp += 1
            elif is_kept:
                dfp += 1
            elif is_true:
                dfn += 1
        tp, fp, fn = tp + dtp, fp + dfp, fn + dfn
        per_doc.append(_prf(dtp, dfp, dfn))
        ratios.append(len(kept) / len(all_ids))
    p, r, f1 = _prf(tp, fp, fn)
    macro = np.mean(per_doc, axis=0) if per_doc else (0.0, 0.0, 0.0)
    return ExtractionScore(
        precision=p,
        recall=r,
        f1=f1,
        mean_extraction_ratio=float(np.mean(ratios)) if ratios else 0.0,
        macro_precision=float(macro[0]),
        macro_recall=float(macro[1]),
        macro_f1=float(macro[2]),
    )
