"""Corpus data model: sub-sentences, documents, notes, grades, splitting."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import CorpusError, InvalidInputError, InvalidSplitError, MissingLabelError

SCORE_RANGE = (65.0, 100.0)

# Half-open class thresholds covering all reals; integer scores land in the
# advertised ranges (A above 91, B 81-90, C 71-80, F below 70).
_CLASS_THRESHOLDS = ((90.5, "A"), (80.5, "B"), (70.5, "C"))


class GradeClass(Enum):
    A = "A"
    B = "B"
    C = "C"
    F = "F"

    @property
    def rank(self) -> int:
        """Ordering F < C < B < A."""
        return {"F": 0, "C": 1, "B": 2, "A": 3}[self.value]


@dataclass(frozen=True)
class SubSentence:
    id: int
    text: str
    embedding: np.ndarray  # float32, length D
    source: str  # "sensitive" | "reference"

    def __post_init__(self):
        if not self.text:
            raise CorpusError("sub-sentence text must be non-empty")
        if self.source not in ("sensitive", "reference"):
            raise CorpusError(f"bad sub-sentence source {self.source!r}")


@dataclass(frozen=True)
class SensitiveDocument:
    doc_id: str
    person_id: str
    sub_sentences: tuple[SubSentence, ...]

    def __post_init__(self):
        if len(self.sub_sentences) == 0:
            raise CorpusError(f"document {self.doc_id} has no sub-sentences")
        if any(ss.source != "sensitive" for ss in self.sub_sentences):
            raise CorpusError(f"document {self.doc_id} contains non-sensitive sub-sentences")


@dataclass(frozen=True)
class ReferenceNote:
    person_id: str
    expert_id: str
    sub_sentences: tuple[SubSentence, ...]
    grade_score: float | None = None

    def __post_init__(self):
        if len(self.sub_sentences) == 0:
            raise CorpusError(f"note {self.person_id}/{self.expert_id} has no sub-sentences")
        if any(ss.source != "reference" for ss in self.sub_sentences):
            raise CorpusError("note contains non-reference sub-sentences")
        if self.grade_score is not None:
            lo, hi = SCORE_RANGE
            if not (lo <= self.grade_score <= hi):
                raise CorpusError(f"grade score {self.grade_score} outside [{lo},{hi}]")


@dataclass
class EmbeddedCorpus:
    dimension: int
    documents: list[SensitiveDocument]
    notes: list[ReferenceNote]
    labels: dict[str, GradeClass]
    # Synthetic corpora carry ground truth: (doc_id, sub-sentence id) -> bool.
    planted_truth: dict[tuple[str, int], bool] | None = None
    score_range: tuple[float, float] = SCORE_RANGE

    def validate(self) -> None:
        if self.dimension <= 0:
            raise CorpusError("dimension must be positive")
        by_person = {}
        for doc in self.documents:
            if doc.person_id in by_person:
                raise CorpusError(f"person {doc.person_id} owns more than one document")
            by_person[doc.person_id] = doc
        for note in self.notes:
            if note.person_id not in by_person:
                raise CorpusError(f"note for unknown person {note.person_id}")
        for person_id in self.labels:
            if person_id not in by_person:
                raise CorpusError(f"label for unknown person {person_id}")
        for doc in self.documents:
            for ss in doc.sub_sentences:
                if ss.embedding.shape != (self.dimension,):
                    raise CorpusError(
                        f"embedding of {doc.doc_id}#{ss.id} has length "
                        f"{ss.embedding.shape[0]}, corpus declares {self.dimension}"
                    )
        for note in self.notes:
            for ss in note.sub_sentences:
                if ss.embedding.shape != (self.dimension,):
                    raise CorpusError("note embedding length differs from corpus dimension")

    @property
    def person_ids(self) -> list[str]:
        return [doc.person_id for doc in self.documents]

    def document_of(self, person_id: str) -> SensitiveDocument:
        for doc in self.documents:
            if doc.person_id == person_id:
                return doc
        raise CorpusError(f"no document for person {person_id}")

    def notes_of(self, person_id: str) -> list[ReferenceNote]:
        return [n for n in self.notes if n.person_id == person_id]

    def total_sub_sentences(self) -> int:
        return sum(len(d.sub_sentences) for d in self.documents)


def grade_to_class(score: float) -> GradeClass:
    """Map a numeric grade score onto the 4 ordered classes."""
    if not math.isfinite(score):
        raise InvalidInputError(f"grade score must be finite, got {score!r}")
    for threshold, name in _CLASS_THRESHOLDS:
        if score >= threshold:
            return GradeClass(name)
    return GradeClass.F


def aggregate_grades(notes: list[ReferenceNote]) -> GradeClass:
    """Single grade for one person: mean of all scored notes, then class mapping."""
    scores = [n.grade_score for n in notes if n.grade_score is not None]
    if not scores:
        raise MissingLabelError("no scored notes to aggregate")
    return grade_to_class(sum(scores) / len(scores))


def split_train_test(
    corpus: EmbeddedCorpus, test_fraction: float, seed: int
) -> tuple[EmbeddedCorpus, EmbeddedCorpus]:
    """Random partition by person: a person's document and notes stay together."""
    if not (0.0 < test_fraction < 1.0):
        raise InvalidSplitError(f"test fraction must be in (0,1), got {test_fraction}")
    persons = sorted(corpus.person_ids)
    n = len(persons)
    n_test = int(round(n * test_fraction))
    if n_test <= 0 or n_test >= n:
        raise InvalidSplitError(f"fraction {test_fraction} leaves an empty side for {n} persons")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    test_set = {persons[i] for i in order[:n_test]}
    return _subset(corpus, [p for p in persons if p not in test_set]), _subset(
        corpus, [p for p in persons if p in test_set]
    )


def _subset(corpus: EmbeddedCorpus, persons: list[str]) -> EmbeddedCorpus:
    keep = set(persons)
    docs = [d for d in corpus.documents if d.person_id in keep]
    planted = None
    if corpus.planted_truth is not None:
        doc_ids = {d.doc_id for d in docs}
        planted = {k: v for k, v in corpus.planted_truth.items() if k[0] in doc_ids}
    sub = EmbeddedCorpus(
        dimension=corpus.dimension,
        documents=docs,
        notes=[n for n in corpus.notes if n.person_id in keep],
        labels={p: c for p, c in corpus.labels.items() if p in keep},
        planted_truth=planted,
        score_range=corpus.score_range,
    )
    sub.validate()
    return sub


def fallback_encode(text: str, dimension: int, seed: int) -> np.ndarray:
    """Deterministic embedding from hashed character n-grams, L2-normalized.

    Pure function of (text, dimension, seed); lets the engine run on raw text
    when no sentence encoder is attached.
    """
    if dimension <= 0:
        raise InvalidInputError("dimension must be positive")
    vec = np.zeros(dimension, dtype=np.float64)
    salt = seed.to_bytes(8, "little", signed=True)
    padded = f"\x02{text}\x03"
    for n in (1, 2, 3):
        for i in range(len(padded) - n + 1):
            gram = padded[i : i + n].encode("utf-8")
            digest = hashlib.blake2b(gram, digest_size=16, salt=salt).digest()
            bucket = int.from_bytes(digest[:8], "little") % dimension
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return (vec / norm).astype(np.float32)
