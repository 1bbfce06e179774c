"""Corpus data model, file I/O, grade handling, splitting, and synthesis."""

from .io import decode_embedding, encode_embedding, load_corpus, save_corpus
from .model import (
    SCORE_RANGE,
    EmbeddedCorpus,
    GradeClass,
    ReferenceNote,
    SensitiveDocument,
    SubSentence,
    aggregate_grades,
    fallback_encode,
    grade_to_class,
    split_train_test,
)
from .synth import synthesize_corpus

__all__ = [
    "SCORE_RANGE",
    "EmbeddedCorpus",
    "GradeClass",
    "ReferenceNote",
    "SensitiveDocument",
    "SubSentence",
    "aggregate_grades",
    "decode_embedding",
    "encode_embedding",
    "fallback_encode",
    "grade_to_class",
    "load_corpus",
    "save_corpus",
    "split_train_test",
    "synthesize_corpus",
]
