"""Corpus ingestion: punctuation chunking, next-sentence merging, embedding."""

from .chunker import chunk_and_merge, load_nsp_predictor, merge_chunks, split_chunks
from .encoders import (
    DEFAULT_MODEL,
    EncoderUnavailable,
    HashEncoder,
    SbertEncoder,
    get_encoder,
)
from .export import (
    ExportError,
    RawNote,
    RawRecord,
    encode_and_export,
    grade_class,
    read_raw_records,
    validate_export,
)

__all__ = [
    "DEFAULT_MODEL",
    "EncoderUnavailable",
    "ExportError",
    "HashEncoder",
    "RawNote",
    "RawRecord",
    "SbertEncoder",
    "chunk_and_merge",
    "encode_and_export",
    "get_encoder",
    "grade_class",
    "load_nsp_predictor",
    "merge_chunks",
    "read_raw_records",
    "split_chunks",
    "validate_export",
]
