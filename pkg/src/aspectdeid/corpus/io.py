"""Corpus file I/O: the `.aspcorp.jsonl` format.

One JSON record per line. Record kinds: `header`, `document`, `note`, `label`.
Embeddings travel as base64-encoded little-endian IEEE-754 32-bit floats so a
save/load round trip is bit-exact. Synthetic ground truth rides on document
records as the list of planted sub-sentence ids.
"""

from __future__ import annotations

import base64
import json
import os
from pathlib import Path

import numpy as np

from ..errors import CorpusError
from .model import (
    EmbeddedCorpus,
    GradeClass,
    ReferenceNote,
    SensitiveDocument,
    SubSentence,
)

FORMAT_VERSION = 1


def encode_embedding(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f4").tobytes()).decode("ascii")


def decode_embedding(data: str, dimension: int) -> np.ndarray:
    raw = base64.b64decode(data.encode("ascii"))
    vec = np.frombuffer(raw, dtype="<f4").copy()
    if vec.shape != (dimension,):
        raise CorpusError(f"embedding has {vec.shape[0]} floats, header declares {dimension}")
    return vec


def _sub_to_json(ss: SubSentence) -> dict:
    return {"id": ss.id, "text": ss.text, "embedding": encode_embedding(ss.embedding)}


def _sub_from_json(obj: dict, dimension: int, source: str) -> SubSentence:
    return SubSentence(
        id=int(obj["id"]),
        text=obj["text"],
        embedding=decode_embedding(obj["embedding"], dimension),
        source=source,
    )


def save_corpus(corpus: EmbeddedCorpus, path: str | Path) -> None:
    corpus.validate()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header",
            "version": FORMAT_VERSION,
            "dimension": corpus.dimension,
            "score_range": list(corpus.score_range),
        }
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for doc in corpus.documents:
            rec = {
                "kind": "document",
                "doc_id": doc.doc_id,
                "person_id": doc.person_id,
                "sub_sentences": [_sub_to_json(ss) for ss in doc.sub_sentences],
            }
            if corpus.planted_truth is not None:
                rec["planted"] = [
                    ss.id
                    for ss in doc.sub_sentences
                    if corpus.planted_truth.get((doc.doc_id, ss.id), False)
                ]
            fh.write(json.dumps(rec, separators=(",", ":"), ensure_ascii=False) + "\n")
        for note in corpus.notes:
            rec = {
                "kind": "note",
                "person_id": note.person_id,
                "expert_id": note.expert_id,
                "grade_score": note.grade_score,
                "sub_sentences": [_sub_to_json(ss) for ss in note.sub_sentences],
            }
            fh.write(json.dumps(rec, separators=(",", ":"), ensure_ascii=False) + "\n")
        for person_id in sorted(corpus.labels):
            rec = {"kind": "label", "person_id": person_id, "grade": corpus.labels[person_id].value}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    os.replace(tmp, path)


def load_corpus(path: str | Path) -> EmbeddedCorpus:
    documents: list[SensitiveDocument] = []
    notes: list[ReferenceNote] = []
    labels: dict[str, GradeClass] = {}
    planted: dict[tuple[str, int], bool] = {}
    saw_planted = False
    dimension = None
    score_range = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{line_no}: bad JSON ({exc})") from exc
            kind = rec.get("kind")
            if kind == "header":
                if rec.get("version") != FORMAT_VERSION:
                    raise CorpusError(f"unsupported corpus version {rec.get('version')}")
                dimension = int(rec["dimension"])
                score_range = tuple(float(x) for x in rec["score_range"])
            elif kind == "document":
                if dimension is None:
                    raise CorpusError("document record before header")
                doc = SensitiveDocument(
                    doc_id=rec["doc_id"],
                    person_id=rec["person_id"],
                    sub_sentences=tuple(
                        _sub_from_json(o, dimension, "sensitive") for o in rec["sub_sentences"]
                    ),
                )
                documents.append(doc)
                if "planted" in rec:
                    saw_planted = True
                    truth_ids = set(rec["planted"])
                    for ss in doc.sub_sentences:
                        planted[(doc.doc_id, ss.id)] = ss.id in truth_ids
            elif kind == "note":
                if dimension is None:
                    raise CorpusError("note record before header")
                notes.append(
                    ReferenceNote(
                        person_id=rec["person_id"],
                        expert_id=rec["expert_id"],
                        grade_score=rec.get("grade_score"),
                        sub_sentences=tuple(
                            _sub_from_json(o, dimension, "reference") for o in rec["sub_sentences"]
                        ),
                    )
                )
            elif kind == "label":
                labels[rec["person_id"]] = GradeClass(rec["grade"])
            else:
                raise CorpusError(f"{path}:{line_no}: unknown record kind {kind!r}")
    if dimension is None:
        raise CorpusError(f"{path}: missing header record")
    corpus = EmbeddedCorpus(
        dimension=dimension,
        documents=documents,
        notes=notes,
        labels=labels,
        planted_truth=planted if saw_planted else None,
        score_range=score_range,
    )
    corpus.validate()
    return corpus
