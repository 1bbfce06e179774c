"""Read raw person records, chunk and embed them, and write `.aspcorp.jsonl`.

The output follows the corpus file format consumed by the de-identification
engine: JSON Lines with record kinds `header`, `document`, `note`, `label`;
embeddings as base64 little-endian float32; grade classes mapped from scores
with the format's half-open thresholds (A from 90.5, B from 80.5, C from
70.5, F below). The export is validated before the file is moved into place.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chunker import DEFAULT_MIN_MERGE_LEN, NextSentencePredictor, chunk_and_merge
from .encoders import SentenceEncoder

FORMAT_VERSION = 1
SCORE_RANGE = (65.0, 100.0)
_GRADE_THRESHOLDS = ((90.5, "A"), (80.5, "B"), (70.5, "C"))


class ExportError(RuntimeError):
    pass


@dataclass
class RawNote:
    expert_id: str
    text: str
    grade_score: float | None = None


@dataclass
class RawRecord:
    person_id: str
    doc: str
    notes: list[RawNote] = field(default_factory=list)

    def __post_init__(self):
        if not self.doc or not self.doc.strip():
            raise ExportError(f"record {self.person_id!r} has empty document text")


def read_raw_records(path: str | Path) -> list[RawRecord]:
    """Raw input: JSON Lines of {person_id, doc, notes: [{expert_id, text, grade_score}]}."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{line_no}: bad JSON ({exc})") from exc
            records.append(
                RawRecord(
                    person_id=obj["person_id"],
                    doc=obj["doc"],
                    notes=[
                        RawNote(
                            expert_id=n["expert_id"],
                            text=n["text"],
                            grade_score=n.get("grade_score"),
                        )
                        for n in obj.get("notes", [])
                    ],
                )
            )
    if not records:
        raise ExportError(f"{path}: no records")
    return records


def grade_class(score: float) -> str:
    for threshold, name in _GRADE_THRESHOLDS:
        if score >= threshold:
            return name
    return "F"


def _embed(texts: list[str], encoder: SentenceEncoder) -> list[str]:
    vectors = encoder.encode(texts)
    if vectors.shape != (len(texts), encoder.dim):
        raise ExportError(
            f"encoder {encoder.name!r} returned shape {vectors.shape}, "
            f"declared dimension {encoder.dim}"
        )
    return [
        base64.b64encode(np.ascontiguousarray(v, dtype="<f4").tobytes()).decode("ascii")
        for v in vectors
    ]


def _subs_json(texts: list[str], encoder: SentenceEncoder) -> list[dict]:
    return [
        {"id": i, "text": t, "embedding": e}
        for i, (t, e) in enumerate(zip(texts, _embed(texts, encoder)))
    ]


def validate_export(path: Path, dim: int) -> None:
    """Re-read the written file and check the format invariants."""
    persons = set()
    note_persons = []
    saw_header = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            kind = rec["kind"]
            if kind == "header":
                saw_header = True
                if rec["dimension"] != dim or rec["version"] != FORMAT_VERSION:
                    raise ExportError("header does not match the export parameters")
            elif kind in ("document", "note"):
                subs = rec["sub_sentences"]
                if not subs:
                    raise ExportError(f"{kind} record with no sub-sentences")
                for ss in subs:
                    if not ss["text"]:
                        raise ExportError("empty sub-sentence text")
                    raw = base64.b64decode(ss["embedding"])
                    if len(raw) != 4 * dim:
                        raise ExportError("embedding length mismatch")
                if kind == "document":
                    if rec["person_id"] in persons:
                        raise ExportError(f"duplicate person {rec['person_id']}")
                    persons.add(rec["person_id"])
                else:
                    note_persons.append(rec["person_id"])
            elif kind == "label":
                note_persons.append(rec["person_id"])
            else:
                raise ExportError(f"unknown record kind {kind!r}")
    if not saw_header:
        raise ExportError("missing header record")
    missing = [p for p in note_persons if p not in persons]
    if missing:
        raise ExportError(f"notes or labels reference unknown persons: {missing[:3]}")


def encode_and_export(
    records: list[RawRecord],
    encoder: SentenceEncoder,
    out_path: str | Path,
    predictor: NextSentencePredictor | None = None,
    min_merge_len: int = DEFAULT_MIN_MERGE_LEN,
) -> dict:
    """Write the corpus file; returns export statistics.

    The file is written to a temporary name, validated against the format,
    and only then moved to `out_path` (the completion marker).
    """
    out_path = Path(out_path)
    tmp = out_path.with_name(out_path.name + ".part")
    strategies = set()
    n_doc_subs = 0
    n_note_subs = 0
    try:
        _write_export(tmp, records, encoder, predictor, min_merge_len, strategies)
        validate_export(tmp, encoder.dim)
    except Exception:
        tmp.unlink(missing_ok=True)
        raise
    os.replace(tmp, out_path)
    n_doc_subs, n_note_subs = _count_subs(out_path)
    return {
        "persons": len(records),
        "document_sub_sentences": n_doc_subs,
        "note_sub_sentences": n_note_subs,
        "dimension": encoder.dim,
        "encoder": encoder.name,
        "merge_strategies": sorted(strategies),
    }


def _count_subs(path: Path) -> tuple[int, int]:
    docs = notes = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "document":
                docs += len(rec["sub_sentences"])
            elif rec["kind"] == "note":
                notes += len(rec["sub_sentences"])
    return docs, notes


def _write_export(
    tmp: Path,
    records: list[RawRecord],
    encoder: SentenceEncoder,
    predictor: NextSentencePredictor | None,
    min_merge_len: int,
    strategies: set,
) -> None:
    with open(tmp, "w", encoding="utf-8") as fh:
        header = {
            "kind": "header",
            "version": FORMAT_VERSION,
            "dimension": encoder.dim,
            "score_range": list(SCORE_RANGE),
        }
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        labels = []
        note_lines = []
        for rec in records:
            doc_texts, strategy = chunk_and_merge(rec.doc, predictor, min_merge_len)
            strategies.add(strategy)
            if not doc_texts:
                raise ExportError(f"document of {rec.person_id!r} chunked to nothing")
            doc = {
                "kind": "document",
                "doc_id": f"doc-{rec.person_id}",
                "person_id": rec.person_id,
                "sub_sentences": _subs_json(doc_texts, encoder),
            }
            fh.write(json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n")
            scores = []
            for note in rec.notes:
                note_texts, strategy = chunk_and_merge(note.text, predictor, min_merge_len)
                strategies.add(strategy)
                if not note_texts:
                    continue
                score = None
                if note.grade_score is not None:
                    score = float(np.clip(note.grade_score, *SCORE_RANGE))
                    scores.append(score)
                note_lines.append(
                    json.dumps(
                        {
                            "kind": "note",
                            "person_id": rec.person_id,
                            "expert_id": note.expert_id,
                            "grade_score": score,
                            "sub_sentences": _subs_json(note_texts, encoder),
                        },
                        separators=(",", ":"),
                        ensure_ascii=False,
                    )
                )
            if scores:
                labels.append((rec.person_id, grade_class(sum(scores) / len(scores))))
        for line in note_lines:
            fh.write(line + "\n")
        for person_id, grade in sorted(labels):
            fh.write(
                json.dumps(
                    {"kind": "label", "person_id": person_id, "grade": grade},
                    separators=(",", ":"),
                )
                + "\n"
            )
