"""Aspect sub-sentence pool and k-anonymity substitution.

Extracted sub-sentences from the training corpus form an indexed pool keyed
by (predicted grade class, aspect bit vector). De-identification replaces
each extracted sub-sentence of a document with one sampled from pool entries
whose bits lie within the smallest hamming radius at which the candidates
span at least k-1 distinct other persons.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import EmbeddedCorpus, GradeClass, SensitiveDocument, SubSentence
from .errors import (
    AnonymityInfeasibleError,
    ArtifactError,
    ArtifactVersionError,
    InvalidInputError,
)
from .extraction import AspectLabels, ExtractionResult, extract_corpus
from .xalign import XAlignConfig, XAlignParams

_POOL_MAGIC = b"ASPPOOL1"
_POOL_VERSION = 1


@dataclass(frozen=True)
class PoolEntry:
    doc_id: str
    sub_id: int
    person_id: str
    text: str
    embedding: np.ndarray
    bits: AspectLabels
    predicted_class: GradeClass


@dataclass
class AspectPool:
    entries: list[PoolEntry]
    t: int

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.doc_id, e.sub_id)
            if key in seen:
                raise InvalidInputError(f"duplicate pool entry {key}")
            seen.add(key)
            if e.bits.bits.shape != (self.t,):
                raise InvalidInputError("pool entry bit width differs from pool t")
        self._bit_ints = np.array([e.bits.as_int() for e in self.entries], dtype=np.int64)
        self._persons = [e.person_id for e in self.entries]
        self._classes = [e.predicted_class for e in self.entries]
        self.index: dict[tuple[str, int], list[int]] = {}
        for i, e in enumerate(self.entries):
            self.index.setdefault((e.predicted_class.value, int(self._bit_ints[i])), []).append(i)

    def __len__(self) -> int:
        return len(self.entries)

    def hamming_distances(self, bits: AspectLabels) -> np.ndarray:
        query = bits.as_int()
        return np.array(
            [int(x).bit_count() for x in np.bitwise_xor(self._bit_ints, query)],
            dtype=np.int64,
        )

    def eligible(self, owner: str, class_filter: GradeClass | None) -> np.ndarray:
        ok = np.array([p != owner for p in self._persons])
        if class_filter is not None:
            ok &= np.array([c == class_filter for c in self._classes])
        return ok


def build_pool_from_results(
    corpus: EmbeddedCorpus, results: list[ExtractionResult], t: int
) -> AspectPool:
    """One pool entry per kept sub-sentence, in corpus order."""
    subs = {
        (doc.doc_id, ss.id): (doc.person_id, ss)
        for doc in corpus.documents
        for ss in doc.sub_sentences
    }
    entries = []
    for res in results:
        for kept in res.kept:
            person_id, ss = subs[(res.doc_id, kept.sub_id)]
            entries.append(
                PoolEntry(
                    doc_id=res.doc_id,
                    sub_id=kept.sub_id,
                    person_id=person_id,
                    text=ss.text,
                    embedding=ss.embedding,
                    bits=kept.labels,
                    predicted_class=res.predicted_class,
                )
            )
    if not entries:
        raise InvalidInputError("extraction kept nothing; cannot build a pool")
    return AspectPool(entries=entries, t=t)


def build_pool(
    corpus: EmbeddedCorpus,
    params: XAlignParams,
    config: XAlignConfig,
    alpha: float,
    beta: int,
) -> AspectPool:
    """Extract every document of the corpus and pool the kept sub-sentences."""
    results = extract_corpus(corpus, params, config, alpha, beta)
    return build_pool_from_results(corpus, results, config.t)


def gather_candidates(
    pool: AspectPool,
    bits: AspectLabels,
    class_filter: GradeClass | None,
    owner: str,
    k: int,
) -> tuple[set[str], list[int], int]:
    """Smallest hamming radius whose candidates span >= k-1 other persons.

    Returns (person set Q, candidate entry indices at that radius, radius).
    """
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if len(pool) == 0:
        raise InvalidInputError("empty pool")
    dists = pool.hamming_distances(bits)
    ok = pool.eligible(owner, class_filter)
    persons_seen: set[str] = set()
    radius = None
    for r in range(pool.t + 1):
        at_r = ok & (dists == r)
        for i in np.flatnonzero(at_r):
            persons_seen.add(pool.entries[i].person_id)
        if len(persons_seen) >= k - 1:
            radius = r
            break
    if radius is None:
        raise AnonymityInfeasibleError(
            f"pool spans only {len(persons_seen)} other persons "
            f"(need {k - 1}) even at radius {pool.t}"
        )
    candidates = [int(i) for i in np.flatnonzero(ok & (dists <= radius))]
    q = {pool.entries[i].person_id for i in candidates}
    return q, candidates, radius


@dataclass(frozen=True)
class Replacement:
    sub_id: int
    bits_hex: str
    class_filter: str | None
    radius: int | None
    q_size: int
    relaxed: bool
    reused: bool
    entry_doc_id: str
    entry_sub_id: int
    entry_person_id: str

    def as_dict(self) -> dict:
        return {
            "sub_id": self.sub_id,
            "bits_hex": self.bits_hex,
            "class_filter": self.class_filter,
            "radius": self.radius,
            "q_size": self.q_size,
            "relaxed": self.relaxed,
            "reused": self.reused,
            "entry": {
                "doc_id": self.entry_doc_id,
                "sub_id": self.entry_sub_id,
                "person_id": self.entry_person_id,
            },
        }


@dataclass
class DeidentifiedSummary:
    doc_id: str
    person_id: str
    k: int
    strategy: str  # "aspect" | "random"
    replacements: list[Replacement]
    summary_text: str


def _doc_rng(seed: int, doc_id: str) -> np.random.Generator:
    digest = hashlib.sha256(doc_id.encode("utf-8")).digest()
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest[:8], "little")])
    )


def substitute_document(
    document: SensitiveDocument,
    extraction: ExtractionResult,
    pool: AspectPool,
    k: int,
    class_mode: str = "on",
    seed: int = 0,
) -> DeidentifiedSummary:
    """Replace each extracted sub-sentence, preserving original order.

    Sampling is person-first (uniform over Q, then uniform over that
    person's qualifying entries) so one prolific person cannot dominate.
    """
    if class_mode not in ("on", "off", "relax"):
        raise InvalidInputError(f"unknown class_mode {class_mode!r}")
    if extraction.doc_id != document.doc_id:
        raise InvalidInputError("extraction result belongs to a different document")
    rng = _doc_rng(seed, document.doc_id)
    replacements: list[Replacement] = []
    texts: list[str] = []
    used: set[tuple[str, int]] = set()
    for kept in sorted(extraction.kept, key=lambda x: x.sub_id):
        class_filter = extraction.predicted_class if class_mode != "off" else None
        relaxed = False
        try:
            q, candidates, radius = gather_candidates(
                pool, kept.labels, class_filter, document.person_id, k
            )
        except AnonymityInfeasibleError:
            if class_mode != "relax":
                raise
            class_filter = None
            relaxed = True
            q, candidates, radius = gather_candidates(
                pool, kept.labels, None, document.person_id, k
            )
        person = sorted(q)[rng.integers(len(q))]
        person_entries = sorted(
            (i for i in candidates if pool.entries[i].person_id == person),
            key=lambda i: (pool.entries[i].doc_id, pool.entries[i].sub_id),
        )
        choice = pool.entries[person_entries[rng.integers(len(person_entries))]]
        key = (choice.doc_id, choice.sub_id)
        replacements.append(
            Replacement(
                sub_id=kept.sub_id,
                bits_hex=kept.labels.as_hex(),
                class_filter=None if class_filter is None else class_filter.value,
                radius=radius,
                q_size=len(q),
                relaxed=relaxed,
                reused=key in used,
                entry_doc_id=choice.doc_id,
                entry_sub_id=choice.sub_id,
                entry_person_id=choice.person_id,
            )
        )
        used.add(key)
        texts.append(choice.text)
    return DeidentifiedSummary(
        doc_id=document.doc_id,
        person_id=document.person_id,
        k=k,
        strategy="aspect",
        replacements=replacements,
        summary_text=" ".join(texts),
    )


def random_substitute_document(
    document: SensitiveDocument,
    extraction: ExtractionResult,
    pool: AspectPool,
    seed: int = 0,
) -> DeidentifiedSummary:
    """Baseline: replace with a uniform random same-class pool entry
    (no aspect matching, no k-anonymity guarantee)."""
    rng = _doc_rng(seed, document.doc_id)
    eligible = [
        i
        for i, e in enumerate(pool.entries)
        if e.person_id != document.person_id and e.predicted_class == extraction.predicted_class
    ]
    if not eligible:
        eligible = [
            i for i, e in enumerate(pool.entries) if e.person_id != document.person_id
        ]
    if not eligible:
        raise AnonymityInfeasibleError("pool has no entries from other persons")
    q = {pool.entries[i].person_id for i in eligible}
    replacements = []
    texts = []
    used: set[tuple[str, int]] = set()
    for kept in sorted(extraction.kept, key=lambda x: x.sub_id):
        choice = pool.entries[eligible[rng.integers(len(eligible))]]
        key = (choice.doc_id, choice.sub_id)
        replacements.append(
            Replacement(
                sub_id=kept.sub_id,
                bits_hex=kept.labels.as_hex(),
                class_filter=extraction.predicted_class.value,
                radius=None,
                q_size=len(q),
                relaxed=False,
                reused=key in used,
                entry_doc_id=choice.doc_id,
                entry_sub_id=choice.sub_id,
                entry_person_id=choice.person_id,
            )
        )
        used.add(key)
        texts.append(choice.text)
    return DeidentifiedSummary(
        doc_id=document.doc_id,
        person_id=document.person_id,
        k=0,
        strategy="random",
        replacements=replacements,
        summary_text=" ".join(texts),
    )


def summaries_to_documents(
    summaries: list[DeidentifiedSummary], pool: AspectPool
) -> list[SensitiveDocument]:
    """Materialize de-identified summaries as documents for evaluation."""
    by_key = {(e.doc_id, e.sub_id): e for e in pool.entries}
    docs = []
    for summary in summaries:
        subs = []
        for i, rep in enumerate(summary.replacements):
            entry = by_key[(rep.entry_doc_id, rep.entry_sub_id)]
            subs.append(
                SubSentence(
                    id=i, text=entry.text, embedding=entry.embedding, source="sensitive"
                )
            )
        if not subs:
            continue
        docs.append(
            SensitiveDocument(
                doc_id=summary.doc_id, person_id=summary.person_id, sub_sentences=tuple(subs)
            )
        )
    return docs


# --------------------------------------------------------------------------
# Pool file I/O: binary entry table + JSON header, with a JSONL audit sidecar.


def save_pool(pool: AspectPool, path: str | Path, sidecar: str | Path | None = None) -> None:
    payload = b"".join(
        np.ascontiguousarray(e.embedding, dtype="<f4").tobytes() for e in pool.entries
    )
    header = {
        "version": _POOL_VERSION,
        "t": pool.t,
        "dimension": int(pool.entries[0].embedding.shape[0]),
        "count": len(pool.entries),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "entries": [
            {
                "doc_id": e.doc_id,
                "sub_id": e.sub_id,
                "person_id": e.person_id,
                "text": e.text,
                "bits_hex": e.bits.as_hex(),
                "class": e.predicted_class.value,
            }
            for e in pool.entries
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_POOL_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
    os.replace(tmp, path)
    if sidecar is not None:
        sidecar = Path(sidecar)
        tmp = sidecar.with_name(sidecar.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for rec in header["entries"]:
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        os.replace(tmp, sidecar)


def load_pool(path: str | Path) -> AspectPool:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"pool not found: {path}")
    with open(path, "rb") as fh:
        if fh.read(len(_POOL_MAGIC)) != _POOL_MAGIC:
            raise ArtifactVersionError(f"{path}: not a pool file")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        payload = fh.read()
    if header.get("version") != _POOL_VERSION:
        raise ArtifactVersionError(f"{path}: unsupported pool version")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ArtifactVersionError(f"{path}: payload hash mismatch")
    d = header["dimension"]
    entries = []
    for i, rec in enumerate(header["entries"]):
        emb = np.frombuffer(payload[i * 4 * d : (i + 1) * 4 * d], dtype="<f4").copy()
        entries.append(
            PoolEntry(
                doc_id=rec["doc_id"],
                sub_id=rec["sub_id"],
                person_id=rec["person_id"],
                text=rec["text"],
                embedding=emb,
                bits=AspectLabels.from_int(int(rec["bits_hex"], 16), header["t"]),
                predicted_class=GradeClass(rec["class"]),
            )
        )
    return AspectPool(entries=entries, t=header["t"])


def save_summaries(
    summaries: list[DeidentifiedSummary], path: str | Path, header_extra: dict | None = None
) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        header = {"kind": "header", "artifact": "summaries", "version": 1}
        header.update(header_extra or {})
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for s in summaries:
            rec = {
                "kind": "summary",
                "doc_id": s.doc_id,
                "person_id": s.person_id,
                "k": s.k,
                "strategy": s.strategy,
                "replacements": [r.as_dict() for r in s.replacements],
                "summary_text": s.summary_text,
            }
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def load_summaries(path: str | Path) -> list[DeidentifiedSummary]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"summaries not found: {path}")
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("kind") != "summary":
                continue
            out.append(
                DeidentifiedSummary(
                    doc_id=rec["doc_id"],
                    person_id=rec["person_id"],
                    k=rec["k"],
                    strategy=rec["strategy"],
                    replacements=[
                        Replacement(
                            sub_id=r["sub_id"],
                            bits_hex=r["bits_hex"],
                            class_filter=r["class_filter"],
                            radius=r["radius"],
                            q_size=r["q_size"],
                            relaxed=r["relaxed"],
                            reused=r["reused"],
                            entry_doc_id=r["entry"]["doc_id"],
                            entry_sub_id=r["entry"]["sub_id"],
                            entry_person_id=r["entry"]["person_id"],
                        )
                        for r in rec["replacements"]
                    ],
                    summary_text=rec["summary_text"],
                )
            )
    return out
