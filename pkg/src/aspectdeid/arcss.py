"""Aspect-relevant common sequence selection.

Fuses two per-document rankings of sub-sentences, attention relevance (ARS)
and literal similarity to the person's reference notes (LCSS), to pick
training samples for a relevant/non-relevant classifier, then filters
documents by predicted relevance. The whole select/train/filter loop can be
iterated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import EmbeddedCorpus, ReferenceNote, SensitiveDocument, SubSentence
from .errors import InvalidInputError
from .extraction import ExtractionResult, aspect_relevance_scores
from .linmodels import fit_binary_logistic, predict_binary_proba
from .xalign import XAlignConfig, XAlignParams, forward_pass


def lcs_length(s1: str, s2: str) -> int:
    """Longest common subsequence length over unicode scalars.

    Bit-parallel over Python big ints: one register bit per character of the
    longer string, one pass per character of the shorter string.
    """
    if len(s1) > len(s2):
        s1, s2 = s2, s1
    if not s1:
        return 0
    n = len(s2)
    masks: dict[str, int] = {}
    for j, ch in enumerate(s2):
        masks[ch] = masks.get(ch, 0) | (1 << j)
    full = (1 << n) - 1
    row = 0
    for ch in s1:
        x = row | masks.get(ch, 0)
        row = x & ~((x - ((row << 1) | 1)) & full)
    return row.bit_count()


def lcss(s1: str, s2: str) -> float:
    """LCS length divided by the longer string's length; two empties are 1."""
    if not s1 and not s2:
        return 1.0
    return lcs_length(s1, s2) / max(len(s1), len(s2))


@dataclass(frozen=True)
class RankedSubSentence:
    sub_id: int
    ars_rank: int
    lcss_rank: int

    @property
    def total_rank(self) -> int:
        return self.ars_rank + self.lcss_rank


def _ranks_desc(scores: list[float]) -> list[int]:
    """1-based ranks, highest score first; ties broken by sub-sentence order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    for rank, idx in enumerate(order, start=1):
        ranks[idx] = rank
    return ranks


def fuse_ranks(ars: list[float], lcss_scores: list[float]) -> list[RankedSubSentence]:
    """Rank both score lists, add the ranks, sort by total (ties by id)."""
    if len(ars) != len(lcss_scores):
        raise InvalidInputError("ARS and LCSS score lists must have equal length")
    ars_ranks = _ranks_desc(ars)
    lcss_ranks = _ranks_desc(lcss_scores)
    fused = [
        RankedSubSentence(sub_id=i, ars_rank=ars_ranks[i], lcss_rank=lcss_ranks[i])
        for i in range(len(ars))
    ]
    return sorted(fused, key=lambda r: (r.total_rank, r.sub_id))


def concat_notes(notes: list[ReferenceNote]) -> str:
    return "\n".join(ss.text for note in notes for ss in note.sub_sentences)


def rank_document(
    document: SensitiveDocument,
    notes: list[ReferenceNote],
    params: XAlignParams,
    config: XAlignConfig,
) -> list[RankedSubSentence]:
    """Fused ARS/LCSS ranking of one document against its owner's notes."""
    result = forward_pass("aspect", None, document, params, config, mode="infer")
    ars = aspect_relevance_scores(result.cas.scores)
    reference = concat_notes(notes)
    lcss_scores = [lcss(ss.text, reference) for ss in document.sub_sentences]
    fused = fuse_ranks(list(ars), lcss_scores)
    # Map positional ids back to the document's sub-sentence ids.
    return [
        replace(r, sub_id=document.sub_sentences[r.sub_id].id)
        for r in fused
    ]


@dataclass
class TrainingSamples:
    relevant: list[SubSentence]
    non_relevant: list[tuple[str, SubSentence]]  # (doc_id, sub-sentence)

    def counts(self) -> tuple[int, int]:
        return len(self.relevant), len(self.non_relevant)


def select_training_samples(
    ranked_docs: list[tuple[SensitiveDocument, list[RankedSubSentence]]],
    notes: list[ReferenceNote],
    k_keep: int,
) -> TrainingSamples:
    """Relevant = every note sub-sentence; non-relevant = worst 20% of each
    document's sub-sentences outside the protected top k_keep."""
    relevant = [ss for note in notes for ss in note.sub_sentences]
    non_relevant: list[tuple[str, SubSentence]] = []
    for doc, ranked in ranked_docs:
        remaining = len(ranked) - k_keep
        if remaining <= 0:
            continue
        n_neg = int(0.2 * remaining)
        if n_neg <= 0:
            continue
        by_id = {ss.id: ss for ss in doc.sub_sentences}
        tail = ranked[k_keep + remaining - n_neg :]
        non_relevant.extend((doc.doc_id, by_id[r.sub_id]) for r in tail)
    return TrainingSamples(relevant=relevant, non_relevant=non_relevant)


@dataclass
class RelevanceClassifier:
    weights: np.ndarray
    bias: float
    iteration: int
    n_relevant: int
    n_non_relevant: int

    def predict_proba(self, embeddings: np.ndarray) -> np.ndarray:
        return np.clip(predict_binary_proba(embeddings, self.weights, self.bias), 0.0, 1.0)


def train_relevance_classifier(
    relevant: list[SubSentence],
    non_relevant: list[tuple[str, SubSentence]],
    seed: int = 0,
    iteration: int = 0,
) -> RelevanceClassifier:
    """Logistic model over the fixed sub-sentence embeddings."""
    if not relevant or not non_relevant:
        raise InvalidInputError("both classes must be non-empty")
    pos = np.stack([ss.embedding for ss in relevant]).astype(np.float64)
    neg = np.stack([ss.embedding for _, ss in non_relevant]).astype(np.float64)
    x = np.concatenate([pos, neg], axis=0)
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    weights, bias = fit_binary_logistic(x, y)
    return RelevanceClassifier(
        weights=weights,
        bias=bias,
        iteration=iteration,
        n_relevant=len(relevant),
        n_non_relevant=len(non_relevant),
    )


def _filter_document(
    doc: SensitiveDocument,
    classifier: RelevanceClassifier,
    k_keep: int,
    removal: dict,
) -> tuple[SensitiveDocument, list[int]]:
    """Returns (filtered document, removed sub-sentence ids)."""
    probs = classifier.predict_proba(np.stack([ss.embedding for ss in doc.sub_sentences]))
    # Protected set: highest predicted relevance first, ties by id.
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], doc.sub_sentences[i].id))
    protected = set(order[: max(k_keep, 1)])
    candidates = order[max(k_keep, 1) :]
    if "fraction" in removal:
        n_remove = int(float(removal["fraction"]) * len(candidates))
        to_remove = set(candidates[len(candidates) - n_remove :]) if n_remove > 0 else set()
    elif "prob_threshold" in removal:
        threshold = float(removal["prob_threshold"])
        to_remove = {i for i in candidates if probs[i] < threshold}
    else:
        raise InvalidInputError("removal must specify 'fraction' or 'prob_threshold'")
    # protected is never empty, so a document cannot be emptied by filtering
    survivors = [ss for i, ss in enumerate(doc.sub_sentences) if i not in to_remove]
    removed = [doc.sub_sentences[i].id for i in sorted(to_remove)]
    return replace(doc, sub_sentences=tuple(survivors)), removed


def filter_corpus(
    corpus: EmbeddedCorpus,
    classifier: RelevanceClassifier,
    k_keep: int,
    removal: dict,
    iterations: int = 1,
    params: XAlignParams | None = None,
    config: XAlignConfig | None = None,
    seed: int = 0,
) -> tuple[EmbeddedCorpus, list[dict]]:
    """Filter every document by predicted relevance, keeping the top k_keep.

    With iterations > 1 the select/train/filter loop is re-run on the
    filtered corpus (requires params/config to recompute attention ranks).
    Returns the filtered corpus and one report record per iteration.
    """
    if iterations < 1:
        raise InvalidInputError("iterations must be >= 1")
    if iterations > 1 and (params is None or config is None):
        raise InvalidInputError("iterated filtering needs model params to re-rank")
    reports = []
    current = corpus
    clf = classifier
    for it in range(iterations):
        if it > 0:
            ranked = [
                (doc, rank_document(doc, current.notes_of(doc.person_id), params, config))
                for doc in current.documents
            ]
            samples = select_training_samples(ranked, current.notes, k_keep)
            if not samples.non_relevant:
                # every document has shrunk to its protected top-k; nothing
                # further to learn from
                reports.append({"iteration": it, "stopped": "no negative samples left"})
                break
            clf = train_relevance_classifier(
                samples.relevant, samples.non_relevant, seed=seed, iteration=it
            )
        filtered_docs = []
        removed_total = {}
        for doc in current.documents:
            filtered, removed = _filter_document(doc, clf, k_keep, removal)
            filtered_docs.append(filtered)
            if removed:
                removed_total[doc.doc_id] = removed
        current = EmbeddedCorpus(
            dimension=current.dimension,
            documents=filtered_docs,
            notes=current.notes,
            labels=current.labels,
            planted_truth=current.planted_truth,
            score_range=current.score_range,
        )
        reports.append(
            {
                "iteration": it,
                "removal": removal,
                "k_keep": k_keep,
                "removed": removed_total,
                "survivors": sum(len(d.sub_sentences) for d in filtered_docs),
                "classifier": {
                    "n_relevant": clf.n_relevant,
                    "n_non_relevant": clf.n_non_relevant,
                },
            }
        )
    return current, reports


def apply_filter_to_extraction(
    results: list[ExtractionResult], filtered: EmbeddedCorpus
) -> list[ExtractionResult]:
    """Intersect kept sets with the filter survivors (ratios stay relative to
    the original document lengths)."""
    surviving = {
        doc.doc_id: {ss.id for ss in doc.sub_sentences} for doc in filtered.documents
    }
    out = []
    for res in results:
        alive = surviving.get(res.doc_id, set())
        kept = tuple(k for k in res.kept if k.sub_id in alive)
        out.append(
            replace(res, kept=kept, extraction_ratio=len(kept) / res.doc_length)
        )
    return out


def run_arcss(
    corpus: EmbeddedCorpus,
    results: list[ExtractionResult],
    params: XAlignParams,
    config: XAlignConfig,
    k_keep: int,
    removal: dict,
    iterations: int,
    seed: int = 0,
) -> tuple[EmbeddedCorpus, list[ExtractionResult], list[dict]]:
    """Full select/train/filter pipeline against a corpus and its extraction."""
    ranked = [
        (doc, rank_document(doc, corpus.notes_of(doc.person_id), params, config))
        for doc in corpus.documents
    ]
    samples = select_training_samples(ranked, corpus.notes, k_keep)
    clf = train_relevance_classifier(samples.relevant, samples.non_relevant, seed=seed)
    filtered, reports = filter_corpus(
        corpus, clf, k_keep, removal, iterations=iterations, params=params, config=config, seed=seed
    )
    return filtered, apply_filter_to_extraction(results, filtered), reports
