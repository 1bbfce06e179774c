"""Synthetic corpus generator with planted ground-truth aspect sub-sentences.

Desk-scale stand-in for a real person corpus: each person's document mixes a
few "aspect" sub-sentences (drawn from latent clusters shared by a small set
of person profiles) into generic filler. Reference notes are noisy copies of
the planted sub-sentences, and grades follow a fixed linear function of the
person's aspect mixture, so extraction, substitution, utility, and
re-identification all have measurable signal.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .model import (
    EmbeddedCorpus,
    GradeClass,
    ReferenceNote,
    SensitiveDocument,
    SubSentence,
    aggregate_grades,
)

# Fixed geometry/noise scales. Aspect clusters sit on coordinate axes so the
# grade signal is axis-aligned; person bias and filler live on the remaining
# axes, which keeps identity signal separable from aspect signal.
_PLANT_NOISE = 0.10
_NOTE_NOISE = 0.10
_BIAS_SCALE = 0.30
_FILLER_DIR = 0.60
_FILLER_NOISE = 0.25
_GRADE_NOISE = 2.0

# Distractors: half-strength aspect content that is NOT ground truth. They
# give attention-based extraction a realistic false-positive rate that the
# downstream literal-similarity filtering can remove.
_DISTRACTOR_FRACTION = 0.10
_DISTRACTOR_MIX = 0.5

# Up to 5 shared person profiles; scores chosen so all four grade classes occur.
_PROFILE_SCORES = (68.0, 75.0, 84.0, 88.0, 95.0)


def _profile_aspects(t_true: int, n_profiles: int) -> list[list[int]]:
    bounds = [round(i * t_true / n_profiles) for i in range(n_profiles + 1)]
    return [list(range(bounds[i], bounds[i + 1])) for i in range(n_profiles)]


def synthesize_corpus(
    n_persons: int,
    t_true: int,
    subs_per_doc: int,
    psa_fraction: float,
    dimension: int,
    seed: int,
) -> EmbeddedCorpus:
    if t_true < 2:
        raise ConfigError("need at least 2 latent aspects")
    if not (0.0 < psa_fraction < 1.0):
        raise ConfigError("psa_fraction must be in (0,1)")
    if n_persons < 2 or subs_per_doc < 2:
        raise ConfigError("need at least 2 persons and 2 sub-sentences per document")
    if dimension < t_true + 2:
        raise ConfigError(f"dimension must be >= t_true + 2, got {dimension} for t_true={t_true}")
    if int(psa_fraction * subs_per_doc) + 1 > subs_per_doc:
        raise ConfigError("psa_fraction leaves no room for filler")

    rng = np.random.default_rng(seed)
    n_profiles = min(5, t_true)
    profiles = _profile_aspects(t_true, n_profiles)
    profile_scores = _PROFILE_SCORES[:n_profiles]
    # Per-aspect grade weight: score = 65 + 35 * mean(weight over person's aspects).
    aspect_weight = np.zeros(t_true)
    for aspects, score in zip(profiles, profile_scores):
        aspect_weight[aspects] = (score - 65.0) / 35.0

    # Shared generic-content direction for filler, on the non-aspect axes.
    filler_dir = np.zeros(dimension)
    filler_dir[t_true:] = 1.0
    filler_dir /= np.linalg.norm(filler_dir)

    aspect_terms = [[f"asp{a}term{j}" for j in range(6)] for a in range(t_true)]
    filler_terms = [f"filler{j}" for j in range(40)]

    documents: list[SensitiveDocument] = []
    notes: list[ReferenceNote] = []
    labels: dict[str, GradeClass] = {}
    planted_truth: dict[tuple[str, int], bool] = {}

    base_planted = int(psa_fraction * subs_per_doc)
    extra_prob = psa_fraction * subs_per_doc - base_planted

    for p in range(n_persons):
        person_id = f"person-{p:04d}"
        doc_id = f"doc-{p:04d}"
        profile = int(rng.integers(n_profiles))
        aspects = profiles[profile]
        score = profile_scores[profile]

        bias = np.zeros(dimension)
        bias[t_true:] = rng.normal(size=dimension - t_true)
        bias *= _BIAS_SCALE / np.linalg.norm(bias)

        n_planted = max(1, base_planted + (1 if rng.random() < extra_prob else 0))
        n_distract = min(round(_DISTRACTOR_FRACTION * subs_per_doc), subs_per_doc - n_planted)
        special = rng.choice(subs_per_doc, size=n_planted + n_distract, replace=False).tolist()
        planted_pos = set(special[:n_planted])
        distract_pos = set(special[n_planted:])

        subs = []
        planted_info = []  # (ss_id, embedding, terms) for note construction
        for j in range(subs_per_doc):
            u = rng.normal(size=dimension)
            u /= np.linalg.norm(u)
            filler_part = _FILLER_DIR * filler_dir + _FILLER_NOISE * u
            if j in planted_pos:
                aspect = int(aspects[rng.integers(len(aspects))])
                emb = np.zeros(dimension)
                emb[aspect] = 1.0
                emb += bias + _PLANT_NOISE * rng.normal(size=dimension) / np.sqrt(dimension)
                terms = [aspect_terms[aspect][k] for k in rng.choice(6, size=3, replace=False)]
                text = f"p{p:04d} " + " ".join(terms)
                planted_info.append((j, emb, terms))
                planted_truth[(doc_id, j)] = True
            elif j in distract_pos:
                aspect = int(aspects[rng.integers(len(aspects))])
                emb = np.zeros(dimension)
                emb[aspect] = _DISTRACTOR_MIX
                emb += (1.0 - _DISTRACTOR_MIX) * filler_part + bias
                words = [aspect_terms[aspect][int(rng.integers(6))]] + [
                    filler_terms[k] for k in rng.choice(len(filler_terms), size=2, replace=False)
                ]
                text = f"p{p:04d} " + " ".join(words)
                planted_truth[(doc_id, j)] = False
            else:
                emb = filler_part + bias
                words = [filler_terms[k] for k in rng.choice(len(filler_terms), size=3, replace=False)]
                text = f"p{p:04d} " + " ".join(words)
                planted_truth[(doc_id, j)] = False
            subs.append(
                SubSentence(id=j, text=text, embedding=emb.astype(np.float32), source="sensitive")
            )
        documents.append(
            SensitiveDocument(doc_id=doc_id, person_id=person_id, sub_sentences=tuple(subs))
        )

        person_notes = []
        for e in range(int(rng.integers(2, 6))):
            n_cover = int(rng.integers(1, len(planted_info) + 1))
            cover_idx = rng.choice(len(planted_info), size=n_cover, replace=False)
            note_subs = []
            for rank, ci in enumerate(sorted(cover_idx.tolist())):
                _, emb, terms = planted_info[ci]
                noisy = emb + _NOTE_NOISE * rng.normal(size=dimension) / np.sqrt(dimension)
                n_terms = int(rng.integers(2, len(terms) + 1))
                text = f"e{e} " + " ".join(terms[:n_terms])
                note_subs.append(
                    SubSentence(
                        id=rank, text=text, embedding=noisy.astype(np.float32), source="reference"
                    )
                )
            grade = float(np.clip(score + _GRADE_NOISE * rng.normal(), 65.0, 100.0))
            person_notes.append(
                ReferenceNote(
                    person_id=person_id,
                    expert_id=f"expert-{e}",
                    sub_sentences=tuple(note_subs),
                    grade_score=grade,
                )
            )
        notes.extend(person_notes)
        labels[person_id] = aggregate_grades(person_notes)

    corpus = EmbeddedCorpus(
        dimension=dimension,
        documents=documents,
        notes=notes,
        labels=labels,
        planted_truth=planted_truth,
    )
    corpus.validate()
    return corpus
