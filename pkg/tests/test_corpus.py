import hashlib

import numpy as np
import pytest

from aspectdeid.corpus import (
    EmbeddedCorpus,
    GradeClass,
    ReferenceNote,
    SensitiveDocument,
    SubSentence,
    aggregate_grades,
    fallback_encode,
    grade_to_class,
    load_corpus,
    save_corpus,
    split_train_test,
    synthesize_corpus,
)
from aspectdeid.errors import (
    ConfigError,
    CorpusError,
    InvalidInputError,
    InvalidSplitError,
    MissingLabelError,
)

# Hand-enumerated boundary table per the half-open thresholds
# A:[90.5,inf)  B:[80.5,90.5)  C:[70.5,80.5)  F:(-inf,70.5)
BOUNDARY_TABLE = [
    (100.0, "A"),
    (95.0, "A"),
    (91.0, "A"),
    (90.5, "A"),
    (90.4999, "B"),
    (90.0, "B"),
    (85.0, "B"),
    (81.0, "B"),
    (80.5, "B"),
    (80.4999, "C"),
    (80.0, "C"),
    (71.0, "C"),
    (70.5, "C"),
    (70.4999, "F"),
    (70.0, "F"),
    (65.0, "F"),
]


class TestGrades:
    @pytest.mark.parametrize("score,expected", BOUNDARY_TABLE)
    def test_boundary_table(self, score, expected):
        assert grade_to_class(score) is GradeClass(expected)

    def test_monotone_in_score(self):
        scores = np.linspace(60, 100, 401)
        ranks = [grade_to_class(s).rank for s in scores]
        assert all(a <= b for a, b in zip(ranks, ranks[1:]))

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), float("-inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidInputError):
            grade_to_class(bad)

    def _notes(self, scores):
        ss = (SubSentence(0, "x", np.zeros(4, dtype=np.float32), "reference"),)
        return [
            ReferenceNote(person_id="p", expert_id=f"e{i}", sub_sentences=ss, grade_score=s)
            for i, s in enumerate(scores)
        ]

    def test_aggregate_identical(self):
        assert aggregate_grades(self._notes([92, 92, 92])) is GradeClass.A

    def test_aggregate_boundary_mean(self):
        # mean 90 -> B by the boundary table
        assert aggregate_grades(self._notes([85, 95])) is GradeClass.B

    def test_aggregate_low(self):
        assert aggregate_grades(self._notes([65, 70, 68])) is GradeClass.F

    def test_aggregate_requires_scores(self):
        notes = self._notes([80])
        notes[0] = ReferenceNote(
            person_id="p", expert_id="e0", sub_sentences=notes[0].sub_sentences, grade_score=None
        )
        with pytest.raises(MissingLabelError):
            aggregate_grades(notes)


class TestSplit:
    def test_large_corpus_split_sizes(self):
        corpus = synthesize_corpus(1738, 4, 2, 0.4, 8, seed=0)
        train, test = split_train_test(corpus, 349 / 1738, seed=42)
        assert len(train.documents) == 1389
        assert len(test.documents) == 349

    def test_partition_property(self, tiny_corpus):
        train, test = split_train_test(tiny_corpus, 0.5, seed=7)
        train_p = set(train.person_ids)
        test_p = set(test.person_ids)
        assert train_p.isdisjoint(test_p)
        assert train_p | test_p == set(tiny_corpus.person_ids)
        # notes and labels follow their person
        assert all(n.person_id in train_p for n in train.notes)
        assert all(n.person_id in test_p for n in test.notes)

    def test_deterministic(self, tiny_corpus):
        a = split_train_test(tiny_corpus, 0.3, seed=9)
        b = split_train_test(tiny_corpus, 0.3, seed=9)
        assert [d.doc_id for d in a[0].documents] == [d.doc_id for d in b[0].documents]
        assert [d.doc_id for d in a[1].documents] == [d.doc_id for d in b[1].documents]

    @pytest.mark.parametrize("fraction", [0.0, 1.0, 0.001, -0.2])
    def test_empty_side_rejected(self, fraction, tiny_corpus):
        with pytest.raises(InvalidSplitError):
            split_train_test(tiny_corpus, fraction, seed=1)


class TestFallbackEncode:
    def test_deterministic(self):
        a = fallback_encode("abc", 8, 7)
        b = fallback_encode("abc", 8, 7)
        assert (a == b).all()

    def test_unit_norm(self, rng):
        for _ in range(20):
            text = "".join(chr(rng.integers(0x4E00, 0x4E80)) for _ in range(rng.integers(1, 30)))
            vec = fallback_encode(text, 32, 0)
            assert abs(np.linalg.norm(vec) - 1.0) < 1e-6

    def test_distinct_strings_rarely_collide(self, rng):
        alphabet = "abcdefghij"
        worst = 0.0
        for _ in range(1000):
            a = "".join(rng.choice(list(alphabet), size=rng.integers(3, 12)))
            b = "".join(rng.choice(list(alphabet), size=rng.integers(3, 12)))
            if a == b:
                continue
            cos = float(fallback_encode(a, 8, 7) @ fallback_encode(b, 8, 7))
            worst = max(worst, cos)
        assert worst < 0.99

    def test_bad_dimension(self):
        with pytest.raises(InvalidInputError):
            fallback_encode("x", 0, 1)


class TestSynthesize:
    def test_counts(self):
        corpus = synthesize_corpus(200, 10, 30, 0.06, 32, seed=1)
        assert len(corpus.documents) == 200
        assert corpus.total_sub_sentences() == 6000
        planted = sum(corpus.planted_truth.values())
        assert 300 <= planted <= 420  # ~0.06 * 6000
        assert all(2 <= len(corpus.notes_of(p)) <= 5 for p in corpus.person_ids)

    def test_planted_truth_on_every_document(self):
        corpus = synthesize_corpus(20, 5, 10, 0.1, 12, seed=2)
        for doc in corpus.documents:
            ids = {k[1] for k in corpus.planted_truth if k[0] == doc.doc_id}
            assert ids == {ss.id for ss in doc.sub_sentences}
            assert any(corpus.planted_truth[(doc.doc_id, ss.id)] for ss in doc.sub_sentences)

    def test_byte_identical_given_seed(self, tmp_path):
        a = synthesize_corpus(15, 5, 8, 0.2, 12, seed=9)
        b = synthesize_corpus(15, 5, 8, 0.2, 12, seed=9)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(a, pa)
        save_corpus(b, pb)
        assert hashlib.sha256(pa.read_bytes()).digest() == hashlib.sha256(pb.read_bytes()).digest()

    def test_all_grade_classes_present_at_scale(self):
        corpus = synthesize_corpus(200, 10, 30, 0.06, 32, seed=1)
        assert {g.value for g in corpus.labels.values()} == {"A", "B", "C", "F"}

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_persons=10, t_true=1, subs_per_doc=10, psa_fraction=0.1, dimension=16, seed=0),
            dict(n_persons=10, t_true=5, subs_per_doc=10, psa_fraction=0.0, dimension=16, seed=0),
            dict(n_persons=10, t_true=5, subs_per_doc=10, psa_fraction=1.5, dimension=16, seed=0),
            dict(n_persons=10, t_true=10, subs_per_doc=10, psa_fraction=0.1, dimension=10, seed=0),
            dict(n_persons=1, t_true=5, subs_per_doc=10, psa_fraction=0.1, dimension=16, seed=0),
        ],
    )
    def test_infeasible_configs(self, kwargs):
        with pytest.raises(ConfigError):
            synthesize_corpus(**kwargs)


class TestCorpusIO:
    def test_round_trip_bit_exact(self, tiny_corpus, tmp_path):
        path = tmp_path / "c.aspcorp.jsonl"
        save_corpus(tiny_corpus, path)
        loaded = load_corpus(path)
        assert loaded.dimension == tiny_corpus.dimension
        assert loaded.labels == tiny_corpus.labels
        assert loaded.planted_truth == tiny_corpus.planted_truth
        for da, db in zip(tiny_corpus.documents, loaded.documents):
            assert da.doc_id == db.doc_id
            for sa, sb in zip(da.sub_sentences, db.sub_sentences):
                assert sa.text == sb.text
                assert (sa.embedding == sb.embedding).all()
        for na, nb in zip(tiny_corpus.notes, loaded.notes):
            assert na.grade_score == nb.grade_score
            for sa, sb in zip(na.sub_sentences, nb.sub_sentences):
                assert (sa.embedding == sb.embedding).all()

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind":"label","person_id":"p","grade":"A"}\n')
        with pytest.raises(CorpusError):
            load_corpus(path)

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"kind":"header","version":1,"dimension":2,"score_range":[65,100]}\n'
            '{"kind":"mystery"}\n'
        )
        with pytest.raises(CorpusError):
            load_corpus(path)


class TestValidation:
    def _doc(self, person="p1", dim=4):
        return SensitiveDocument(
            doc_id=f"d-{person}",
            person_id=person,
            sub_sentences=(
                SubSentence(0, "hello", np.zeros(dim, dtype=np.float32), "sensitive"),
            ),
        )

    def test_note_for_unknown_person(self):
        corpus = EmbeddedCorpus(
            dimension=4,
            documents=[self._doc()],
            notes=[
                ReferenceNote(
                    person_id="ghost",
                    expert_id="e",
                    sub_sentences=(
                        SubSentence(0, "n", np.zeros(4, dtype=np.float32), "reference"),
                    ),
                )
            ],
            labels={},
        )
        with pytest.raises(CorpusError):
            corpus.validate()

    def test_duplicate_person_document(self):
        corpus = EmbeddedCorpus(
            dimension=4, documents=[self._doc(), self._doc()], notes=[], labels={}
        )
        with pytest.raises(CorpusError):
            corpus.validate()

    def test_dimension_mismatch(self):
        corpus = EmbeddedCorpus(dimension=8, documents=[self._doc(dim=4)], notes=[], labels={})
        with pytest.raises(CorpusError):
            corpus.validate()

    def test_empty_document_rejected(self):
        with pytest.raises(CorpusError):
            SensitiveDocument(doc_id="d", person_id="p", sub_sentences=())

    def test_wrong_source_rejected(self):
        with pytest.raises(CorpusError):
            SensitiveDocument(
                doc_id="d",
                person_id="p",
                sub_sentences=(
                    SubSentence(0, "x", np.zeros(4, dtype=np.float32), "reference"),
                ),
            )
