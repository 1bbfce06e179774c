import numpy as np
import pytest

from aspectdeid.arcss import (
    RelevanceClassifier,
    filter_corpus,
    fuse_ranks,
    lcs_length,
    lcss,
    rank_document,
    run_arcss,
    select_training_samples,
    train_relevance_classifier,
)
from aspectdeid.corpus import SubSentence
from aspectdeid.errors import InvalidInputError
from aspectdeid.extraction import extract_corpus, score_extraction


def lcs_dp_oracle(a: str, b: str) -> int:
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i][j - 1], table[i - 1][j])
    return table[m][n]


class TestLcss:
    def test_identical(self):
        assert lcss("abc", "abc") == 1.0

    def test_known_value(self):
        # LCS("abcde", "ace") = "ace" (3), max length 5
        assert lcss("abcde", "ace") == 0.6

    def test_disjoint(self):
        assert lcss("abc", "xyz") == 0.0

    def test_both_empty(self):
        assert lcss("", "") == 1.0

    def test_one_empty(self):
        assert lcss("", "abc") == 0.0

    def test_symmetry_and_oracle(self, rng):
        alphabet = list("abcde測試中文XY ")
        for _ in range(300):
            a = "".join(rng.choice(alphabet) for _ in range(rng.integers(0, 25)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.integers(0, 25)))
            assert lcs_length(a, b) == lcs_dp_oracle(a, b)
            assert lcss(a, b) == lcss(b, a)

    def test_bounded(self, rng):
        for _ in range(50):
            a = "".join(rng.choice(list("abc"), size=rng.integers(1, 10)))
            b = "".join(rng.choice(list("abc"), size=rng.integers(1, 10)))
            assert 0.0 <= lcss(a, b) <= 1.0


class TestFuseRanks:
    def test_rank_addition(self):
        # item 0: ARS rank 5, LCSS rank 2 -> total 7
        ars = [1.0, 5.0, 4.0, 3.0, 2.0]  # item 0 has lowest ARS -> rank 5
        lcs = [4.0, 5.0, 1.0, 2.0, 3.0]  # item 0 has 2nd-highest LCSS -> rank 2
        fused = {r.sub_id: r for r in fuse_ranks(ars, lcs)}
        assert fused[0].ars_rank == 5
        assert fused[0].lcss_rank == 2
        assert fused[0].total_rank == 7

    def test_identical_lists_double_rank(self):
        scores = [0.9, 0.5, 0.7]
        for r in fuse_ranks(scores, scores):
            assert r.total_rank == 2 * r.ars_rank

    def test_reversed_lists_constant_total(self, rng):
        n = 8
        scores = list(rng.random(n))
        fused = fuse_ranks(scores, [-s for s in scores])
        assert all(r.total_rank == n + 1 for r in fused)

    def test_ranks_are_permutation(self, rng):
        n = 10
        fused = fuse_ranks(list(rng.random(n)), list(rng.random(n)))
        assert sorted(r.ars_rank for r in fused) == list(range(1, n + 1))
        assert sorted(r.lcss_rank for r in fused) == list(range(1, n + 1))

    def test_ties_broken_by_position(self):
        fused = fuse_ranks([0.5, 0.5, 0.5], [0.1, 0.1, 0.1])
        assert [r.ars_rank for r in sorted(fused, key=lambda r: r.sub_id)] == [1, 2, 3]

    def test_rank_invariance_under_monotone_transform(self, rng):
        ars = list(rng.random(7))
        lcs = list(rng.random(7))
        base = [(r.sub_id, r.total_rank) for r in fuse_ranks(ars, lcs)]
        warped = [(r.sub_id, r.total_rank) for r in fuse_ranks(
            [np.exp(3 * a) for a in ars], [2 * l + 5 for l in lcs]
        )]
        assert base == warped

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            fuse_ranks([1.0], [1.0, 2.0])


class TestSelection:
    def _ranked_doc(self, tiny_trained, doc):
        corpus = tiny_trained["corpus"]
        return rank_document(
            doc, corpus.notes_of(doc.person_id), tiny_trained["params"], tiny_trained["config"]
        )

    def test_negative_count(self, tiny_trained):
        corpus = tiny_trained["train"]
        doc = corpus.documents[0]  # 12 sub-sentences
        ranked = self._ranked_doc(tiny_trained, doc)
        samples = select_training_samples([(doc, ranked)], corpus.notes_of(doc.person_id), k_keep=2)
        assert len(samples.non_relevant) == int(0.2 * (12 - 2))

    def test_small_doc_contributes_nothing(self, tiny_trained):
        corpus = tiny_trained["train"]
        doc = corpus.documents[0]
        ranked = self._ranked_doc(tiny_trained, doc)
        samples = select_training_samples(
            [(doc, ranked)], corpus.notes_of(doc.person_id), k_keep=len(doc.sub_sentences)
        )
        assert samples.non_relevant == []
        assert len(samples.relevant) > 0  # notes still provide positives

    def test_negatives_avoid_top_k(self, tiny_trained):
        corpus = tiny_trained["train"]
        k_keep = 3
        for doc in corpus.documents[:5]:
            ranked = self._ranked_doc(tiny_trained, doc)
            top = {r.sub_id for r in ranked[:k_keep]}
            samples = select_training_samples(
                [(doc, ranked)], corpus.notes_of(doc.person_id), k_keep
            )
            neg_ids = {ss.id for d, ss in samples.non_relevant if d == doc.doc_id}
            assert neg_ids.isdisjoint(top)


class TestRelevanceClassifier:
    def _separable(self, rng, n=60, d=8, gap=4.0):
        pos = [
            SubSentence(i, "p", (rng.normal(size=d) + gap).astype(np.float32), "reference")
            for i in range(n)
        ]
        neg = [
            ("d", SubSentence(i, "n", (rng.normal(size=d) - gap).astype(np.float32), "sensitive"))
            for i in range(n)
        ]
        return pos, neg

    def test_separable_accuracy(self, rng):
        pos, neg = self._separable(rng)
        clf = train_relevance_classifier(pos, neg, seed=0)
        p_pos = clf.predict_proba(np.stack([s.embedding for s in pos]))
        p_neg = clf.predict_proba(np.stack([s.embedding for _, s in neg]))
        acc = (np.concatenate([(p_pos >= 0.5), (p_neg < 0.5)])).mean()
        assert acc >= 0.99

    def test_label_swap_complement(self, rng):
        pos, neg = self._separable(rng, gap=1.0)
        swapped_pos = [s for _, s in neg]
        swapped_neg = [("d", s) for s in pos]
        clf = train_relevance_classifier(pos, neg, seed=0)
        swapped = train_relevance_classifier(swapped_pos, swapped_neg, seed=0)
        probe = rng.normal(size=(40, 8))
        assert np.abs(clf.predict_proba(probe) + swapped.predict_proba(probe) - 1.0).max() < 0.05

    def test_deterministic(self, rng):
        pos, neg = self._separable(rng)
        a = train_relevance_classifier(pos, neg, seed=3)
        b = train_relevance_classifier(pos, neg, seed=3)
        assert (a.weights == b.weights).all() and a.bias == b.bias

    def test_empty_class_rejected(self, rng):
        pos, neg = self._separable(rng)
        with pytest.raises(InvalidInputError):
            train_relevance_classifier(pos, [], seed=0)

    def test_probability_range(self, rng):
        pos, neg = self._separable(rng)
        clf = train_relevance_classifier(pos, neg, seed=0)
        p = clf.predict_proba(rng.normal(size=(100, 8)) * 50)
        assert ((p >= 0.0) & (p <= 1.0)).all()


def constant_classifier(d, p=0.5):
    """Classifier assigning the same probability to everything."""
    import math

    bias = math.log(p / (1 - p))
    return RelevanceClassifier(
        weights=np.zeros(d), bias=bias, iteration=0, n_relevant=1, n_non_relevant=1
    )


class TestFilter:
    def test_fraction_removal_count(self, tiny_trained):
        corpus = tiny_trained["train"]
        clf = constant_classifier(corpus.dimension)
        n = len(corpus.documents[0].sub_sentences)  # 12
        k_keep = 4
        filtered, reports = filter_corpus(corpus, clf, k_keep, {"fraction": 0.25})
        expect_removed = int(0.25 * (n - k_keep))
        for doc in filtered.documents:
            assert len(doc.sub_sentences) == n - expect_removed
        assert reports[0]["survivors"] == sum(len(d.sub_sentences) for d in filtered.documents)

    def test_threshold_zero_removes_nothing(self, tiny_trained):
        corpus = tiny_trained["train"]
        clf = constant_classifier(corpus.dimension)
        filtered, _ = filter_corpus(corpus, clf, 2, {"prob_threshold": 0.0})
        assert corpus.total_sub_sentences() == filtered.total_sub_sentences()

    def test_never_empties_document(self, tiny_trained):
        corpus = tiny_trained["train"]
        clf = constant_classifier(corpus.dimension, p=0.01)
        filtered, _ = filter_corpus(corpus, clf, 0, {"prob_threshold": 0.99})
        assert all(len(d.sub_sentences) >= 1 for d in filtered.documents)

    def test_top_k_protected(self, tiny_trained):
        corpus = tiny_trained["train"]
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        ranked = [
            (doc, rank_document(doc, corpus.notes_of(doc.person_id), params, cfg))
            for doc in corpus.documents
        ]
        samples = select_training_samples(ranked, corpus.notes, 3)
        clf = train_relevance_classifier(samples.relevant, samples.non_relevant, seed=0)
        filtered, _ = filter_corpus(corpus, clf, 3, {"prob_threshold": 0.999})
        for before, after in zip(corpus.documents, filtered.documents):
            probs = clf.predict_proba(np.stack([s.embedding for s in before.sub_sentences]))
            order = sorted(
                range(len(probs)), key=lambda i: (-probs[i], before.sub_sentences[i].id)
            )
            protected = {before.sub_sentences[i].id for i in order[:3]}
            surviving = {s.id for s in after.sub_sentences}
            assert protected <= surviving

    def test_iterated_filtering_shrinks(self, tiny_trained):
        corpus = tiny_trained["train"]
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        results = extract_corpus(corpus, params, cfg, 1.0, 3)
        sizes = []
        for iters in (1, 2, 3):
            filtered, _, _ = run_arcss(
                corpus, results, params, cfg, k_keep=2,
                removal={"fraction": 0.25}, iterations=iters, seed=0,
            )
            sizes.append(filtered.total_sub_sentences())
        assert sizes[0] >= sizes[1] >= sizes[2]
        assert sizes[0] < corpus.total_sub_sentences()

    def test_precision_improves_on_synthetic(self, tiny_trained):
        # documents here are short (12 sub-sentences), so k_keep must stay
        # below the kept-set size for the filter to have anything to remove
        corpus = tiny_trained["test"]
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        results = extract_corpus(corpus, params, cfg, 1.0, 3)
        before = score_extraction(results, corpus.planted_truth)
        _, filtered_results, _ = run_arcss(
            corpus, results, params, cfg, k_keep=1,
            removal={"prob_threshold": 0.9}, iterations=1, seed=0,
        )
        after = score_extraction(filtered_results, corpus.planted_truth)
        assert after.precision > before.precision
        assert after.recall >= 0.8 * before.recall

    def test_filtered_extraction_subset(self, tiny_trained):
        corpus = tiny_trained["test"]
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        results = extract_corpus(corpus, params, cfg, 1.0, 3)
        _, filtered_results, _ = run_arcss(
            corpus, results, params, cfg, k_keep=3,
            removal={"prob_threshold": 0.5}, iterations=1, seed=0,
        )
        before = {r.doc_id: set(r.kept_ids()) for r in results}
        for r in filtered_results:
            assert set(r.kept_ids()) <= before[r.doc_id]
