import numpy as np
import pytest

from aspectdeid.errors import (
    DegenerateDocumentError,
    InvalidInputError,
    UntrainedParamsError,
)
from aspectdeid.extraction import (
    AspectLabels,
    aspect_relevance_score,
    aspect_relevance_scores,
    extract_document,
    extraction_mask,
    score_extraction,
    standardize_and_binarize,
)
from aspectdeid.extraction import ExtractionResult, KeptSubSentence
from aspectdeid.corpus import GradeClass
from aspectdeid.xalign import init_params


class TestStandardizeBinarize:
    def test_zero_variance_row_all_false(self):
        bits = standardize_and_binarize(np.array([[0.2, 0.2, 0.2]]), alpha=0.0)
        assert not bits.any()

    def test_hand_zscore_oracle(self):
        # row [1,2,3]: population std sqrt(2/3); z = [-1.2247, 0, 1.2247]
        bits = standardize_and_binarize(np.array([[1.0, 2.0, 3.0]]), alpha=1.0)
        assert bits.tolist() == [[False, False, True]]
        bits = standardize_and_binarize(np.array([[1.0, 2.0, 3.0]]), alpha=1.3)
        assert not bits.any()

    def test_alpha_minus_inf_all_true(self):
        bits = standardize_and_binarize(np.array([[1.0, 2.0, 3.0]]), alpha=-np.inf)
        assert bits.all()

    def test_standardized_rows_have_unit_stats(self, rng):
        cas = rng.random((5, 40))
        mean = cas.mean(axis=1, keepdims=True)
        std = cas.std(axis=1, keepdims=True)
        z = (cas - mean) / std
        assert np.abs(z.mean(axis=1)).max() < 1e-6
        assert np.abs(z.std(axis=1) - 1.0).max() < 1e-6

    def test_degenerate_document(self):
        with pytest.raises(DegenerateDocumentError):
            standardize_and_binarize(np.array([[1.0]]), alpha=0.0)


class TestExtractionMask:
    def test_beta_zero_all_true(self, rng):
        bits = rng.random((4, 6)) > 0.5
        assert extraction_mask(bits, 0).all()

    def test_consensus_at_default_beta(self):
        bits = np.zeros((10, 3), dtype=bool)
        bits[:5, 1] = True  # column sum 5
        mask = extraction_mask(bits, 5)
        assert mask.tolist() == [False, True, False]

    def test_unreachable_beta(self, rng):
        bits = rng.random((4, 6)) > 0.5
        assert not extraction_mask(bits, 5).any()

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            t, k = int(rng.integers(2, 8)), int(rng.integers(2, 10))
            bits = rng.random((t, k)) > rng.random()
            beta = int(rng.integers(0, t + 1))
            mask = extraction_mask(bits, beta)
            brute = [sum(bits[i][j] for i in range(t)) >= beta for j in range(k)]
            assert mask.tolist() == brute


class TestArs:
    def test_constant(self):
        cas = np.full((4, 3), 0.5)
        assert aspect_relevance_score(cas, 1) == 0.5

    def test_two_value_mean(self):
        cas = np.array([[0.1, 0.3], [0.9, 0.5]])
        assert abs(aspect_relevance_score(cas, 0) - 0.5) < 1e-12

    def test_matches_loop_oracle(self, rng):
        cas = rng.random((4, 6))
        for j in range(6):
            oracle = sum(cas[i][j] for i in range(4)) / 4
            assert abs(aspect_relevance_score(cas, j) - oracle) < 1e-9
        assert np.allclose(aspect_relevance_scores(cas), cas.mean(axis=0))

    def test_bad_index(self, rng):
        with pytest.raises(InvalidInputError):
            aspect_relevance_score(rng.random((3, 3)), 5)


class TestExtractDocument:
    def test_untrained_params_refused(self, tiny_trained):
        cfg = tiny_trained["config"]
        doc = tiny_trained["test"].documents[0]
        with pytest.raises(UntrainedParamsError):
            extract_document(doc, init_params(cfg), cfg, 1.0, 5)

    def test_alpha_monotonicity(self, tiny_trained):
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        doc = tiny_trained["test"].documents[0]
        low = set(extract_document(doc, params, cfg, 0.5, 3).kept_ids())
        high = set(extract_document(doc, params, cfg, 1.5, 3).kept_ids())
        assert high <= low

    def test_beta_above_t_keeps_nothing(self, tiny_trained):
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        doc = tiny_trained["test"].documents[0]
        res = extract_document(doc, params, cfg, 0.0, cfg.t + 1)
        assert res.kept == () and res.extraction_ratio == 0.0

    def test_kept_ids_strictly_increasing(self, tiny_trained):
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        for doc in tiny_trained["test"].documents:
            ids = extract_document(doc, params, cfg, 1.0, 3).kept_ids()
            assert ids == sorted(ids)
            assert len(ids) == len(set(ids))

    def test_bits_width(self, tiny_trained):
        params, cfg = tiny_trained["params"], tiny_trained["config"]
        res = extract_document(tiny_trained["test"].documents[0], params, cfg, 0.5, 2)
        for kept in res.kept:
            assert kept.labels.bits.shape == (cfg.t,)


def result_for(doc_id, kept_ids, lengths, cls=GradeClass.B):
    kept = tuple(
        KeptSubSentence(sub_id=i, labels=AspectLabels(np.zeros(2, dtype=bool)), ars=0.0)
        for i in kept_ids
    )
    return ExtractionResult(
        doc_id=doc_id,
        person_id=f"p-{doc_id}",
        kept=kept,
        predicted_class=cls,
        extraction_ratio=len(kept) / lengths,
        doc_length=lengths,
    )


class TestScoreExtraction:
    def test_perfect_agreement(self):
        truth = {("d", i): i in (1, 3) for i in range(5)}
        score = score_extraction([result_for("d", [1, 3], 5)], truth)
        assert score.precision == score.recall == score.f1 == 1.0

    def test_empty_prediction(self):
        truth = {("d", i): i in (1, 3) for i in range(5)}
        score = score_extraction([result_for("d", [], 5)], truth)
        assert score.precision == 0.0 and score.recall == 0.0 and score.f1 == 0.0

    def test_missing_truth_is_error(self):
        with pytest.raises(InvalidInputError):
            score_extraction([result_for("d", [0], 3)], {("other", 0): True})

    def test_f1_is_harmonic_mean(self, rng):
        for _ in range(20):
            n = int(rng.integers(4, 30))
            truth = {("d", i): bool(rng.random() < 0.3) for i in range(n)}
            kept = [i for i in range(n) if rng.random() < 0.4]
            score = score_extraction([result_for("d", kept, n)], truth)
            if score.precision + score.recall > 0:
                expect = (
                    2 * score.precision * score.recall / (score.precision + score.recall)
                )
                assert abs(score.f1 - expect) < 1e-9

    def test_random_keep_precision_near_planted_rate(self, rng):
        # random 20% keep against 6% planted: precision ~ 0.06 within 3 SE
        n_docs, n_subs, keep_p, plant_p = 60, 50, 0.2, 0.06
        truth = {}
        results = []
        for d in range(n_docs):
            doc_id = f"d{d}"
            kept = []
            for i in range(n_subs):
                truth[(doc_id, i)] = rng.random() < plant_p
                if rng.random() < keep_p:
                    kept.append(i)
            results.append(result_for(doc_id, kept, n_subs))
        score = score_extraction(results, truth)
        n_kept = sum(len(r.kept) for r in results)
        se = np.sqrt(plant_p * (1 - plant_p) / n_kept)
        assert abs(score.precision - plant_p) < 3 * se


class TestMonotonicityProperty:
    def test_threshold_monotonicity_random_cas(self, rng):
        # raising alpha or beta never adds a kept sub-sentence
        for _ in range(30):
            t, k = int(rng.integers(2, 10)), int(rng.integers(3, 15))
            cas = rng.random((t, k))
            alphas = sorted(rng.normal(size=3))
            betas = sorted(rng.integers(0, t + 1, size=3))
            prev = None
            for alpha in alphas:
                kept = set(np.flatnonzero(extraction_mask(standardize_and_binarize(cas, alpha), int(betas[0]))))
                if prev is not None:
                    assert kept <= prev
                prev = kept
            prev = None
            for beta in betas:
                kept = set(np.flatnonzero(extraction_mask(standardize_and_binarize(cas, float(alphas[0])), int(beta))))
                if prev is not None:
                    assert kept <= prev
                prev = kept
