"""Pipeline orchestration: each subcommand reads and writes declared artifacts.

Artifacts are write-once files under one run directory, each carrying a
header with the config hash and seed, so a finished run is self-describing
and a rerun with identical seeds is byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import numpy as np

from .arcss import run_arcss
from .corpus import (
    EmbeddedCorpus,
    GradeClass,
    load_corpus,
    save_corpus,
    split_train_test,
    synthesize_corpus,
)
from .errors import ArtifactError, ConfigError
from .extraction import (
    AspectLabels,
    ExtractionResult,
    ExtractionScore,
    KeptSubSentence,
    extract_corpus,
    score_extraction,
)
from .evaluation import (
    cluster_labels,
    clustering_fidelity,
    evaluate_utility,
    partition_agreement_scores,
    reid_attack,
)
from .pipeline_config import PipelineConfig
from .pool import (
    build_pool_from_results,
    load_pool,
    load_summaries,
    random_substitute_document,
    save_pool,
    save_summaries,
    substitute_document,
    summaries_to_documents,
)
from .xalign import load_checkpoint, save_checkpoint, train

log = logging.getLogger("aspectdeid")

SUBCOMMANDS = (
    "synth",
    "train",
    "extract",
    "arcss",
    "build-pool",
    "deidentify",
    "evaluate",
    "all",
)

ARTIFACTS = {
    "checkpoint": "checkpoint.xaln",
    "losses": "losses.json",
    "extraction": "extraction.jsonl",
    "arcss_extraction": "arcss_extraction.jsonl",
    "arcss_report": "arcss_report.jsonl",
    "pool": "pool.bin",
    "pool_audit": "pool_audit.jsonl",
    "summaries_aks": "summaries_aks.jsonl",
    "summaries_random": "summaries_random.jsonl",
    "evaluation": "evaluation.json",
}


def _path(out_dir: Path, name: str) -> Path:
    return out_dir / ARTIFACTS[name]


def _corpus_path(out_dir: Path, config: PipelineConfig) -> Path:
    p = Path(config.corpus.path)
    return p if p.is_absolute() else out_dir / p


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ArtifactError(f"missing artifact for this step: {what} ({path})")
    return path


def _fresh(path: Path) -> Path:
    if path.exists():
        raise ArtifactError(f"artifact already exists (outputs are write-once): {path}")
    return path


def _header(config: PipelineConfig, artifact: str) -> dict:
    return {
        "kind": "header",
        "artifact": artifact,
        "version": 1,
        "config_sha256": config.sha256(),
        "seed": config.seed,
    }


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(
        json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)


def _write_jsonl(path: Path, header: dict, records: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def _read_jsonl(path: Path) -> tuple[dict, list[dict]]:
    header = None
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("kind") == "header":
                header = rec
            else:
                records.append(rec)
    if header is None:
        raise ArtifactError(f"{path}: missing artifact header")
    return header, records


def _split(corpus: EmbeddedCorpus, config: PipelineConfig):
    return split_train_test(corpus, config.corpus.test_fraction, config.seed)


# --------------------------------------------------------------------------
# Steps


def step_synth(config: PipelineConfig, out_dir: Path, skip_existing: bool = False) -> Path:
    path = _corpus_path(out_dir, config)
    if path.exists():
        if skip_existing:
            log.info("corpus already present, skipping synthesis: %s", path)
            return path
        raise ArtifactError(f"artifact already exists (outputs are write-once): {path}")
    corpus = synthesize_corpus(
        config.synth.n_persons,
        config.synth.t_true,
        config.synth.subs_per_doc,
        config.synth.psa_fraction,
        config.synth.dimension,
        config.seed,
    )
    save_corpus(corpus, path)
    log.info("synthesized corpus: %d persons -> %s", config.synth.n_persons, path)
    return path


def step_train(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    xcfg = config.xalign
    if xcfg.dimension != corpus.dimension:
        raise ConfigError(
            f"model dimension {xcfg.dimension} does not match corpus dimension "
            f"{corpus.dimension} (run_pipeline resolves this before dispatch)"
        )
    train_split, _ = _split(corpus, config)
    params, history = train(train_split, xcfg)
    ckpt = _fresh(_path(out_dir, "checkpoint"))
    save_checkpoint(ckpt, params, xcfg)
    _write_json(
        _fresh(_path(out_dir, "losses")),
        {"header": _header(config, "losses"), "epochs": history},
    )
    log.info("trained %d epochs -> %s", xcfg.epochs, ckpt)
    return ckpt


def _extraction_record(res: ExtractionResult, split: str) -> dict:
    return {
        "kind": "extraction",
        "doc_id": res.doc_id,
        "person_id": res.person_id,
        "split": split,
        "doc_length": res.doc_length,
        "predicted_class": res.predicted_class.value,
        "extraction_ratio": res.extraction_ratio,
        "kept": [
            {"sub_id": k.sub_id, "bits_hex": k.labels.as_hex(), "ars": k.ars}
            for k in res.kept
        ],
    }


def _extraction_from_record(rec: dict, t: int) -> ExtractionResult:
    kept = tuple(
        KeptSubSentence(
            sub_id=k["sub_id"],
            labels=AspectLabels.from_int(int(k["bits_hex"], 16), t),
            ars=k["ars"],
        )
        for k in rec["kept"]
    )
    return ExtractionResult(
        doc_id=rec["doc_id"],
        person_id=rec["person_id"],
        kept=kept,
        predicted_class=GradeClass(rec["predicted_class"]),
        extraction_ratio=rec["extraction_ratio"],
        doc_length=rec["doc_length"],
    )


def _load_extraction(path: Path, t: int) -> tuple[dict[str, str], list[ExtractionResult]]:
    _, records = _read_jsonl(path)
    split_of = {rec["doc_id"]: rec["split"] for rec in records}
    return split_of, [_extraction_from_record(rec, t) for rec in records]


def step_extract(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    params, xcfg = load_checkpoint(_require(_path(out_dir, "checkpoint"), "checkpoint"))
    train_split, test_split = _split(corpus, config)
    records = []
    for split_name, split in (("train", train_split), ("test", test_split)):
        for res in extract_corpus(
            split, params, xcfg, config.extraction.alpha, config.extraction.beta
        ):
            records.append(_extraction_record(res, split_name))
    path = _fresh(_path(out_dir, "extraction"))
    _write_jsonl(path, _header(config, "extraction"), records)
    log.info("extracted %d documents -> %s", len(records), path)
    return path


def step_arcss(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    params, xcfg = load_checkpoint(_require(_path(out_dir, "checkpoint"), "checkpoint"))
    split_of, results = _load_extraction(
        _require(_path(out_dir, "extraction"), "extraction"), xcfg.t
    )
    train_split, test_split = _split(corpus, config)
    removal = config.arcss.removal()
    records = []
    reports = []
    for split_name, split in (("train", train_split), ("test", test_split)):
        split_results = [r for r in results if split_of[r.doc_id] == split_name]
        _, filtered_results, split_reports = run_arcss(
            split,
            split_results,
            params,
            xcfg,
            k_keep=config.arcss.k_keep,
            removal=removal,
            iterations=config.arcss.iterations,
            seed=config.seed,
        )
        for res in filtered_results:
            records.append(_extraction_record(res, split_name))
        for rep in split_reports:
            reports.append({"kind": "arcss_report", "split": split_name, **rep})
    path = _fresh(_path(out_dir, "arcss_extraction"))
    _write_jsonl(path, _header(config, "arcss_extraction"), records)
    _write_jsonl(_fresh(_path(out_dir, "arcss_report")), _header(config, "arcss_report"), reports)
    log.info("arcss-filtered extraction -> %s", path)
    return path


def _extraction_source(config: PipelineConfig, out_dir: Path) -> Path:
    arcss_path = _path(out_dir, "arcss_extraction")
    if arcss_path.exists():
        return arcss_path
    return _require(_path(out_dir, "extraction"), "extraction (run extract or arcss first)")


def step_build_pool(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    _, xcfg = load_checkpoint(_require(_path(out_dir, "checkpoint"), "checkpoint"))
    split_of, results = _load_extraction(_extraction_source(config, out_dir), xcfg.t)
    train_split, _ = _split(corpus, config)
    train_results = [r for r in results if split_of[r.doc_id] == "train"]
    pool = build_pool_from_results(train_split, train_results, xcfg.t)
    path = _fresh(_path(out_dir, "pool"))
    save_pool(pool, path, sidecar=_fresh(_path(out_dir, "pool_audit")))
    log.info("pool of %d entries -> %s", len(pool), path)
    return path


def step_deidentify(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    _, xcfg = load_checkpoint(_require(_path(out_dir, "checkpoint"), "checkpoint"))
    split_of, results = _load_extraction(_extraction_source(config, out_dir), xcfg.t)
    pool = load_pool(_require(_path(out_dir, "pool"), "pool"))
    by_doc = {r.doc_id: r for r in results}
    docs = {d.doc_id: d for d in corpus.documents}
    aks, rnd = [], []
    for doc_id in sorted(by_doc):
        res = by_doc[doc_id]
        if not res.kept:
            continue
        doc = docs[doc_id]
        aks.append(
            substitute_document(
                doc, res, pool, k=config.aks.k, class_mode=config.aks.class_mode, seed=config.seed
            )
        )
        rnd.append(random_substitute_document(doc, res, pool, seed=config.seed + 1))
    path = _fresh(_path(out_dir, "summaries_aks"))
    save_summaries(aks, path, header_extra=_header(config, "summaries_aks"))
    save_summaries(
        rnd,
        _fresh(_path(out_dir, "summaries_random")),
        header_extra=_header(config, "summaries_random"),
    )
    log.info("de-identified %d documents -> %s", len(aks), path)
    return path


def _random_baseline_score(
    split: EmbeddedCorpus, ratio: float, seed: int
) -> ExtractionScore | None:
    """Matched-ratio random keep, scored against planted truth."""
    if split.planted_truth is None:
        return None
    rng = np.random.default_rng(seed)
    results = []
    for doc in split.documents:
        kept = tuple(
            KeptSubSentence(sub_id=ss.id, labels=AspectLabels(np.zeros(1, dtype=bool)), ars=0.0)
            for ss in doc.sub_sentences
            if rng.random() < ratio
        )
        results.append(
            ExtractionResult(
                doc_id=doc.doc_id,
                person_id=doc.person_id,
                kept=kept,
                predicted_class=GradeClass.F,
                extraction_ratio=len(kept) / len(doc.sub_sentences),
                doc_length=len(doc.sub_sentences),
            )
        )
    return score_extraction(results, split.planted_truth)


def _train_set_agreement(train_split, deid_docs, k: int, seed: int) -> dict:
    """ARI/AMI between cluster labelings of the training documents and their
    de-identified counterparts, aligned on the persons present in both."""
    deid_by_person = {d.person_id: d for d in deid_docs}
    orig_by_person = {d.person_id: d for d in train_split.documents}
    persons = sorted(set(deid_by_person) & set(orig_by_person))
    if len(persons) < k:
        return {"skipped": "too few aligned documents"}
    labels_orig = cluster_labels([orig_by_person[p] for p in persons], k, seed)
    labels_deid = cluster_labels([deid_by_person[p] for p in persons], k, seed)
    return partition_agreement_scores(labels_orig, labels_deid)


def step_evaluate(config: PipelineConfig, out_dir: Path) -> Path:
    corpus = load_corpus(_require(_corpus_path(out_dir, config), "corpus"))
    _, xcfg = load_checkpoint(_require(_path(out_dir, "checkpoint"), "checkpoint"))
    train_split, test_split = _split(corpus, config)
    pool = load_pool(_require(_path(out_dir, "pool"), "pool"))
    aks = load_summaries(_require(_path(out_dir, "summaries_aks"), "summaries"))
    rnd = load_summaries(_require(_path(out_dir, "summaries_random"), "summaries"))

    train_persons = {d.person_id for d in train_split.documents}
    aks_docs = summaries_to_documents(aks, pool)
    rnd_docs = summaries_to_documents(rnd, pool)
    aks_train = [d for d in aks_docs if d.person_id in train_persons]
    aks_test = [d for d in aks_docs if d.person_id not in train_persons]
    rnd_train = [d for d in rnd_docs if d.person_id in train_persons]
    rnd_test = [d for d in rnd_docs if d.person_id not in train_persons]

    bundle = {
        "artifact": "evaluation",
        "version": 1,
        "header": _header(config, "evaluation"),
        "config": config.to_dict(),
        "corpus": {
            "n_persons": len(corpus.documents),
            "n_documents": len(corpus.documents),
            "n_notes": len(corpus.notes),
            "n_sub_sentences": corpus.total_sub_sentences(),
            "dimension": corpus.dimension,
            "train_persons": len(train_split.documents),
            "test_persons": len(test_split.documents),
            "has_planted_truth": corpus.planted_truth is not None,
        },
    }

    # Extraction quality against planted truth (synthetic corpora only).
    if corpus.planted_truth is not None:
        extraction_block = {}
        raw_path = _path(out_dir, "extraction")
        if raw_path.exists():
            split_of, results = _load_extraction(raw_path, xcfg.t)
            test_results = [r for r in results if split_of[r.doc_id] == "test"]
            score = score_extraction(test_results, test_split.planted_truth)
            extraction_block["xalign"] = score.as_dict()
            baseline = _random_baseline_score(
                test_split, score.mean_extraction_ratio, config.seed + 101
            )
            if baseline is not None:
                extraction_block["random_matched"] = baseline.as_dict()
        arcss_path = _path(out_dir, "arcss_extraction")
        if arcss_path.exists():
            split_of, results = _load_extraction(arcss_path, xcfg.t)
            test_results = [r for r in results if split_of[r.doc_id] == "test"]
            extraction_block["xalign_arcss"] = score_extraction(
                test_results, test_split.planted_truth
            ).as_dict()
        bundle["extraction"] = extraction_block

    # Downstream utility (classification) and the two fidelity orientations.
    labels = corpus.labels
    seed = config.seed + 211
    clf = config.eval.classifier
    def _try(fn, *args) -> dict:
        # a variant can be empty when extraction kept nothing for a split
        if any(isinstance(a, list) and not a for a in args):
            return {"skipped": "empty variant"}
        return fn(*args).as_dict()

    bundle["utility"] = {
        "classifier": clf,
        "features": "per-variant rank CDF of mean sub-sentence embeddings",
        "train_original_test_original": _try(
            lambda *a: evaluate_utility(*a, seed, clf), train_split.documents,
            test_split.documents, labels,
        ),
        "train_aks_test_original": _try(
            lambda *a: evaluate_utility(*a, seed, clf), aks_train, test_split.documents, labels
        ),
        "train_random_test_original": _try(
            lambda *a: evaluate_utility(*a, seed, clf), rnd_train, test_split.documents, labels
        ),
        "train_original_test_aks": _try(
            lambda *a: evaluate_utility(*a, seed, clf), train_split.documents, aks_test, labels
        ),
        "train_original_test_random": _try(
            lambda *a: evaluate_utility(*a, seed, clf), train_split.documents, rnd_test, labels
        ),
    }

    k = config.eval.kmeans_k
    fseed = config.seed + 307
    bundle["fidelity"] = {
        "kmeans_k": k,
        "features": "per-variant z-scored mean sub-sentence embeddings",
        "train_original_test_aks": _try(
            lambda *a: clustering_fidelity(*a, k, fseed), train_split.documents,
            test_split.documents, aks_test,
        ),
        "train_original_test_random": _try(
            lambda *a: clustering_fidelity(*a, k, fseed), train_split.documents,
            test_split.documents, rnd_test,
        ),
        "train_aks_test_original": _try(
            lambda *a: clustering_fidelity(*a, k, fseed), aks_train,
            test_split.documents, aks_test,
        ),
        "train_random_test_original": _try(
            lambda *a: clustering_fidelity(*a, k, fseed), rnd_train,
            test_split.documents, rnd_test,
        ),
        "agreement": {
            "original_vs_aks": _train_set_agreement(train_split, aks_train, k, fseed),
            "original_vs_random": _train_set_agreement(train_split, rnd_train, k, fseed),
        },
    }

    reid = reid_attack(
        corpus.documents,
        {"aks": aks_docs, "random": rnd_docs},
        sample_ratio=config.eval.reid_ratio,
        seed=config.seed + 401,
        samples_per_person=config.eval.reid_samples_per_person,
        target_accuracy=config.eval.reid_target_accuracy,
    )
    bundle["reid"] = {
        "protocol": {
            "sample_ratio": config.eval.reid_ratio,
            "samples_per_person": config.eval.reid_samples_per_person,
            "target_accuracy": config.eval.reid_target_accuracy,
            "attacker": "multinomial logistic over L2-normalized mean embeddings",
        },
        **{name: rep.as_dict() for name, rep in reid.items()},
    }

    path = _fresh(_path(out_dir, "evaluation"))
    _write_json(path, bundle)
    log.info("evaluation bundle -> %s", path)
    return path


def _resolve_dimension(config: PipelineConfig, out_dir: Path) -> None:
    """Pin the model dimension to the corpus before any step runs, so every
    artifact of a run (stepwise or chained) echoes the same config hash."""
    corpus_path = _corpus_path(out_dir, config)
    if corpus_path.exists():
        with open(corpus_path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
        dimension = int(header["dimension"])
    else:
        dimension = config.synth.dimension
    if config.xalign.dimension != dimension:
        log.info("resolving model dimension to corpus dimension %d", dimension)
        config.xalign.dimension = dimension
        config.validate()


def run_pipeline(subcommand: str, config: PipelineConfig, out_dir: str | Path) -> Path:
    """Run one pipeline step (or `all`); returns the primary artifact path."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _resolve_dimension(config, out_dir)
    steps = {
        "synth": step_synth,
        "train": step_train,
        "extract": step_extract,
        "arcss": step_arcss,
        "build-pool": step_build_pool,
        "deidentify": step_deidentify,
        "evaluate": step_evaluate,
    }
    if subcommand == "all":
        step_synth(config, out_dir, skip_existing=True)
        step_train(config, out_dir)
        step_extract(config, out_dir)
        step_arcss(config, out_dir)
        step_build_pool(config, out_dir)
        step_deidentify(config, out_dir)
        return step_evaluate(config, out_dir)
    return steps[subcommand](config, out_dir)
