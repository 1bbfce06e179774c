import json
from pathlib import Path

import numpy as np
import pytest

from aspectdeid.corpus import split_train_test, synthesize_corpus
from aspectdeid.pipeline import run_pipeline
from aspectdeid.pipeline_config import load_config
from aspectdeid.xalign import XAlignConfig, train

# Desk-scale acceptance run: the synthetic corpus of the acceptance criteria
# plus training overrides sized for it (defaults target the real-data scale).
DESK_OVERRIDES = [
    "synth.n_persons=200",
    "synth.t_true=10",
    "synth.subs_per_doc=30",
    "synth.psa_fraction=0.06",
    "synth.dimension=32",
    "corpus.test_fraction=0.2",
    "xalign.dimension=32",
    "xalign.tau=0.25",
    "xalign.dropout_p=0.1",
    "xalign.align_weight=0.05",
    "xalign.lr=0.003",
    "xalign.weight_decay=0.01",
    "xalign.epochs=60",
    "xalign.batch_size=32",
    "arcss.mode=threshold",
    "arcss.prob_threshold=0.5",
    "aks.class_mode=relax",
]

SMALL_OVERRIDES = [
    "synth.n_persons=60",
    "synth.subs_per_doc=20",
    "synth.dimension=32",
    "xalign.dimension=32",
    "xalign.tau=0.25",
    "xalign.dropout_p=0.1",
    "xalign.align_weight=0.05",
    "xalign.lr=0.003",
    "xalign.weight_decay=0.01",
    "xalign.epochs=12",
    "xalign.batch_size=32",
    "arcss.mode=threshold",
    "aks.class_mode=relax",
]


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory) -> Path:
    """One full pipeline run on the acceptance corpus, shared by all tests."""
    out = tmp_path_factory.mktemp("desk") / "run"
    config = load_config(None, list(DESK_OVERRIDES), seed=1)
    run_pipeline("all", config, out)
    return out


@pytest.fixture(scope="session")
def desk_bundle(desk_run) -> dict:
    return json.loads((desk_run / "evaluation.json").read_text())


@pytest.fixture(scope="session")
def tiny_corpus():
    return synthesize_corpus(40, 10, 12, 0.1, 16, seed=3)


@pytest.fixture(scope="session")
def tiny_config():
    return XAlignConfig(
        t=10,
        m=5,
        dimension=16,
        tau=0.3,
        tau_c=0.5,
        dropout_p=0.1,
        align_weight=0.05,
        lr=3e-3,
        weight_decay=0.01,
        epochs=20,
        batch_size=16,
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_trained(tiny_corpus, tiny_config):
    train_split, test_split = split_train_test(tiny_corpus, 0.25, seed=5)
    params, history = train(train_split, tiny_config)
    return {
        "params": params,
        "history": history,
        "train": train_split,
        "test": test_split,
        "corpus": tiny_corpus,
        "config": tiny_config,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
