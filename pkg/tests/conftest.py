import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clicksift import corpus, detector, pipeline

REPO = Path(__file__).resolve().parent.parent
MOTIVATING = REPO / "corpus" / "motivating_example.ir"

GEN_TRAIN_SEED = 11
GEN_EVAL_SEED = 111
TRAIN_SEED = 0


@pytest.fixture(scope="session")
def motivating_text() -> str:
    return MOTIVATING.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def seed_corpus(tmp_path_factory):
    """Training + labeled evaluation corpus shared by the slower tests."""
    root = tmp_path_factory.mktemp("seedcorpus")
    train_dir = root / "train"
    eval_dir = root / "eval"
    corpus.generate(corpus.GenSpec(seed=GEN_TRAIN_SEED, n_benign=500, n_fraud=0), train_dir)
    corpus.generate(corpus.GenSpec(seed=GEN_EVAL_SEED, n_benign=50, n_fraud=50), eval_dir)
    return train_dir, eval_dir


@pytest.fixture(scope="session")
def trained_model(seed_corpus):
    train_dir, eval_dir = seed_corpus
    model = pipeline.train_on_benign_dir(
        train_dir, config=detector.TrainConfig(seed=TRAIN_SEED)
    )
    return pipeline.calibrate_on_dir(eval_dir, model)
