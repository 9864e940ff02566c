import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prefteach.models import TrainConfig, train
from prefteach.simulator import SimConfig, generate_corpus
from prefteach.types import load_default_schema


@pytest.fixture(scope="session")
def schema():
    return load_default_schema()


@pytest.fixture(scope="session")
def small_corpus(schema):
    dialogues, _stats = generate_corpus(schema, SimConfig(n_dialogues=120, seed=21))
    return dialogues


@pytest.fixture(scope="session")
def quick_bundle(schema):
    """A modest but competent bundle for manager/service/CLI tests."""
    dialogues, _ = generate_corpus(schema, SimConfig(n_dialogues=400, seed=5))
    return train(dialogues, schema, TrainConfig(epochs=6, lr=3e-3, batch_size=4, seed=0))
