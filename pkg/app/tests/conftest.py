"""
Shared fixtures: a test application, seeded tiny models and dataset files.
"""

import numpy as np
import pytest

from app import create_app
from app.core_math import make_rng
from app.datasets import write_dataset
from app.models import TransducerModel
from app.tasks import generate_task
from config import TestingConfig


@pytest.fixture
def app():
    app = create_app(TestingConfig)
    with app.app_context():
        yield app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def rng():
    return make_rng(1234)


def tiny_model(seed: int = 0, alphabet_size: int = 3, feature_dim: int = 3, hidden: int = 3,
               init_range: float = 0.5) -> TransducerModel:
    return TransducerModel.initialise(alphabet_size, feature_dim, hidden, hidden, init_range, make_rng(seed))


@pytest.fixture
def model():
    return tiny_model()


@pytest.fixture
def features(rng):
    return rng.normal(size=(4, 3))


@pytest.fixture
def copy_files(tmp_path):
    """Small copy-task train/valid files matching ``tiny_model`` dimensions."""
    train = generate_task('copy', 6, 2, 4, alphabet_size=3, seed=5)
    valid = generate_task('copy', 3, 2, 4, alphabet_size=3, seed=6)
    train_path, valid_path = tmp_path / 'train.jsonl', tmp_path / 'valid.jsonl'
    write_dataset(train, str(train_path))
    write_dataset(valid, str(valid_path))
    return str(train_path), str(valid_path)


def random_logits(seed: int, rows: int, width: int, scale: float = 1.0) -> np.ndarray:
    return make_rng(seed).normal(0.0, scale, size=(rows, width))
