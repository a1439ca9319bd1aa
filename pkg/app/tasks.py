"""
Synthetic transduction tasks for desk-scale experiments.

Each input step is a noisy one-hot vector of a symbol in [0, K):
- copy:   target = the input symbols (U = T)
- double: every input symbol twice (U = 2T, output longer than input)
- dedup:  adjacent repeats collapsed (U <= T)
"""

from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from sklearn.model_selection import train_test_split

from app.core_math import make_rng, one_hot
from app.datasets import Dataset, DatasetRecord
from app.errors import ConfigError, get_logger


def copy_targets(symbols: Sequence[int]) -> Tuple[int, ...]:
    return tuple(symbols)


def double_targets(symbols: Sequence[int]) -> Tuple[int, ...]:
    return tuple(s for symbol in symbols for s in (symbol, symbol))


def dedup_targets(symbols: Sequence[int]) -> Tuple[int, ...]:
    collapsed: List[int] = []
    for symbol in symbols:
        if not collapsed or collapsed[-1] != symbol:
            collapsed.append(symbol)
    return tuple(collapsed)


TASKS: Dict[str, Callable[[Sequence[int]], Tuple[int, ...]]] = {
    'copy': copy_targets,
    'double': double_targets,
    'dedup': dedup_targets,
}


def generate_task(name: str, count: int, min_length: int, max_length: int, alphabet_size: int,
                  seed: int, feature_dim: int = None, input_noise: float = 0.1) -> Dataset:
    """
    Generate ``count`` records of a toy task.

    Args:
        name: One of ``copy``, ``double``, ``dedup``.
        count: Number of records.
        min_length: Shortest input length T.
        max_length: Longest input length T.
        alphabet_size: K >= 2.
        seed: Seed for symbols, lengths and feature noise.
        feature_dim: Feature width (defaults to K, must be >= K).
        input_noise: Std of the Gaussian noise added to the one-hot features.

    Returns:
        Dataset: The generated records, ids ``<name>-00000`` onwards.

    Raises:
        ConfigError: On an unknown task or invalid sizes.
    """
    if name not in TASKS:
        raise ConfigError(f"unknown task {name!r}; choose from {', '.join(TASKS)}")
    if alphabet_size < 2:
        raise ConfigError(f"tasks need an alphabet of at least 2 labels, got {alphabet_size}")
    feature_dim = feature_dim or alphabet_size
    if feature_dim < alphabet_size:
        raise ConfigError(f"feature width {feature_dim} cannot one-hot encode {alphabet_size} symbols")
    if not 1 <= min_length <= max_length:
        raise ConfigError(f"invalid length range [{min_length}, {max_length}]")

    rng = make_rng(seed)
    targets_for = TASKS[name]
    dataset = Dataset(feature_dim=feature_dim, alphabet_size=alphabet_size)
    for n in range(count):
        length = int(rng.integers(min_length, max_length + 1))
        symbols = [int(s) for s in rng.integers(0, alphabet_size, size=length)]
        features = np.array([one_hot(s, feature_dim) for s in symbols])
        features += rng.normal(0.0, input_noise, size=features.shape)
        dataset.records.append(DatasetRecord(id=f"{name}-{n:05d}", features=features,
                                             labels=targets_for(symbols)))
    get_logger().info(f"Generated {count} {name} records (T in [{min_length}, {max_length}], K={alphabet_size})")
    return dataset


def split_dataset(dataset: Dataset, validation_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Shuffle-split a dataset into training and validation parts."""
    train_records, valid_records = train_test_split(dataset.records, test_size=validation_fraction,
                                                    random_state=seed % 2 ** 32)
    return (Dataset(dataset.feature_dim, dataset.alphabet_size, list(train_records)),
            Dataset(dataset.feature_dim, dataset.alphabet_size, list(valid_records)))
