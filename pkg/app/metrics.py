"""
Evaluation metrics: label error rate, bits per target and the next-label
misclassification rate of the stand-alone prediction network.
"""

import math
from typing import Sequence

import Levenshtein
import numpy as np

from app.errors import DimensionError


def edit_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Levenshtein distance with unit insertion, deletion and substitution costs."""
    return Levenshtein.distance(list(a), list(b))


def error_rate(outputs: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> float:
    """
    Summed edit distance divided by total target length, as a percentage.

    Args:
        outputs: Decoded label sequences.
        targets: Reference label sequences, same count as ``outputs``.

    Returns:
        float: Error rate in percent.

    Raises:
        DimensionError: If the lists differ in length or all targets are empty.
    """
    if len(outputs) != len(targets):
        raise DimensionError(f"{len(outputs)} outputs for {len(targets)} targets")
    total_length = sum(len(target) for target in targets)
    if total_length == 0:
        raise DimensionError("error rate is undefined for empty targets")
    errors = sum(edit_distance(output, target) for output, target in zip(outputs, targets))
    return 100.0 * errors / total_length


def bits_per_target(total_nats: float, total_labels: int) -> float:
    """Convert a summed log-loss in nats to average bits per target label."""
    return total_nats / math.log(2) / total_labels


def misclassification_rate(guesses: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> float:
    """
    Percentage of target positions whose guessed label is wrong.

    Args:
        guesses: One guessed label per target position.
        targets: Reference label sequences.

    Raises:
        DimensionError: If a guess sequence does not match its target length
            or all targets are empty.
    """
    if len(guesses) != len(targets):
        raise DimensionError(f"{len(guesses)} guess sequences for {len(targets)} targets")
    errors, total = 0, 0
    for guess, target in zip(guesses, targets):
        if len(guess) != len(target):
            raise DimensionError(f"{len(guess)} guesses for a target of length {len(target)}")
        errors += int(np.sum(np.asarray(guess, dtype=int) != np.asarray(target, dtype=int)))
        total += len(target)
    if total == 0:
        raise DimensionError("misclassification rate is undefined for empty targets")
    return 100.0 * errors / total
