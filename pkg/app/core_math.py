"""
Numerical kernels shared by the transducer: log-space reductions, softmax,
one-hot encoding, dimension-checked products and the seeded random stream.

All arrays are float64 numpy arrays. The log-domain zero is ``-inf``.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from app.errors import DimensionError, LabelRangeError

LOG_ZERO = -np.inf


@dataclass
class ExpTally:
    """Number of scalar exponentials evaluated while the tally is active."""
    count: int = 0


_active_tally: ContextVar[Optional[ExpTally]] = ContextVar('exp_tally', default=None)


@contextmanager
def count_exp() -> Iterator[ExpTally]:
    """
    Count scalar exponential evaluations made through :func:`exp`.

    Yields:
        ExpTally: Tally whose ``count`` grows while the block runs.
    """
    tally = ExpTally()
    token = _active_tally.set(tally)
    try:
        yield tally
    finally:
        _active_tally.reset(token)


def exp(values: np.ndarray) -> np.ndarray:
    """Elementwise exponential, recorded by any active :func:`count_exp` tally."""
    values = np.asarray(values, dtype=np.float64)
    tally = _active_tally.get()
    if tally is not None:
        tally.count += values.size
    return np.exp(values)


def log_sum_exp(values: Sequence[float]) -> float:
    """
    Compute log(sum(exp(values))) without overflow.

    Args:
        values: Non-empty log-domain values; ``-inf`` entries are allowed.

    Returns:
        float: The log-domain sum (``-inf`` when every entry is ``-inf``).

    Raises:
        DimensionError: If ``values`` is empty.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DimensionError("log_sum_exp of an empty list")
    if np.all(values == LOG_ZERO):
        return LOG_ZERO
    return float(logsumexp(values))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """
    Normalise a logit vector into log probabilities.

    Args:
        logits: Finite real vector.

    Returns:
        np.ndarray: log probabilities, invariant to adding a constant to ``logits``.

    Raises:
        DimensionError: If ``logits`` holds non-finite values or is empty.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise DimensionError("log_softmax of an empty vector")
    if not np.all(np.isfinite(logits)):
        raise DimensionError("log_softmax requires finite logits")
    shifted = logits - np.max(logits)
    return shifted - np.log(np.sum(exp(shifted)))


def one_hot(k: Optional[int], size: int) -> np.ndarray:
    """
    Encode a label as a one-hot vector; ``None`` (the null label) is all zeros.

    Args:
        k: Label index in [0, size) or None.
        size: Alphabet size K.

    Returns:
        np.ndarray: Length ``size`` vector.

    Raises:
        LabelRangeError: If ``k`` is outside [0, size).
    """
    vector = np.zeros(size, dtype=np.float64)
    if k is None:
        return vector
    if not 0 <= k < size:
        raise LabelRangeError(f"label {k} outside alphabet of size {size}")
    vector[k] = 1.0
    return vector


def vec_mat(x: np.ndarray, w: np.ndarray, what: str = 'weights') -> np.ndarray:
    """
    Row-vector times matrix product ``x @ w`` with a dimension check.

    Raises:
        DimensionError: If ``len(x) != w.shape[0]``.
    """
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"{what}: input length {x.shape[-1]} does not match matrix rows {w.shape[0]}")
    return x @ w


def check_finite(values: np.ndarray, what: str) -> np.ndarray:
    """Raise DimensionError when ``values`` contains NaN or infinity."""
    if not np.all(np.isfinite(values)):
        raise DimensionError(f"{what} contains non-finite values")
    return values


def make_rng(seed: int) -> np.random.Generator:
    """Create the seeded PCG64 stream used for initialisation, noise and shuffling."""
    return np.random.Generator(np.random.PCG64(seed))
