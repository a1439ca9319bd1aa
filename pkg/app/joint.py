"""
Joint output distribution Pr(k|t,u) = softmax(f_t + g_u) over the extended
alphabet, assembled into a lattice for one target sequence.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core_math import LOG_ZERO, exp, log_softmax
from app.errors import DimensionError, LabelRangeError

# Underflow floor for the product-of-exponentials normaliser.
_MIN_NORMALISER = 1e-300


@dataclass
class JointLattice:
    """
    Log output probabilities over a T x (U+1) grid.

    Attributes:
        log_probs: (T, U+1, K+1) array of log Pr(k|t,u); index K is the null label.
        log_label: (T, U+1) array of log Pr(y_{u+1}|t,u); ``-inf`` in the last column.
        log_null: (T, U+1) array of log Pr(null|t,u).
        targets: The target labels the lattice was built for.
    """
    log_probs: np.ndarray
    log_label: np.ndarray
    log_null: np.ndarray
    targets: tuple

    @property
    def T(self) -> int:
        return self.log_probs.shape[0]

    @property
    def U(self) -> int:
        return self.log_probs.shape[1] - 1

    @property
    def null_index(self) -> int:
        return self.log_probs.shape[2] - 1


def joint_log_prob(f_t: np.ndarray, g_u: np.ndarray) -> np.ndarray:
    """
    Log output distribution at a single lattice node.

    Raises:
        DimensionError: If the two vectors differ in length.
    """
    if f_t.shape != g_u.shape:
        raise DimensionError(f"transcription vector length {f_t.shape} differs from prediction vector {g_u.shape}")
    return log_softmax(f_t + g_u)


def _check_inputs(f: np.ndarray, g: np.ndarray, targets: Sequence[int]) -> None:
    if f.ndim != 2 or g.ndim != 2 or f.shape[1] != g.shape[1]:
        raise DimensionError(f"transcription {f.shape} and prediction {g.shape} matrices disagree")
    if g.shape[0] != len(targets) + 1:
        raise DimensionError(f"{g.shape[0]} prediction vectors for a target of length {len(targets)}")
    null_index = f.shape[1] - 1
    for label in targets:
        if not 0 <= label < null_index:
            raise LabelRangeError(f"target label {label} outside alphabet of size {null_index}")


def _extract(log_probs: np.ndarray, targets: Sequence[int]) -> JointLattice:
    T, columns, _ = log_probs.shape
    log_label = np.full((T, columns), LOG_ZERO)
    if targets:
        idx = np.asarray(targets, dtype=int)
        log_label[:, :-1] = log_probs[:, np.arange(len(targets)), idx]
    return JointLattice(log_probs=log_probs, log_label=log_label,
                        log_null=log_probs[:, :, -1].copy(), targets=tuple(int(y) for y in targets))


def build_lattice(f: np.ndarray, g: np.ndarray, targets: Sequence[int],
                  precompute: bool = True) -> JointLattice:
    """
    Build the joint lattice for one target.

    With ``precompute`` the exponentials of every max-shifted f_t and g_u are
    evaluated once, (T+U+1)(K+1) in total, and each node's normaliser is the
    log of the sum of their products. Without it a separate softmax runs at
    every node.

    Args:
        f: (T x K+1) transcription vectors.
        g: (U+1 x K+1) prediction vectors.
        targets: Labels y_1..y_U.
        precompute: Use the shared-exponential construction.

    Returns:
        JointLattice: Log probabilities and the extracted label/null grids.

    Raises:
        LabelRangeError: If a target label is outside the alphabet.
        DimensionError: If the shapes disagree.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    targets = [int(y) for y in targets]
    _check_inputs(f, g, targets)

    if not precompute:
        log_probs = np.array([[joint_log_prob(f_t, g_u) for g_u in g] for f_t in f])
        return _extract(log_probs, targets)

    f_max = f.max(axis=1)
    g_max = g.max(axis=1)
    f_exp = exp(f - f_max[:, None])
    g_exp = exp(g - g_max[:, None])
    normaliser = np.einsum('tk,uk->tu', f_exp, g_exp)
    with np.errstate(divide='ignore'):
        log_normaliser = np.log(normaliser) + f_max[:, None] + g_max[None, :]
    log_probs = f[:, None, :] + g[None, :, :] - log_normaliser[:, :, None]

    # nodes where the product underflowed fall back to a direct softmax
    for t, u in zip(*np.nonzero(normaliser < _MIN_NORMALISER)):
        log_probs[t, u] = joint_log_prob(f[t], g[u])
    return _extract(log_probs, targets)
