"""
Forward-backward recursions over the output lattice, the sequence
log-probability and the analytic gradients of the log-loss with respect to
the transcription and prediction logits. Everything runs in natural-log space.

Array index t = 0..T-1 stands for transcription step t+1.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.core_math import LOG_ZERO, log_sum_exp
from app.errors import ZeroProbabilityError, get_logger
from app.joint import JointLattice

# exp() underflows to zero below this many nats
UNDERFLOW_NATS = 745.0


@dataclass
class AlignmentGrid:
    """Log forward and backward variables plus the sequence log-probability."""
    log_alpha: np.ndarray
    log_beta: np.ndarray
    log_prob: float

    @property
    def log_occupancy(self) -> np.ndarray:
        """log(alpha * beta) at every node."""
        return self.log_alpha + self.log_beta


def forward_pass(lattice: JointLattice) -> Tuple[np.ndarray, float]:
    """
    Evaluate the forward variables.

    alpha(t,u) = alpha(t-1,u) null(t-1,u) + alpha(t,u-1) y(t,u-1), alpha(1,0) = 1,
    and Pr(y|x) = alpha(T,U) null(T,U).

    Returns:
        Tuple of the (T x U+1) log-alpha grid and log Pr(y|x).
    """
    T, U = lattice.T, lattice.U
    log_null, log_label = lattice.log_null, lattice.log_label
    log_alpha = np.full((T, U + 1), LOG_ZERO)
    for t in range(T):
        for u in range(U + 1):
            if t == 0 and u == 0:
                log_alpha[t, u] = 0.0
                continue
            horizontal = log_alpha[t - 1, u] + log_null[t - 1, u] if t > 0 else LOG_ZERO
            vertical = log_alpha[t, u - 1] + log_label[t, u - 1] if u > 0 else LOG_ZERO
            log_alpha[t, u] = np.logaddexp(horizontal, vertical)
    return log_alpha, float(log_alpha[T - 1, U] + log_null[T - 1, U])


def backward_pass(lattice: JointLattice) -> np.ndarray:
    """
    Evaluate the backward variables.

    beta(t,u) = beta(t+1,u) null(t,u) + beta(t,u+1) y(t,u), with
    beta(T,U) = null(T,U); cells beyond the grid are the log-domain zero.

    Returns:
        The (T x U+1) log-beta grid.
    """
    T, U = lattice.T, lattice.U
    log_null, log_label = lattice.log_null, lattice.log_label
    log_beta = np.full((T, U + 1), LOG_ZERO)
    for t in reversed(range(T)):
        for u in reversed(range(U + 1)):
            if t == T - 1 and u == U:
                log_beta[t, u] = log_null[t, u]
                continue
            horizontal = log_beta[t + 1, u] + log_null[t, u] if t < T - 1 else LOG_ZERO
            vertical = log_beta[t, u + 1] + log_label[t, u] if u < U else LOG_ZERO
            log_beta[t, u] = np.logaddexp(horizontal, vertical)
    return log_beta


def alignment_grid(lattice: JointLattice) -> AlignmentGrid:
    """Run both recursions and bundle the result."""
    log_alpha, log_prob = forward_pass(lattice)
    return AlignmentGrid(log_alpha=log_alpha, log_beta=backward_pass(lattice), log_prob=log_prob)


def diagonal_log_sums(grid: AlignmentGrid) -> np.ndarray:
    """
    log-sum of alpha*beta over each diagonal t+u = n, for n = 1..T+U
    (1-based t). Every entry equals the sequence log-probability.
    """
    T, columns = grid.log_alpha.shape
    occupancy = grid.log_occupancy
    sums = []
    for n in range(T + columns - 1):
        cells = [occupancy[t, n - t] for t in range(T) if 0 <= n - t < columns]
        sums.append(log_sum_exp(cells))
    return np.array(sums)


def _first_blocked_cell(grid: AlignmentGrid) -> Tuple[int, int]:
    """
    First cell, in forward order, that no longer receives mass from the
    origin; the terminal cell when only the final null transition is blocked.
    Returns 1-based t.
    """
    log_alpha = grid.log_alpha
    T, columns = log_alpha.shape
    for t in range(T):
        for u in range(columns):
            if not log_alpha[t, u] > -UNDERFLOW_NATS:
                return t + 1, u
    return T, columns - 1


def loss_and_grads(lattice: JointLattice, grid: AlignmentGrid) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Log-loss and its gradients with respect to the transcription and
    prediction logits.

    The derivative of the loss through the softmax at node (t,u) reduces to
    Pr(k|t,u) * occ(t,u) - w_k(t,u), where w_null and w_label are the
    normalised path masses leaving the node by a null or label transition and
    occ = w_null + w_label. Past the terminal node beta is taken as 1, so the
    final null transition carries the full mass of alpha(T,U).

    Returns:
        Tuple of (loss in nats, dL/df of shape (T, K+1), dL/dg of shape (U+1, K+1)).

    Raises:
        ZeroProbabilityError: If the target probability underflows.
    """
    loss = -grid.log_prob
    if not np.isfinite(loss) or loss > UNDERFLOW_NATS:
        t, u = _first_blocked_cell(grid)
        get_logger().error(f"Target has zero probability under the model; lattice cell (t={t}, u={u}) blocks all paths")
        raise ZeroProbabilityError(
            f"target sequence has zero probability (loss {loss:.1f} nats); "
            f"first blocked lattice cell is t={t}, u={u}", cell=(t, u))

    T, U = lattice.T, lattice.U
    log_alpha, log_beta = grid.log_alpha, grid.log_beta

    beta_after_null = np.full((T, U + 1), LOG_ZERO)
    beta_after_null[:-1, :] = log_beta[1:, :]
    beta_after_null[T - 1, U] = 0.0
    beta_after_label = np.full((T, U + 1), LOG_ZERO)
    beta_after_label[:, :-1] = log_beta[:, 1:]

    w_null = np.exp(log_alpha + lattice.log_null + beta_after_null - grid.log_prob)
    w_label = np.exp(log_alpha + lattice.log_label + beta_after_label - grid.log_prob)

    d_logits = np.exp(lattice.log_probs) * (w_null + w_label)[:, :, None]
    d_logits[:, :, lattice.null_index] -= w_null
    if U > 0:
        rows = np.arange(T)[:, None]
        cols = np.arange(U)[None, :]
        d_logits[rows, cols, np.asarray(lattice.targets)[None, :]] -= w_label[:, :U]

    return float(loss), d_logits.sum(axis=1), d_logits.sum(axis=0)
