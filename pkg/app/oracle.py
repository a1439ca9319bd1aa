"""
Brute-force reference computations for tests: explicit alignment
enumeration, probability-space path sums and exhaustive decoding.

These are only usable on tiny instances; each guards its enumeration size.
"""

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.decoder import normalised_score, ranking_key
from app.errors import OracleGuardError
from app.joint import JointLattice, build_lattice
from app.lattice import forward_pass
from app.networks import PredictionNet, predict_sequence

ENUMERATION_GUARD = 10 ** 6


@dataclass(frozen=True)
class Alignment:
    """
    A monotone lattice path. ``steps`` holds, per move, either the index u of
    the target label emitted (a vertical move) or None for a null move; the
    last step is always the terminal null.
    """
    steps: Tuple[Optional[int], ...]

    def symbols(self, targets: Sequence[int], null_index: int) -> Tuple[int, ...]:
        """The path as a sequence over the extended alphabet."""
        return tuple(null_index if step is None else targets[step] for step in self.steps)

    def collapse(self, targets: Sequence[int]) -> Tuple[int, ...]:
        """Remove the null moves, recovering the target sequence."""
        return tuple(targets[step] for step in self.steps if step is not None)


def enumerate_alignments(T: int, U: int) -> List[Alignment]:
    """
    All C(T-1+U, U) interleavings of T-1 null moves and U label moves,
    each followed by the terminal null.
    """
    alignments = []
    for label_positions in itertools.combinations(range(T - 1 + U), U):
        chosen = set(label_positions)
        steps, u = [], 0
        for position in range(T - 1 + U):
            if position in chosen:
                steps.append(u)
                u += 1
            else:
                steps.append(None)
        steps.append(None)
        alignments.append(Alignment(tuple(steps)))
    return alignments


def path_probability(lattice: JointLattice, alignment: Alignment) -> float:
    """Product of the transition probabilities along one path, in probability space."""
    probability, t, u = 1.0, 0, 0
    for step in alignment.steps:
        if step is None:
            probability *= math.exp(lattice.log_null[t, u])
            t += 1
        else:
            probability *= math.exp(lattice.log_label[t, u])
            u += 1
    return probability


def brute_force_log_prob(lattice: JointLattice) -> float:
    """
    log Pr(y|x) as the sum over every alignment of its path probability.

    Raises:
        OracleGuardError: If more than 10**6 alignments would be enumerated.
    """
    T, U = lattice.T, lattice.U
    paths = math.comb(T - 1 + U, U)
    if paths > ENUMERATION_GUARD:
        raise OracleGuardError(f"{paths} alignments exceed the enumeration guard of {ENUMERATION_GUARD}")
    total = sum(path_probability(lattice, alignment) for alignment in enumerate_alignments(T, U))
    return math.log(total) if total > 0 else -math.inf


def sequence_log_prob(f: np.ndarray, net: PredictionNet, labels: Sequence[int]) -> float:
    """log Pr(labels|x) by running the prediction network and the forward pass from scratch."""
    g, _ = predict_sequence(net, labels)
    _, log_prob = forward_pass(build_lattice(f, g, labels))
    return log_prob


def exhaustive_decode(f: np.ndarray, net: PredictionNet, max_len: int) -> List[Tuple[Tuple[int, ...], float]]:
    """
    Score every label sequence up to ``max_len`` and rank by length-normalised
    log-probability, with the decoder's tie-breaking.

    Returns:
        list: (labels, log_prob) pairs, best first.

    Raises:
        OracleGuardError: If (K+1)**max_len exceeds 10**6.
    """
    K = net.alphabet_size
    if (K + 1) ** max_len > ENUMERATION_GUARD:
        raise OracleGuardError(f"{(K + 1) ** max_len} sequences exceed the enumeration guard of {ENUMERATION_GUARD}")
    scored = []
    for length in range(max_len + 1):
        for labels in itertools.product(range(K), repeat=length):
            scored.append((labels, sequence_log_prob(f, net, labels)))
    scored.sort(key=lambda item: ranking_key(item[0], normalised_score(*item)))
    return scored
