"""
Output-sequence beam search with prefix accumulation, length-normalised
selection and cached prediction-network states.
"""

import heapq
from bisect import bisect_right, insort
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.cache import PredictionCache
from app.core_math import log_sum_exp
from app.errors import ConfigError, DegenerateModelError, DimensionError, get_logger
from app.joint import joint_log_prob
from app.lstm import LstmState
from app.networks import PredictionNet

# emissions allowed within one transcription step, per input step
EMISSION_CAP_FACTOR = 10


@dataclass
class Hypothesis:
    """
    A decoded label sequence with its accumulated log-probability and the
    prediction-network state reached after feeding (null, *labels).
    """
    labels: Tuple[int, ...]
    log_prob: float
    state: LstmState
    g: np.ndarray

    @property
    def score(self) -> float:
        """Length-normalised log-probability; the empty sequence divides by 1."""
        return normalised_score(self.labels, self.log_prob)


def normalised_score(labels: Sequence[int], log_prob: float) -> float:
    return log_prob / max(len(labels), 1)


def ranking_key(labels: Tuple[int, ...], score: float) -> tuple:
    """Sort key placing higher scores first, then shorter, then lexicographically smaller sequences."""
    return (-score, len(labels), labels)


def _check_search_args(f: np.ndarray, width: int, nbest: int) -> np.ndarray:
    if width < 1:
        raise ConfigError(f"beam width must be at least 1, got {width}")
    if not 1 <= nbest <= width:
        raise ConfigError(f"n-best count must lie in [1, {width}], got {nbest}")
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] == 0:
        raise DimensionError("beam search needs a non-empty transcription sequence")
    return f


class _StepDistributions:
    """Memoised log Pr(k|y,t) for one transcription step."""

    def __init__(self, f_t: np.ndarray, cache: PredictionCache):
        self.f_t = f_t
        self.cache = cache
        self._table: Dict[tuple, np.ndarray] = {}

    def __call__(self, labels: tuple) -> np.ndarray:
        log_probs = self._table.get(labels)
        if log_probs is None:
            _, g = self.cache.get(labels)
            log_probs = joint_log_prob(self.f_t, g)
            self._table[labels] = log_probs
        return log_probs


def _accumulate_prefixes(candidates: Dict[tuple, float], dist: _StepDistributions) -> Dict[tuple, float]:
    """
    Add to every candidate the mass reaching it from its proper prefixes that
    are also candidates, using the probabilities from before this step.
    """
    accumulated = {}
    for labels, log_prob in candidates.items():
        if not any(labels[:i] in candidates for i in range(len(labels))):
            accumulated[labels] = log_prob
            continue
        terms = [log_prob]
        extension = 0.0
        for i in reversed(range(len(labels))):
            extension += dist(labels[:i])[labels[i]]
            prefix = labels[:i]
            if prefix in candidates:
                terms.append(candidates[prefix] + extension)
        accumulated[labels] = log_sum_exp(terms)
    return accumulated


def beam_search(f: np.ndarray, net: PredictionNet, width: int, nbest: int = 1,
                cache: PredictionCache = None) -> List[Hypothesis]:
    """
    Width-limited search for the output sequences with the highest
    length-normalised log-probability.

    At each transcription step the surviving hypotheses first absorb the
    probability of being reached from their surviving prefixes. The most
    probable candidate is then repeatedly moved to the finished set
    (multiplying in the null probability) and its one-label extensions are
    queued, until the finished set holds ``width`` hypotheses more probable
    than every queued one. Extensions that already were candidates at the
    start of the step are not queued again; their mass was absorbed by the
    prefix pass.

    Args:
        f: (T x K+1) transcription vectors.
        net: Prediction network.
        width: Beam width W >= 1.
        nbest: Number of results, 1 <= nbest <= width.
        cache: Optional prediction cache to reuse.

    Returns:
        list: ``nbest`` hypotheses, best length-normalised score first.

    Raises:
        ConfigError: If ``width`` or ``nbest`` is out of range.
        DegenerateModelError: If one step emits more than 10*T labels.
    """
    f = _check_search_args(f, width, nbest)
    cache = cache if cache is not None else PredictionCache(net)
    T = f.shape[0]
    null = net.alphabet_size
    emission_cap = EMISSION_CAP_FACTOR * T

    finished: Dict[tuple, float] = {(): 0.0}
    for t in range(T):
        dist = _StepDistributions(f[t], cache)
        candidates = _accumulate_prefixes(finished, dist)
        emitted = {labels: 0 for labels in candidates}
        queue = [(-log_prob, len(labels), labels) for labels, log_prob in candidates.items()]
        heapq.heapify(queue)

        finished = {}
        finished_scores: List[float] = []
        while queue:
            best_log_prob = -queue[0][0]
            more_probable = len(finished_scores) - bisect_right(finished_scores, best_log_prob)
            if more_probable >= width:
                break
            _, _, best = heapq.heappop(queue)
            log_probs = dist(best)
            closed = best_log_prob + log_probs[null]
            finished[best] = closed
            insort(finished_scores, closed)

            for k in range(null):
                child = best + (k,)
                if child in candidates:
                    continue
                emitted[child] = emitted[best] + 1
                if emitted[child] > emission_cap:
                    raise DegenerateModelError(
                        f"beam search emitted more than {emission_cap} labels within transcription step {t + 1}")
                heapq.heappush(queue, (-(best_log_prob + log_probs[k]), len(child), child))

        survivors = sorted(finished.items(), key=lambda item: ranking_key(item[0], item[1]))[:width]
        finished = dict(survivors)

    ranked = sorted(finished.items(), key=lambda item: ranking_key(item[0], normalised_score(*item)))
    get_logger().debug(f"Beam search over {T} steps finished; cache stats {cache.get_stats()}")
    results = []
    for labels, log_prob in ranked[:nbest]:
        state, g = cache.get(labels)
        results.append(Hypothesis(labels=labels, log_prob=float(log_prob), state=state, g=g))
    return results
