"""
Prediction-state cache for beam search.

Keeps the LSTM hidden and cell state and the prediction vector of every label
prefix seen during a search, so extending a hypothesis by one label costs a
single prediction-network step.
"""

from collections import OrderedDict
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.errors import get_logger
from app.lstm import LstmState
from app.networks import PredictionNet, prediction_step

Entry = Tuple[LstmState, np.ndarray]


class PredictionCache:
    """
    Size-bounded cache of prediction-network outputs keyed by label prefix.

    Features:
    - Least-recently-used eviction
    - Misses rebuilt from the longest cached prefix
    - Cache statistics

    A cache belongs to one search; it is not shared between threads.
    """

    def __init__(self, net: PredictionNet, max_size: int = 200_000):
        """
        Initialize the cache.

        Args:
            net: Prediction network whose outputs are cached.
            max_size: Maximum number of prefixes to keep.
        """
        self.net = net
        self.max_size = max_size
        self._cache: 'OrderedDict[tuple, Entry]' = OrderedDict()
        self._stats = {
            'hits': 0,
            'misses': 0,
            'evictions': 0,
            'steps': 0
        }

    def _evict_if_needed(self) -> None:
        """Evict least recently used prefixes beyond the maximum size."""
        while len(self._cache) > self.max_size:
            self._cache.popitem(last=False)
            if self._stats['evictions'] == 0:
                get_logger().warning(f"Prediction cache exceeded {self.max_size} prefixes; evicting")
            self._stats['evictions'] += 1

    def _lookup(self, key: tuple) -> Optional[Entry]:
        entry = self._cache.get(key)
        if entry is not None:
            self._cache.move_to_end(key)
        return entry

    def _store(self, key: tuple, entry: Entry) -> None:
        self._cache[key] = entry
        self._evict_if_needed()

    def get(self, labels: Sequence[int]) -> Entry:
        """
        Return (state, prediction vector) after feeding (null, *labels).

        Args:
            labels: Label prefix.

        Returns:
            Tuple of the LSTM state and the length K+1 prediction vector.
        """
        key = tuple(labels)
        entry = self._lookup(key)
        if entry is not None:
            self._stats['hits'] += 1
            return entry
        self._stats['misses'] += 1

        depth = len(key)
        while depth > 0 and key[:depth] not in self._cache:
            depth -= 1
        entry = self._cache.get(key[:depth])
        if entry is None:
            self._stats['steps'] += 1
            entry = prediction_step(self.net, None, LstmState.zeros(self.net.hidden_size))
            self._store((), entry)
        for n in range(depth, len(key)):
            self._stats['steps'] += 1
            entry = prediction_step(self.net, key[n], entry[0])
            self._store(key[:n + 1], entry)
        return entry

    def has(self, labels: Sequence[int]) -> bool:
        return tuple(labels) in self._cache

    def clear(self) -> None:
        self._cache.clear()

    def get_stats(self) -> Dict[str, int]:
        """
        Get cache statistics.

        Returns:
            Dictionary containing cache statistics
        """
        return {
            **self._stats,
            'current_size': len(self._cache),
            'max_size': self.max_size
        }
