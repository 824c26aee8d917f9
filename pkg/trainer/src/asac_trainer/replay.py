"""Recency-restricted prioritized replay.

Two mechanisms compose: the sampling window shrinks geometrically from the
whole buffer toward a floor as updates progress through a phase, and inside
the window records are drawn with probability proportional to a power of
their |TD-error| priority, with importance weights normalized to max one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PRIORITY_FLOOR = 1e-3


@dataclass
class ReplayRecord:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    priority: float = 1.0

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError(f"priority must be >= 0, got {self.priority}")


def rper_range(beta: int, b_max: int, recency: float, c_min: int,
               updates_per_phase: int) -> int:
    """Window size max{B_max * recency^(1000*beta/B), c_min} for update beta."""
    if not 1 <= beta <= updates_per_phase:
        raise ValueError(
            f"update index {beta} outside [1, {updates_per_phase}]")
    if not 0.0 < recency <= 1.0:
        raise ValueError(f"recency must lie in (0, 1], got {recency}")
    window = b_max * recency ** (1000.0 * beta / updates_per_phase)
    return int(max(math.ceil(window), c_min))


@dataclass
class RPERBuffer:
    capacity: int
    alpha: float = 0.6
    seed: int = 0
    _records: list = field(default_factory=list, repr=False)
    _next: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"priority exponent must be >= 0, got {self.alpha}")
        self._rng = np.random.default_rng(self.seed)

    def __len__(self) -> int:
        return len(self._records)

    def add(self, record: ReplayRecord) -> None:
        """Append in arrival order, overwriting the oldest when full."""
        if record.priority <= 0.0:
            top = max((r.priority for r in self._records), default=1.0)
            record.priority = top
        if len(self._records) < self.capacity:
            self._records.append(record)
        else:
            self._records[self._next] = record
            self._next = (self._next + 1) % self.capacity

    def _window_indices(self, window: int) -> np.ndarray:
        n = len(self._records)
        w = min(window, n)
        if n < self.capacity:
            return np.arange(n - w, n)
        # ring layout: newest element sits just before the write head
        return (self._next - w + np.arange(w)) % self.capacity

    def probabilities(self, window: int) -> tuple[np.ndarray, np.ndarray]:
        idx = self._window_indices(window)
        prios = np.array([self._records[i].priority for i in idx])
        scaled = np.power(np.maximum(prios, PRIORITY_FLOOR), self.alpha)
        return idx, scaled / scaled.sum()

    def sample(self, batch: int, window: int):
        """Draw `batch` records from the most recent `window` ones.

        Returns (records, indices, importance weights); weights correct the
        prioritized distribution toward uniform and are normalized to max 1.
        """
        idx, probs = self.probabilities(window)
        if batch > idx.size:
            raise ValueError(
                f"batch {batch} larger than window of {idx.size} records")
        chosen = self._rng.choice(idx.size, size=batch, replace=True, p=probs)
        weights = 1.0 / (idx.size * probs[chosen])
        weights /= weights.max()
        picked = idx[chosen]
        return [self._records[i] for i in picked], picked, weights

    def update_priorities(self, indices, td_errors) -> None:
        """Refresh priorities to |TD error| plus a small floor after use."""
        for i, err in zip(indices, td_errors):
            self._records[int(i)].priority = abs(float(err)) + PRIORITY_FLOOR
