"""ADWIN change detector over values in [0, 1].

The window is an exponential histogram: level ``i`` holds buckets that each
summarise ``2**i`` consecutive observations, with at most
``max_buckets_per_level`` buckets per level, so the number of buckets grows
with the log of the window width.  After each insertion the window is split
at every bucket boundary into an older head and a newer tail; while some
split shows a mean difference at or above the cut threshold, the oldest
bucket is discarded.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass


def cut_threshold(m: float, delta_prime: float, n_checks: int = 1) -> float:
    """Cut threshold for sub-windows whose sizes have harmonic mean ``m``.

    ``n_checks`` is the number of splits tested in the same step and enters
    as a union-bound correction on ``delta_prime``.
    """
    if m <= 0:
        raise ValueError(f"harmonic mean of sub-window sizes must be positive, got {m}")
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta_prime must lie in (0, 1), got {delta_prime}")
    if n_checks < 1:
        raise ValueError("n_checks must be >= 1")
    return math.sqrt(math.log(4.0 * n_checks / delta_prime) / (2.0 * m))


@dataclass(frozen=True)
class DriftReport:
    detected: bool
    instances_dropped: int
    window_mean_after: float


class AdwinDetector:
    def __init__(self, delta_prime: float = 0.002, max_buckets_per_level: int = 5):
        if not 0 < delta_prime < 1:
            raise ValueError(f"delta_prime must lie in (0, 1), got {delta_prime}")
        if max_buckets_per_level < 2:
            raise ValueError("need at least two buckets per level")
        self.delta_prime = delta_prime
        self.max_buckets_per_level = max_buckets_per_level
        self.reset()

    def reset(self) -> None:
        # levels[i] lists bucket sums for buckets of 2**i observations, oldest first
        self.levels: list[list[float]] = [[]]
        self.total = 0.0
        self.width = 0
        self.n_detections = 0

    def clone(self) -> AdwinDetector:
        return copy.deepcopy(self)

    @property
    def mean(self) -> float:
        return self.total / self.width if self.width else 0.0

    @property
    def n_buckets(self) -> int:
        return sum(len(level) for level in self.levels)

    def add_observation(self, value: float) -> DriftReport:
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"ADWIN observations must lie in [0, 1], got {value}")
        self.levels[0].append(value)
        self.total += value
        self.width += 1
        self._compress()

        dropped = 0
        while self._should_cut():
            dropped += self._drop_oldest()
        if dropped:
            self.n_detections += 1
        return DriftReport(dropped > 0, dropped, self.mean)

    def _compress(self) -> None:
        level = 0
        while len(self.levels[level]) > self.max_buckets_per_level:
            a = self.levels[level].pop(0)
            b = self.levels[level].pop(0)
            if level + 1 == len(self.levels):
                self.levels.append([])
            self.levels[level + 1].append(a + b)
            level += 1

    def _drop_oldest(self) -> int:
        top = len(self.levels) - 1
        while not self.levels[top]:
            top -= 1
        s = self.levels[top].pop(0)
        size = 1 << top
        self.width -= size
        self.total -= s
        while len(self.levels) > 1 and not self.levels[-1]:
            self.levels.pop()
        if self.width == 0:
            self.total = 0.0
        return size

    def _should_cut(self) -> bool:
        n_checks = self.n_buckets - 1
        if n_checks < 1:
            return False
        # eps^2 = log_term * (1/n0 + 1/n1) / 4 for the harmonic mean of n0, n1
        log_term = math.log(4.0 * n_checks / self.delta_prime) / 4.0
        total, width = self.total, self.width
        n0 = 0
        s0 = 0.0
        for level in range(len(self.levels) - 1, -1, -1):
            size = 1 << level
            for s in self.levels[level]:
                n0 += size
                s0 += s
                n1 = width - n0
                if n1 == 0:
                    return False
                diff = s0 / n0 - (total - s0) / n1
                if diff * diff >= log_term * (1.0 / n0 + 1.0 / n1):
                    return True
        return False
