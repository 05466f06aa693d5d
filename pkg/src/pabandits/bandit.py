"""Black-box bandit subroutines fed with shifted histories, and the regret bound.

Logarithms written ``log`` are natural logarithms unless named ``log2``.
"""
from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

import numpy as np

from .env import MabInstance, benchmark_mu


class ShiftedHistory:
    """Append-only record of (recommended arm, uniform draw, shifted reward)."""

    def __init__(self, K: int):
        self.K = int(K)
        self._arm: list[int] = []
        self._u: list[float] = []
        self._x: list[float] = []

    def append(self, arm: int, u: float, shifted_reward: float) -> None:
        if not 0 <= arm < self.K:
            raise ValueError(f"arm {arm!r} outside [0, {self.K})")
        self._arm.append(int(arm))
        self._u.append(float(u))
        self._x.append(float(shifted_reward))

    def __len__(self) -> int:
        return len(self._arm)

    def record(self, i: int) -> tuple[int, float, float]:
        return self._arm[i], self._u[i], self._x[i]

    @property
    def arms(self) -> np.ndarray:
        return np.array(self._arm, dtype=np.int64)

    @property
    def uniforms(self) -> np.ndarray:
        return np.array(self._u)

    @property
    def rewards(self) -> np.ndarray:
        return np.array(self._x)


@runtime_checkable
class BanditPolicy(Protocol):
    """A policy maps the shifted history (and its own rng) to the next arm."""

    def next(self, history: ShiftedHistory, rng: np.random.Generator) -> int: ...


class _Stats:
    """Incremental per-arm counts and sums over the unseen tail of a history."""

    def __init__(self, K: int):
        self.counts = np.zeros(K)
        self.sums = np.zeros(K)
        self._seen = 0

    def sync(self, history: ShiftedHistory) -> None:
        if len(history) < self._seen:
            raise ValueError("history shrank; histories are append-only")
        for i in range(self._seen, len(history)):
            a, _, x = history.record(i)
            self.counts[a] += 1.0
            self.sums[a] += x
        self._seen = len(history)


def ucb_index(counts: np.ndarray, sums: np.ndarray, horizon: float) -> np.ndarray:
    """Fixed-horizon index ``mean_a + 2 sqrt(log(horizon) / n_a)``."""
    return sums / counts + 2.0 * np.sqrt(math.log(horizon) / counts)


def ucb_next(counts: np.ndarray, sums: np.ndarray, t: int, horizon: float) -> int:
    """Arm for round ``t`` (1-based): arms in order first, then the index argmax.

    Ties go to the smallest index.
    """
    K = counts.shape[0]
    if t <= K:
        return t - 1
    return int(np.argmax(ucb_index(counts, sums, horizon)))


class UCBPolicy:
    """Fixed-horizon UCB; ignores the rng."""

    name = "ucb"

    def __init__(self, K: int, horizon: float):
        if horizon < 2:
            raise ValueError("UCB horizon must be >= 2")
        self.K = int(K)
        self.horizon = float(horizon)
        self._stats = _Stats(self.K)

    def next(self, history: ShiftedHistory, rng: np.random.Generator | None = None) -> int:
        self._stats.sync(history)
        return ucb_next(self._stats.counts, self._stats.sums, len(history) + 1, self.horizon)


def eps_greedy_probability(t: int, K: int, m: float = 500, alpha: float = 1.0) -> float:
    """Exploration probability ``min(1, m K / (alpha t))`` at round ``t`` (1-based)."""
    return min(1.0, m * K / (alpha * t))


def eps_greedy_next(
    counts: np.ndarray,
    sums: np.ndarray,
    t: int,
    rng: np.random.Generator,
    m: float = 500,
    alpha: float = 1.0,
) -> int:
    """One decaying-epsilon decision; unpulled arms count as +inf when exploiting."""
    K = counts.shape[0]
    if rng.random() < eps_greedy_probability(t, K, m, alpha):
        return int(rng.integers(K))
    with np.errstate(divide="ignore", invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1.0), np.inf)
    return int(np.argmax(means))


class EpsGreedyPolicy:
    """Decaying epsilon-greedy on the shifted history."""

    name = "eps-greedy"

    def __init__(self, K: int, m: float = 500, alpha: float = 1.0):
        if m < 1 or alpha <= 0:
            raise ValueError("eps-greedy needs m >= 1 and alpha > 0")
        self.K = int(K)
        self.m = float(m)
        self.alpha = float(alpha)
        self._stats = _Stats(self.K)

    def next(self, history: ShiftedHistory, rng: np.random.Generator) -> int:
        self._stats.sync(history)
        return eps_greedy_next(self._stats.counts, self._stats.sums, len(history) + 1, rng, self.m, self.alpha)


def reward_gaps(inst: MabInstance) -> np.ndarray:
    """``max(theta + s) - (theta_a + s_a)`` per arm."""
    _, mu = benchmark_mu(inst)
    return mu.max() - mu


def corollary1_bound(inst: MabInstance, T: int) -> float:
    """Regret bound of the two-phase algorithm with the UCB subroutine.

    ``3 + 3 sum(gaps) + (1 + range(theta)) (1 + 9 K log2 T)
    + 8 min(sqrt(T K log T), sum_{gap > 0} 4 log T / gap)``.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    K = inst.K
    gaps = reward_gaps(inst)
    pos = gaps[gaps > 0]
    log_t = math.log(T)
    min_term = min(math.sqrt(T * K * log_t), float(np.sum(4.0 * log_t / pos)))
    return float(3 + 3 * gaps.sum() + (1 + inst.theta_range) * (1 + 9 * K * math.log2(T)) + 8 * min_term)
