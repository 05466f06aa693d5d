"""Per-arm binary search over incentive levels (multi-armed setting)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .env import IncentiveOffer
from .errors import ProtocolViolation

AgentOracle = Callable[[IncentiveOffer], int]


@dataclass
class IncentiveBracket:
    """Interval ``[lower, upper]`` known to contain the optimal incentive of one arm."""

    lower: float = 0.0
    upper: float = 1.0
    steps: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return self.lower + (self.upper - self.lower) / 2

    def update(self, accepted: bool) -> None:
        """Fold in one round of feedback at the midpoint offer."""
        m = self.mid
        if accepted:
            self.upper = m
        else:
            self.lower = m
        self.steps += 1


def search_steps(T: int) -> int:
    """``ceil(log2 T)`` evaluated exactly on the integer horizon."""
    if int(T) != T or T < 2:
        raise ValueError(f"horizon T must be an integer >= 2, got {T!r}")
    return (int(T) - 1).bit_length()


def binary_search_arm(
    agent_oracle: AgentOracle,
    a: int,
    n_steps: int,
    K: int | None = None,
    on_step: Callable[[IncentiveOffer, int, IncentiveBracket], None] | None = None,
) -> IncentiveBracket:
    """Bisect ``[0, 1]`` for arm ``a`` with ``n_steps`` offers at the midpoint.

    ``agent_oracle`` answers one offer with the arm the agent plays. If that
    arm is ``a`` the upper end moves to the midpoint, otherwise the lower end
    does. ``on_step`` (if given) sees each offer, the answer and the updated
    bracket. Passing ``K`` enables range checking of the answers.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    br = IncentiveBracket()
    for _ in range(n_steps):
        offer = IncentiveOffer(a, br.mid)
        chosen = agent_oracle(offer)
        if K is not None and not (0 <= chosen < K):
            raise ProtocolViolation(f"agent answered arm {chosen!r}, outside [0, {K})")
        br.update(chosen == a)
        if on_step is not None:
            on_step(offer, chosen, br)
    return br


def estimate_incentive(bracket: IncentiveBracket, T: int) -> float:
    """Safety-margin estimate ``upper + 1/T``; strictly above the optimum."""
    return bracket.upper + 1.0 / T
