"""Two-phase incentivized principal for the multi-armed game.

Phase 1 bisects the optimal incentive of every arm (``K * ceil(log2 T)``
rounds). Phase 2 offers ``upper + 1/T`` on whichever arm a black-box bandit
policy recommends and feeds that policy the reward minus the offer.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .bandit import BanditPolicy, EpsGreedyPolicy, ShiftedHistory, UCBPolicy
from .binsearch import IncentiveBracket, binary_search_arm, estimate_incentive, search_steps
from .env import IncentiveOffer, MabInstance, TieBreak, agent_choice_mab, benchmark_mu
from .errors import ConfigError, InstanceError, InternalError, ProtocolViolation

SEARCH, BANDIT = 0, 1
PHASE_NAMES = ("search", "bandit")


def noise_stream(seed, T: int) -> np.ndarray:
    """Standard normal draws; round ``t`` (1-based) uses entry ``t - 1``."""
    return np.random.default_rng([*np.atleast_1d(seed).tolist(), 0]).standard_normal(T)


def policy_rng(seed) -> np.random.Generator:
    return np.random.default_rng([*np.atleast_1d(seed).tolist(), 1])


@dataclass(eq=False)
class Trajectory:
    """Per-round log of one multi-armed run (arrays indexed by ``t - 1``)."""

    T: int
    K: int
    n_search: int
    fingerprint: tuple
    label: str
    phase: np.ndarray
    offer_arm: np.ndarray
    offer_amount: np.ndarray
    chosen_arm: np.ndarray
    reward: np.ndarray
    paid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    brackets: list[IncentiveBracket] = field(default_factory=list)
    pi_hat: np.ndarray | None = None
    violations: int = 0

    @property
    def bandit_rounds(self) -> np.ndarray:
        return self.phase == BANDIT

    def to_csv(self, path, inst: MabInstance) -> None:
        write_trajectory_csv(path, self, regret_curve(self, inst))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def write_trajectory_csv(path, traj: Trajectory, cum_regret: np.ndarray) -> None:
    cols = ["t", "phase", "offer_arm", "offer_amount", "chosen_arm", "reward", "paid", "cum_regret", "lower", "upper"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(traj.T):
            w.writerow(
                [
                    i + 1,
                    PHASE_NAMES[traj.phase[i]],
                    int(traj.offer_arm[i]),
                    _fmt(traj.offer_amount[i]),
                    int(traj.chosen_arm[i]),
                    _fmt(traj.reward[i]),
                    _fmt(traj.paid[i]),
                    _fmt(cum_regret[i]),
                    _fmt(traj.lower[i]),
                    _fmt(traj.upper[i]),
                ]
            )


# ---------------------------------------------------------------------------
# regret


def _check_same(traj: Trajectory, inst: MabInstance) -> None:
    if traj.fingerprint != inst.fingerprint():
        raise InstanceError("trajectory was produced on a different instance")


def regret_increments(traj: Trajectory, inst: MabInstance, realized: bool = False) -> np.ndarray:
    """Per-round ``mu* - (value of the played arm - incentive paid)``.

    The default uses mean rewards (the conditional expectation given the
    actions and offers); ``realized=True`` uses the noisy draws instead.
    """
    _check_same(traj, inst)
    mu_star, _ = benchmark_mu(inst)
    value = traj.reward if realized else inst.theta[traj.chosen_arm]
    return mu_star - (value - traj.paid)


def regret_curve(traj: Trajectory, inst: MabInstance, realized: bool = False) -> np.ndarray:
    return np.cumsum(regret_increments(traj, inst, realized))


def regret_decomposition(traj: Trajectory, inst: MabInstance, tol: float = 1e-9) -> dict[str, float]:
    """Search-phase and bandit-phase regret, each summed on its own rounds."""
    inc = regret_increments(traj, inst)
    search = float(np.sum(inc[traj.phase == SEARCH]))
    bandit = float(np.sum(inc[traj.phase == BANDIT]))
    total = float(np.cumsum(inc)[-1])
    if abs(search + bandit - total) > tol:
        raise InternalError(f"regret decomposition mismatch: {search} + {bandit} != {total}")
    return {"search": search, "bandit": bandit, "total": total}


# ---------------------------------------------------------------------------
# the algorithm


def minimum_horizon(K: int) -> int:
    """Smallest ``T`` with ``T > K * ceil(log2 T)``."""
    T = 2
    while T <= K * search_steps(T):
        T += 1
    return T


def _make_policy(policy, K: int, horizon: int, eps_params: dict | None):
    if isinstance(policy, str):
        if policy == "ucb":
            return UCBPolicy(K, horizon)
        if policy == "eps-greedy":
            return EpsGreedyPolicy(K, **(eps_params or {}))
        raise ConfigError(f"unknown subroutine {policy!r} (expected 'ucb' or 'eps-greedy')")
    if not isinstance(policy, BanditPolicy):
        raise ConfigError(f"policy {policy!r} does not implement next(history, rng)")
    return policy


def run_ipa(
    inst: MabInstance,
    policy="ucb",
    T: int = 10_000,
    seed=0,
    tie: TieBreak = TieBreak.ADVERSARIAL,
    strict: bool = True,
    eps_params: dict | None = None,
) -> Trajectory:
    """Play ``T`` rounds of the two-phase principal.

    ``policy`` is ``"ucb"`` (compiled loop), ``"eps-greedy"``, or any
    :class:`BanditPolicy`. UCB uses the bandit-phase length as its horizon.
    With ``strict`` a bandit round whose agent ignores the recommendation
    raises :class:`ProtocolViolation`; otherwise it is counted.
    """
    K = inst.K
    if int(T) != T or T < 2:
        raise ConfigError(f"T must be an integer >= 2, got {T!r}")
    T = int(T)
    n_steps = search_steps(T)
    n_search = K * n_steps
    if T <= n_search:
        raise ConfigError(
            f"T={T} is too small for K={K}: the search phase alone takes {n_search} rounds; "
            f"the minimum horizon is T={minimum_horizon(K)}"
        )
    n_bandit = T - n_search
    pol = _make_policy(policy, K, n_bandit, eps_params)

    z = noise_stream(seed, T)
    sigma = inst.noise.sigma
    offer_arm = np.empty(T, dtype=np.int64)
    offer_amount = np.empty(T)
    chosen = np.empty(T, dtype=np.int64)
    reward = np.empty(T)
    paid = np.empty(T)
    lower = np.full(T, np.nan)
    upper = np.full(T, np.nan)
    phase = np.full(T, BANDIT, dtype=np.int8)
    phase[:n_search] = SEARCH

    t = 0

    def oracle(offer: IncentiveOffer) -> int:
        c = agent_choice_mab(inst, offer, tie)
        offer_arm[t] = offer.target
        offer_amount[t] = offer.amount
        chosen[t] = c
        reward[t] = inst.theta[c] + sigma * z[t]
        paid[t] = offer.amount if c == offer.target else 0.0
        return c

    def on_step(offer, c, br):
        nonlocal t
        lower[t], upper[t] = br.lower, br.upper
        t += 1

    brackets = [binary_search_arm(oracle, a, n_steps, K=K, on_step=on_step) for a in range(K)]
    pi_hat = np.array([estimate_incentive(br, T) for br in brackets])

    if policy == "ucb":
        rec, c, x, p = _accel.ucb_play(inst.theta, inst.s, pi_hat, sigma, z[n_search:], n_bandit, tie.code)
        offer_arm[n_search:] = rec
        offer_amount[n_search:] = pi_hat[rec]
        chosen[n_search:] = c
        reward[n_search:] = x
        paid[n_search:] = p
    else:
        rng = policy_rng(seed)
        hist = ShiftedHistory(K)
        for i in range(n_search, T):
            u = rng.random()
            a = int(pol.next(hist, rng))
            if not 0 <= a < K:
                raise ProtocolViolation(f"policy recommended arm {a!r}, outside [0, {K})")
            c = agent_choice_mab(inst, IncentiveOffer(a, pi_hat[a]), tie)
            x = inst.theta[c] + sigma * z[i]
            offer_arm[i] = a
            offer_amount[i] = pi_hat[a]
            chosen[i] = c
            reward[i] = x
            paid[i] = pi_hat[a] if c == a else 0.0
            hist.append(a, u, x - pi_hat[a])

    bad = np.flatnonzero(chosen[n_search:] != offer_arm[n_search:])
    if bad.size and strict:
        i = n_search + int(bad[0])
        raise ProtocolViolation(
            f"round t={i + 1}: agent played arm {chosen[i]} instead of the recommended arm "
            f"{offer_arm[i]} at incentive {offer_amount[i]!r}"
        )
    name = policy if isinstance(policy, str) else getattr(pol, "name", type(pol).__name__)
    return Trajectory(
        T=T,
        K=K,
        n_search=n_search,
        fingerprint=inst.fingerprint(),
        label=f"ipa+{name}",
        phase=phase,
        offer_arm=offer_arm,
        offer_amount=offer_amount,
        chosen_arm=chosen,
        reward=reward,
        paid=paid,
        lower=lower,
        upper=upper,
        brackets=brackets,
        pi_hat=pi_hat,
        violations=int(bad.size),
    )
