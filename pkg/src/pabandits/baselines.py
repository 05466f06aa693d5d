"""Reference principals for the multi-armed game.

``oracle_ucb_run``
    UCB that already knows every optimal incentive, i.e. UCB on the arm
    values ``mu``. The agent is assumed to comply with the exact optimum
    (an idealisation: at equality a tie-breaking agent might refuse).
``eps_greedy_run``
    Approximate baseline: a decaying epsilon-greedy principal that explores
    with the maximal incentive 1 and exploits with bracketed incentive
    estimates of its best empirical arm.
"""
from __future__ import annotations

import numpy as np

from . import _accel
from .env import MabInstance, TieBreak, optimal_incentives_mab
from .errors import ConfigError
from .ipa import BANDIT, Trajectory, noise_stream, policy_rng

APPROXIMATE_BASELINE_LABEL = "eps-greedy (approximate baseline)"


def _trajectory(inst, T, label, target, amount, chosen, reward, paid) -> Trajectory:
    return Trajectory(
        T=T,
        K=inst.K,
        n_search=0,
        fingerprint=inst.fingerprint(),
        label=label,
        phase=np.full(T, BANDIT, dtype=np.int8),
        offer_arm=np.asarray(target, dtype=np.int64),
        offer_amount=np.asarray(amount, dtype=np.float64),
        chosen_arm=np.asarray(chosen, dtype=np.int64),
        reward=np.asarray(reward, dtype=np.float64),
        paid=np.asarray(paid, dtype=np.float64),
        lower=np.full(T, np.nan),
        upper=np.full(T, np.nan),
    )


def _check_T(T) -> int:
    if int(T) != T or T < 2:
        raise ConfigError(f"T must be an integer >= 2, got {T!r}")
    return int(T)


def oracle_ucb_run(inst: MabInstance, T: int, seed=0) -> Trajectory:
    """Fixed-horizon UCB on the arm values ``theta - pi*`` with exact incentives."""
    T = _check_T(T)
    pi_star = optimal_incentives_mab(inst)
    z = noise_stream(seed, T)
    rec, chosen, reward, paid = _accel.ucb_play(inst.theta, inst.s, pi_star, inst.noise.sigma, z, T, obey=True)
    return _trajectory(inst, T, "oracle-ucb", rec, pi_star[rec], chosen, reward, paid)


def eps_greedy_run(
    inst: MabInstance,
    T: int,
    seed=0,
    m: float = 500,
    alpha: float = 1.0,
    tie: TieBreak = TieBreak.ADVERSARIAL,
) -> Trajectory:
    """Decaying epsilon-greedy principal (approximate baseline); see module docs."""
    T = _check_T(T)
    if m < 1 or alpha <= 0:
        raise ConfigError("eps-greedy needs m >= 1 and alpha > 0")
    z = noise_stream(seed, T)
    rng = policy_rng(seed)
    coin = rng.random(T)
    pick = rng.integers(inst.K, size=T)
    out = _accel.eps_principal_play(inst.theta, inst.s, inst.noise.sigma, z, coin, pick, m, alpha, T, tie.code)
    return _trajectory(inst, T, APPROXIMATE_BASELINE_LABEL, *out)
