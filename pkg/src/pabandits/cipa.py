"""Contextual incentivized principal for the linear game.

Every round the principal checks whether the localization set ``S_t`` of the
agent's parameter is thinner than ``1/T`` along every pairwise direction of
the action set (the event ``E_t``).

* If not, it plays a binary-search round: it offers incentives on the pair of
  actions of largest width so that the agent's choice reveals on which side of
  a hyperplane through the approximate centroid ``s_hat`` the parameter lies,
  and cuts ``S_t`` accordingly.
* If so, it estimates the optimal incentive of every action from ``s_hat``
  (with a ``2/T`` safety margin), lets a corruption-robust linear bandit pick
  an action from the shifted rewards, and pays that estimate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import (
    ContextualInstance,
    TieBreak,
    agent_choice_contextual,
    contextual_round_optimum,
    optimal_incentive_contextual,
)
from .errors import ConfigError, InstanceError, InternalError, ProtocolViolation
from .geometry import (
    ConvexBody,
    DirectionBasis,
    centroid_cyl,
    cut,
    small_direction_threshold,
    update_small_directions,
    widths,
)

SEARCH, BANDIT = 0, 1
PAIR_TOL = 1e-12


# ---------------------------------------------------------------------------
# corruption-robust linear bandit


class CorruptionRobustBandit:
    """Weighted ridge regression with an optimistic, corruption-inflated radius.

    Each sample is weighted by ``min(1, alpha / |a|_{Sigma^-1})`` (norm under
    the current inverse design) so that no single round can move the estimate
    much; the radius is ``sqrt(lam) + sqrt(d log((1 + t/lam) / delta)) +
    alpha * C``.
    """

    def __init__(self, d: int, T: int, lam: float = 1.0, C: float = 4.0, alpha: float | None = None, delta: float | None = None):
        if lam <= 0:
            raise ConfigError("ridge parameter must be positive")
        self.d = int(d)
        self.lam = float(lam)
        self.C = float(C)
        self.alpha = math.sqrt(d) / 4 if alpha is None else float(alpha)
        self.delta = 1.0 / T if delta is None else float(delta)
        self.Sigma_inv = np.eye(self.d) / self.lam
        self.response = np.zeros(self.d)
        self.t = 0
        self.weights: list[float] = []

    @property
    def design(self) -> np.ndarray:
        return np.linalg.inv(self.Sigma_inv)

    @property
    def theta_hat(self) -> np.ndarray:
        return self.Sigma_inv @ self.response

    @property
    def beta(self) -> float:
        return (
            math.sqrt(self.lam)
            + math.sqrt(self.d * math.log((1 + self.t / self.lam) / self.delta))
            + self.alpha * self.C
        )

    def inverse_norms(self, A: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, self.Sigma_inv, A), 0.0))

    def weight(self, a: np.ndarray) -> float:
        n = float(self.inverse_norms(a[None, :])[0])
        return 1.0 if n <= self.alpha else self.alpha / n

    def select(self, A: np.ndarray) -> int:
        """Optimistic argmax over the rows of ``A`` (ties: first index)."""
        A = np.asarray(A, dtype=np.float64)
        idx = A @ self.theta_hat + self.beta * self.inverse_norms(A)
        return int(np.argmax(idx))

    def update(self, a: np.ndarray, y: float) -> float:
        a = np.asarray(a, dtype=np.float64)
        w = self.weight(a)
        Sa = self.Sigma_inv @ a
        denom = 1.0 + w * (a @ Sa)
        if not denom > 0:
            raise InternalError("design matrix lost positive definiteness")
        self.Sigma_inv = self.Sigma_inv - (w / denom) * np.outer(Sa, Sa)
        self.Sigma_inv = (self.Sigma_inv + self.Sigma_inv.T) / 2
        self.response += w * y * a
        self.t += 1
        self.weights.append(w)
        return w


def crobust_next(bandit: CorruptionRobustBandit, A_t: np.ndarray, rng: np.random.Generator | None = None) -> int:
    """Next action index for the corruption-robust subroutine (deterministic)."""
    return bandit.select(A_t)


# ---------------------------------------------------------------------------
# the event E_t


def _pair_directions(A: np.ndarray):
    m = A.shape[0]
    ii, jj = np.triu_indices(m, k=1)
    D = A[ii] - A[jj]
    n = np.linalg.norm(D, axis=1)
    keep = n >= PAIR_TOL
    return ii[keep], jj[keep], D[keep] / n[keep, None]


def max_pair_diameter(body: ConvexBody, A: np.ndarray) -> tuple[float, int, int]:
    """Largest width of the body over the pairwise directions of ``A``.

    Returns ``(width, i, j)`` with ``i < j`` (ties: lexicographically smallest
    pair) or ``(-inf, -1, -1)`` when ``A`` has no two distinct actions.
    """
    ii, jj, W = _pair_directions(np.asarray(A, dtype=np.float64))
    if ii.size == 0:
        return -math.inf, -1, -1
    ws = widths(body, W)
    k = int(np.argmax(ws))
    return float(ws[k]), int(ii[k]), int(jj[k])


def check_Et(body: ConvexBody, A_t: np.ndarray, T: int, margin: float = 0.0) -> bool:
    """True iff every pairwise width of the body is below ``1/T - margin``."""
    best, _, _ = max_pair_diameter(body, A_t)
    return best < 1.0 / T - margin


def estimate_incentive_ctx(s_hat: np.ndarray, A_t: np.ndarray, a: int, T: int) -> float:
    """``max_a' <s_hat, a'> - <s_hat, a> + 2/T``."""
    vals = np.asarray(A_t, dtype=np.float64) @ s_hat
    return float(vals.max() - vals[a] + 2.0 / T)


# ---------------------------------------------------------------------------
# per-body cache


class _BodyView:
    """Quantities derived from one (body, basis) pair, computed on demand.

    Besides the approximate centroid it keeps an orthonormal frame ``E`` with
    exact widths ``h``; ``sum_k |<w, e_k>| h_k`` bounds the width along any
    unit ``w``, so most exact width queries can be skipped.
    """

    def __init__(self, body: ConvexBody, basis: DirectionBasis, rng: np.random.Generator, cfg: "CipaConfig"):
        self.body = body
        self.basis = basis
        self.s_hat, self.samples = centroid_cyl(
            body, basis, rng, n_samples=cfg.n_samples, burn_in=cfg.burn_in, thin=cfg.thin, return_samples=True
        )
        d = body.d
        if d > 1:
            _, E = np.linalg.eigh(np.cov(self.samples, rowvar=False))
        else:
            E = np.eye(1)
        self.E = E
        self.h = widths(body, E.T)

    def max_pair(self, A: np.ndarray, threshold: float) -> tuple[float, int, int]:
        """Same as :func:`max_pair_diameter` when the answer is ``>= threshold``;
        otherwise only guarantees a value ``< threshold``."""
        ii, jj, W = _pair_directions(A)
        if ii.size == 0:
            return -math.inf, -1, -1
        bound = np.abs(W @ self.E) @ self.h + 1e-12
        live = np.flatnonzero(bound >= threshold)
        if live.size == 0:
            return float(bound.max()), -1, -1
        exact = widths(self.body, W[live])
        k = int(np.argmax(exact))  # first maximum: pairs are in lexicographic order
        return float(exact[k]), int(ii[live[k]]), int(jj[live[k]])


# ---------------------------------------------------------------------------
# state and rounds


@dataclass
class CipaConfig:
    """Tunables; the defaults are the reference parameterisation."""

    base_offer: float = 3.0
    et_margin: float = 1e-5
    n_samples: int = 4096
    burn_in: int = 200
    thin: int = 8
    recenter: bool = True
    strict: bool = True
    lam: float = 1.0
    corruption_budget: float = 4.0

    def __post_init__(self):
        if self.base_offer < 2:
            raise ConfigError("base_offer must be >= 2 so the agent picks one of the two offered actions")
        if self.n_samples < 2 or self.burn_in < 0 or self.thin < 1:
            raise ConfigError("sampler needs n_samples >= 2, burn_in >= 0, thin >= 1")


class CipaState:
    """Mutable state of one contextual run."""

    def __init__(self, d: int, T: int, seed=0, config: CipaConfig | None = None):
        self.d = int(d)
        self.T = int(T)
        self.cfg = config or CipaConfig()
        self.body = ConvexBody.ball(self.d)
        self.basis = DirectionBasis.empty(self.d, small_direction_threshold(self.T, self.d))
        self.bandit = CorruptionRobustBandit(self.d, self.T, lam=self.cfg.lam, C=self.cfg.corruption_budget)
        self.rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 2])
        self.cut_count = 0
        self.corruption_sum = 0.0
        self._view: _BodyView | None = None

    @property
    def view(self) -> _BodyView:
        if self._view is None or self._view.body is not self.body or self._view.basis is not self.basis:
            self._view = _BodyView(self.body, self.basis, self.rng, self.cfg)
        return self._view

    @property
    def s_hat(self) -> np.ndarray:
        return self.view.s_hat

    def event(self, A: np.ndarray) -> tuple[bool, float, int, int]:
        thr = 1.0 / self.T - self.cfg.et_margin
        best, i, j = self.view.max_pair(A, thr)
        return best < thr, best, i, j


@dataclass
class SearchOutcome:
    a1: int
    a2: int
    offer: dict
    chosen: int
    paid: float


def projected_volume_step(state: CipaState, A_t: np.ndarray, agent_oracle, T: int | None = None, pair=None) -> SearchOutcome:
    """One binary-search round on the widest pairwise direction.

    ``agent_oracle(offer_map, target)`` returns the index the agent plays.
    The body is cut through ``s_hat`` on the side the answer certifies, then
    thin directions are refreshed.
    """
    A = np.asarray(A_t, dtype=np.float64)
    view = state.view
    if pair is None:
        _, i, j = max_pair_diameter(state.body, A)
    else:
        i, j = pair
    if i < 0:
        raise InternalError("binary-search round needs two distinct actions")
    s_hat = view.s_hat
    gap = float(s_hat @ (A[i] - A[j]))
    a1, a2 = (i, j) if gap >= 0 else (j, i)
    gap = abs(gap)
    base = state.cfg.base_offer
    offer = {a1: base, a2: base + gap}
    chosen = int(agent_oracle(offer, a1))
    if chosen not in (a1, a2):
        raise ProtocolViolation(f"agent chose action {chosen} outside the offered pair ({a1}, {a2})")
    diff = A[a1] - A[a2]
    w = diff / np.linalg.norm(diff)
    x_t = float(s_hat @ w)
    state.body = cut(state.body, w, x_t, "ge" if chosen == a1 else "le")
    state.cut_count += 1
    new_view = state.view
    basis = update_small_directions(state.body, state.basis, state.rng, samples=new_view.samples)
    if len(basis) != len(state.basis):
        state.basis = basis
    return SearchOutcome(a1, a2, offer, chosen, offer[chosen])


# ---------------------------------------------------------------------------
# trajectory


@dataclass(eq=False)
class ContextualTrajectory:
    T: int
    d: int
    fingerprint: tuple
    label: str
    phase: np.ndarray
    pair_a1: np.ndarray
    pair_a2: np.ndarray
    offer_arm: np.ndarray
    offer_amount: np.ndarray
    chosen_arm: np.ndarray
    reward: np.ndarray
    value: np.ndarray
    paid: np.ndarray
    epsilon: np.ndarray
    cut_count: np.ndarray
    mu_star: np.ndarray
    s_star_inside: np.ndarray
    violations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def corruption_sum(self) -> float:
        return float(np.nansum(np.abs(self.epsilon)))

    def to_csv(self, path, inst: ContextualInstance) -> None:
        write_contextual_csv(path, self, regret_curve_ctx(self, inst))


def regret_increments_ctx(traj: ContextualTrajectory, inst: ContextualInstance, realized: bool = False) -> np.ndarray:
    """Per-round ``mu*_t - (<theta*, A_t> - paid)`` (or with the noisy reward)."""
    if traj.fingerprint != inst.fingerprint():
        raise InstanceError("trajectory was produced on a different instance")
    value = traj.reward if realized else traj.value
    return traj.mu_star - (value - traj.paid)


def regret_curve_ctx(traj: ContextualTrajectory, inst: ContextualInstance, realized: bool = False) -> np.ndarray:
    return np.cumsum(regret_increments_ctx(traj, inst, realized))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def write_contextual_csv(path, traj: ContextualTrajectory, cum_regret: np.ndarray) -> None:
    cols = [
        "t", "phase", "pair_a1", "pair_a2", "offer_arm", "offer_amount", "chosen_arm",
        "reward", "paid", "epsilon_t", "cut_count_so_far", "cum_regret",
    ]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(traj.T):
            w.writerow([
                i + 1,
                "search" if traj.phase[i] == SEARCH else "bandit",
                int(traj.pair_a1[i]), int(traj.pair_a2[i]), int(traj.offer_arm[i]),
                _fmt(traj.offer_amount[i]), int(traj.chosen_arm[i]), _fmt(traj.reward[i]),
                _fmt(traj.paid[i]), _fmt(traj.epsilon[i]), int(traj.cut_count[i]), _fmt(cum_regret[i]),
            ])


# ---------------------------------------------------------------------------
# the algorithm


def run_cipa(
    inst: ContextualInstance,
    T: int,
    seed=0,
    tie: TieBreak = TieBreak.ADVERSARIAL,
    config: CipaConfig | None = None,
) -> ContextualTrajectory:
    """Play ``T`` rounds of the contextual principal against the greedy agent.

    Round ``t`` uses the action set ``inst.action_set(t, seed)`` and noise
    draw ``t`` of the run's noise stream, so runs with different horizons
    share their randomness round by round.
    """
    if int(T) != T or T < 2:
        raise ConfigError(f"T must be an integer >= 2, got {T!r}")
    T = int(T)
    cfg = config or CipaConfig()
    state = CipaState(inst.d, T, seed, cfg)
    z = np.random.default_rng([*np.atleast_1d(seed).tolist(), 0]).standard_normal(T)
    sigma = inst.noise.sigma
    s_star, theta_star = inst.s_star, inst.theta_star

    phase = np.empty(T, dtype=np.int8)
    pair_a1 = np.full(T, -1, dtype=np.int64)
    pair_a2 = np.full(T, -1, dtype=np.int64)
    offer_arm = np.empty(T, dtype=np.int64)
    offer_amount = np.empty(T)
    chosen_arm = np.empty(T, dtype=np.int64)
    reward = np.empty(T)
    value = np.empty(T)
    paid = np.empty(T)
    epsilon = np.full(T, np.nan)
    cut_count = np.empty(T, dtype=np.int64)
    mu_star = np.empty(T)
    inside = np.empty(T, dtype=bool)
    violations = 0

    for k in range(T):
        A = inst.action_set(k + 1, seed)
        mu_star[k] = contextual_round_optimum(inst, A)
        et, _, i, j = state.event(A)
        if not et:
            def oracle(offer, target, A=A):
                return agent_choice_contextual(s_star, A, offer, tie, target=target)

            out = projected_volume_step(state, A, oracle, T, pair=(i, j))
            phase[k] = SEARCH
            pair_a1[k], pair_a2[k] = out.a1, out.a2
            offer_arm[k] = out.a1
            offer_amount[k] = out.offer[out.a1]
            c = out.chosen
            paid[k] = out.paid
        else:
            s_hat = state.s_hat
            a = crobust_next(state.bandit, A)
            pi_hat = estimate_incentive_ctx(s_hat, A, a, T)
            c = agent_choice_contextual(s_star, A, {a: pi_hat}, tie, target=a)
            eps = optimal_incentive_contextual(s_star, A, a) - pi_hat
            if c != a:
                violations += 1
                if cfg.strict:
                    raise ProtocolViolation(
                        f"round t={k + 1}: agent played action {c} instead of the recommended {a} "
                        f"at incentive {pi_hat!r} (optimal {pi_hat + eps!r})"
                    )
            phase[k] = BANDIT
            offer_arm[k] = a
            offer_amount[k] = pi_hat
            epsilon[k] = eps
            state.corruption_sum += abs(eps)
            paid[k] = pi_hat if c == a else 0.0
        x = float(A[c] @ theta_star + sigma * z[k])
        if phase[k] == BANDIT:
            y = x - pi_hat
            if cfg.recenter:
                y += float(np.max(A @ s_hat))
            state.bandit.update(A[a], y)
        chosen_arm[k] = c
        reward[k] = x
        value[k] = float(A[c] @ theta_star)
        cut_count[k] = state.cut_count
        inside[k] = state.body.contains(s_star, tol=0.0)

    return ContextualTrajectory(
        T=T,
        d=inst.d,
        fingerprint=inst.fingerprint(),
        label="cipa",
        phase=phase,
        pair_a1=pair_a1,
        pair_a2=pair_a2,
        offer_arm=offer_arm,
        offer_amount=offer_amount,
        chosen_arm=chosen_arm,
        reward=reward,
        value=value,
        paid=paid,
        epsilon=epsilon,
        cut_count=cut_count,
        mu_star=mu_star,
        s_star_inside=inside,
        violations=violations,
        meta={"directions": len(state.basis), "constraints": state.body.n_constraints},
    )


def cut_count_bound(d: int, T: int) -> float:
    """``192 d ln(d T)``: the almost-sure cap on binary-search rounds."""
    return 192.0 * d * math.log(d * T)
