"""Game instances, the greedy agent, and closed-form benchmarks.

Arms and actions are 0-indexed throughout the package.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _accel
from .errors import InstanceError


class TieBreak(Enum):
    """How the agent resolves utility ties."""

    ADVERSARIAL = "adversarial"  # against the principal's target
    LEXICOGRAPHIC = "lexicographic"  # smallest index

    @property
    def code(self) -> int:
        return _accel.ADVERSARIAL if self is TieBreak.ADVERSARIAL else _accel.LEXICOGRAPHIC


@dataclass(frozen=True)
class Noise:
    kind: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise InstanceError(f"noise.kind: unsupported noise kind {self.kind!r} (only 'gaussian')")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InstanceError(f"noise.sigma: must be a finite nonnegative real, got {self.sigma!r}")


@dataclass(frozen=True)
class IncentiveOffer:
    target: int
    amount: float

    def __post_init__(self):
        if not (self.amount >= 0 and math.isfinite(self.amount)):
            raise InstanceError(f"offer amount must be finite and >= 0, got {self.amount!r}")


def _vector(values, name) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{name}: not a numeric vector ({exc})") from None
    if arr.ndim != 1:
        raise InstanceError(f"{name}: expected a flat list, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise InstanceError(f"{name}[{bad[0]}]: not a finite real ({arr[bad[0]]!r})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MabInstance:
    """Multi-armed game: agent rewards ``s`` in [0,1], principal means ``theta``."""

    s: np.ndarray
    theta: np.ndarray
    noise: Noise = field(default_factory=Noise)

    def __post_init__(self):
        s = _vector(self.s, "s")
        theta = _vector(self.theta, "theta")
        if s.size < 1:
            raise InstanceError("k: need at least one arm")
        if theta.size != s.size:
            raise InstanceError(f"theta: length {theta.size} does not match k={s.size}")
        bad = np.flatnonzero((s < 0) | (s > 1))
        if bad.size:
            raise InstanceError(f"s[{bad[0]}]: {s[bad[0]]!r} is outside [0, 1]")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "theta", theta)

    @property
    def K(self) -> int:
        return self.s.size

    @property
    def theta_range(self) -> float:
        return float(self.theta.max() - self.theta.min())

    def fingerprint(self) -> tuple:
        return ("mab", self.s.tobytes(), self.theta.tobytes())

    def to_dict(self) -> dict:
        return {
            "k": self.K,
            "s": self.s.tolist(),
            "theta": self.theta.tolist(),
            "noise": {"kind": self.noise.kind, "sigma": self.noise.sigma},
        }


TABLE3 = MabInstance(
    s=[0.64, 0.99, 0.73, 0.61, 0.59],
    theta=[0.30, 0.24, 0.88, 0.07, 0.65],
)


@dataclass(frozen=True, eq=False)
class ContextualInstance:
    """Linear game in the unit ball with seeded random finite action sets.

    ``action_set(t, seed)`` depends only on ``(seed, t)`` (``seed`` is an
    integer or a sequence of integers): ``m`` directions
    uniform on the sphere, each scaled by a uniform radius in [0, 1].
    """

    theta_star: np.ndarray
    s_star: np.ndarray
    m: int = 10
    noise: Noise = field(default_factory=Noise)

    def __post_init__(self):
        th = _vector(self.theta_star, "theta_star")
        ss = _vector(self.s_star, "s_star")
        if th.size < 1:
            raise InstanceError("d: dimension must be >= 1")
        if ss.size != th.size:
            raise InstanceError(f"s_star: length {ss.size} does not match d={th.size}")
        for name, v in (("theta_star", th), ("s_star", ss)):
            if np.linalg.norm(v) > 1 + 1e-12:
                raise InstanceError(f"{name}: norm {np.linalg.norm(v):.6g} exceeds 1")
        if int(self.m) != self.m or self.m < 1:
            raise InstanceError(f"m: action-set size must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "theta_star", th)
        object.__setattr__(self, "s_star", ss)
        object.__setattr__(self, "m", int(self.m))

    @property
    def d(self) -> int:
        return self.theta_star.size

    def fingerprint(self) -> tuple:
        return ("ctx", self.theta_star.tobytes(), self.s_star.tobytes(), self.m)

    def action_set(self, t: int, seed) -> np.ndarray:
        rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), t, 17])
        g = rng.standard_normal((self.m, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * rng.random((self.m, 1))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "theta_star": self.theta_star.tolist(),
            "s_star": self.s_star.tolist(),
            "m": self.m,
            "noise": {"kind": self.noise.kind, "sigma": self.noise.sigma},
        }


# ---------------------------------------------------------------------------
# agent


def _check_arm(inst: MabInstance, a) -> int:
    if isinstance(a, (bool, np.bool_)) or int(a) != a or not 0 <= a < inst.K:
        raise InstanceError(f"arm index {a!r} outside [0, {inst.K})")
    return int(a)


def agent_choice_mab(inst: MabInstance, offer: IncentiveOffer, tie: TieBreak = TieBreak.ADVERSARIAL) -> int:
    """Greedy agent: an arm maximising ``s_a + 1[a = target] * amount``."""
    target = _check_arm(inst, offer.target)
    return int(_accel._greedy_arm_py(inst.s, target, float(offer.amount), tie.code))


def _greedy_index(utils: np.ndarray, target: int | None, tie: TieBreak) -> int:
    best = utils.max()
    tied = np.flatnonzero(utils == best)
    if tie is TieBreak.ADVERSARIAL and target is not None and tied.size > 1:
        tied = tied[tied != target]
    return int(tied[0])


def agent_choice_contextual(
    s_star: np.ndarray,
    actions: np.ndarray,
    offer: Mapping[int, float],
    tie: TieBreak = TieBreak.ADVERSARIAL,
    target: int | None = None,
) -> int:
    """Index into ``actions`` maximising ``<s*, a> + offer(a)``.

    ``offer`` maps action indices to nonnegative amounts. Under adversarial
    ties the agent avoids ``target`` (default: the first key of ``offer``).
    """
    n = len(actions)
    utils = np.asarray(actions, dtype=np.float64) @ np.asarray(s_star, dtype=np.float64)
    for i, amt in offer.items():
        if isinstance(i, (bool, np.bool_)) or int(i) != i or not 0 <= i < n:
            raise InstanceError(f"offer support index {i!r} is not an action of A_t (size {n})")
        if not (amt >= 0 and math.isfinite(amt)):
            raise InstanceError(f"offer amount for action {i} must be finite and >= 0, got {amt!r}")
        utils[int(i)] += amt
    if target is None and offer:
        target = int(next(iter(offer)))
    return _greedy_index(utils, target, tie)


# ---------------------------------------------------------------------------
# closed forms


def optimal_incentive_mab(inst: MabInstance, a: int) -> float:
    a = _check_arm(inst, a)
    return float(inst.s.max() - inst.s[a])


def optimal_incentives_mab(inst: MabInstance) -> np.ndarray:
    return inst.s.max() - inst.s


def benchmark_mu(inst: MabInstance) -> tuple[float, np.ndarray]:
    """Per-arm value of playing ``a`` at its infimal incentive, and the best one."""
    mu = inst.theta - optimal_incentives_mab(inst)
    return float(mu.max()), mu


def _action_index(actions: np.ndarray, a) -> int:
    if np.ndim(a) == 0:
        i = int(a)
        if not 0 <= i < len(actions):
            raise InstanceError(f"action index {a!r} outside A_t (size {len(actions)})")
        return i
    hits = np.flatnonzero(np.all(np.asarray(actions) == np.asarray(a, dtype=float), axis=1))
    if hits.size == 0:
        raise InstanceError(f"action {np.asarray(a).tolist()} is not an element of A_t")
    return int(hits[0])


def optimal_incentive_contextual(s_star: np.ndarray, actions: np.ndarray, a) -> float:
    """``max_{a'} <s*, a'> - <s*, a>``; ``a`` is an index or a vector of ``actions``."""
    i = _action_index(actions, a)
    vals = np.asarray(actions, dtype=np.float64) @ np.asarray(s_star, dtype=np.float64)
    return float(vals.max() - vals[i])


def contextual_round_optimum(inst: ContextualInstance, actions: np.ndarray) -> float:
    """Best expected principal utility for one round (closed form for finite A_t)."""
    return float(np.max(actions @ (inst.theta_star + inst.s_star)) - np.max(actions @ inst.s_star))


def draw_reward(inst, arm, rng: np.random.Generator) -> float:
    """One principal reward: ``theta_a + noise`` or ``<theta*, a> + noise``."""
    if isinstance(inst, MabInstance):
        mean = inst.theta[_check_arm(inst, arm)]
    else:
        mean = float(np.asarray(arm, dtype=np.float64) @ inst.theta_star)
    return float(mean + inst.noise.sigma * rng.standard_normal())


# ---------------------------------------------------------------------------
# JSON


def _noise_from(doc: dict) -> Noise:
    raw = doc.get("noise", {})
    if not isinstance(raw, dict):
        raise InstanceError("noise: expected an object {kind, sigma}")
    return Noise(kind=raw.get("kind", "gaussian"), sigma=float(raw.get("sigma", 1.0)))


def instance_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise InstanceError("instance document must be a JSON object")
    if "s" in doc or "theta" in doc:
        for key in ("s", "theta"):
            if key not in doc:
                raise InstanceError(f"{key}: missing field")
        inst = MabInstance(s=doc["s"], theta=doc["theta"], noise=_noise_from(doc))
        if "k" in doc and doc["k"] != inst.K:
            raise InstanceError(f"k: declared {doc['k']!r} but s has {inst.K} entries")
        return inst
    if "theta_star" in doc or "s_star" in doc:
        for key in ("theta_star", "s_star"):
            if key not in doc:
                raise InstanceError(f"{key}: missing field")
        inst = ContextualInstance(
            theta_star=doc["theta_star"], s_star=doc["s_star"], m=doc.get("m", 10), noise=_noise_from(doc)
        )
        if "d" in doc and doc["d"] != inst.d:
            raise InstanceError(f"d: declared {doc['d']!r} but theta_star has {inst.d} entries")
        return inst
    raise InstanceError("instance: expected fields {k, s, theta} or {d, theta_star, s_star}")


def loads_instance(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(doc)


def load_instance(path) -> MabInstance | ContextualInstance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: cannot read instance file ({exc.strerror})") from None
    try:
        return loads_instance(text)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from None


def dumps_instance(inst) -> str:
    return json.dumps(inst.to_dict(), indent=2)
