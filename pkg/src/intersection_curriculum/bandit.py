"""Exponential-weight curriculum bandit with a delayed (target) weight copy.

Arm ``i`` is the scenario class with exactly ``i`` surrounding vehicles.
Rewards update a target weight vector every episode; the live weights that
drive sampling are overwritten with the target every ``sync_interval``
episodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

INIT_SCHEMES = ("exp", "equal")


def init_weights(scheme: str, n: int) -> np.ndarray:
    """Initial weights for arms ``0..n``.

    ``"exp"`` gives ``exp(-2 i)``, favouring sparse traffic; ``"equal"`` gives
    all ones.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    i = np.arange(n + 1, dtype=float)
    if scheme == "exp":
        return np.exp(-2.0 * i)
    if scheme == "equal":
        return np.ones(n + 1)
    raise ValueError(f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}")


def arm_probabilities(w: np.ndarray, eta: float) -> np.ndarray:
    """Softmax of the weights mixed with a uniform floor ``eta / (N + 1)``."""
    w = np.asarray(w, dtype=float)
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    z = np.exp(w - w.max())
    return (1.0 - eta) * z / z.sum() + eta / w.size


def sample_arm(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    u = rng.random()
    c = np.cumsum(p)
    k = int(np.searchsorted(c, u * c[-1], side="right"))
    return min(k, len(p) - 1)


def rescale_reward(r: float, r_min: float, r_max: float, k0: float = 1.0,
                   k1: float = 1.0) -> float:
    """Map ``r`` onto [-1, 1] using reward-history extrema (k0 = k1 = 1)."""
    den = k1 * r_max - k0 * r_min
    if den == 0.0:
        return 0.0
    return 2.0 * (r - k0 * r_min) / den - 1.0


@dataclass
class BanditConfig:
    eta: float = 0.2
    alpha: float = 0.1
    k0: float = 1.0
    k1: float = 1.0
    sync_interval: int = 1000
    init: str = "exp"

    def validate(self) -> None:
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sync_interval < 1:
            raise ValueError("sync_interval must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init!r}")


@dataclass
class BanditState:
    weights: np.ndarray
    target: np.ndarray
    config: BanditConfig
    r_min: float = math.inf
    r_max: float = -math.inf
    t: int = 0

    @classmethod
    def create(cls, n: int, config: Optional[BanditConfig] = None) -> "BanditState":
        config = config or BanditConfig()
        config.validate()
        w = init_weights(config.init, n)
        return cls(w, w.copy(), config)

    @property
    def n_arms(self) -> int:
        return self.weights.size

    def probabilities(self) -> np.ndarray:
        return arm_probabilities(self.weights, self.config.eta)

    def sample(self, rng: np.random.Generator) -> int:
        return sample_arm(self.probabilities(), rng)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "target": self.target.tolist(),
                "r_min": self.r_min, "r_max": self.r_max, "t": self.t}

    @classmethod
    def from_dict(cls, d: dict, config: BanditConfig) -> "BanditState":
        return cls(np.array(d["weights"], dtype=float), np.array(d["target"], dtype=float),
                   config, float(d["r_min"]), float(d["r_max"]), int(d["t"]))


def record_and_rescale(r: float, arm: int, state: BanditState) -> Tuple[float, float]:
    """Fold ``r`` into the reward extrema; return ``(r_norm, r_hat)``.

    ``r_hat`` is importance-weighted by the arm's current live probability.
    """
    state.r_min = min(state.r_min, r)
    state.r_max = max(state.r_max, r)
    cfg = state.config
    r_norm = rescale_reward(r, state.r_min, state.r_max, cfg.k0, cfg.k1)
    p = state.probabilities()[arm]
    return r_norm, r_norm / p


def update_target(arm: int, r_hat: float, state: BanditState) -> None:
    state.target[arm] += state.config.alpha * r_hat


def sync_if_due(state: BanditState) -> bool:
    """Copy target weights to the live weights after every ``sync_interval`` episodes."""
    if state.t > 0 and state.t % state.config.sync_interval == 0:
        state.weights = state.target.copy()
        return True
    return False


@dataclass
class BanditStep:
    t: int
    arm: int
    reward: float
    r_norm: float
    r_hat: float
    probabilities: np.ndarray
    weights: np.ndarray


def observe_episode(state: BanditState, arm: int, reward: float) -> BanditStep:
    """Full per-episode bandit bookkeeping: rescale, target update, count, sync."""
    p = state.probabilities()
    w = state.weights.copy()
    r_norm, r_hat = record_and_rescale(reward, arm, state)
    update_target(arm, r_hat, state)
    state.t += 1
    sync_if_due(state)
    return BanditStep(state.t, arm, reward, r_norm, r_hat, p, w)


def trace_header(n_arms: int) -> List[str]:
    return (["t", "arm", "r", "r_norm", "r_hat"] + [f"p_{i}" for i in range(n_arms)]
            + [f"w_{i}" for i in range(n_arms)])


def trace_row(step: BanditStep) -> list:
    return ([step.t, step.arm, step.reward, step.r_norm, step.r_hat]
            + step.probabilities.tolist() + step.weights.tolist())
