"""Beta-Bernoulli belief state, Bernoulli KL divergence and discrete entropy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KL_CLAMP = 1e-9
DEFAULT_PRIOR = (1.0, 1.0)


@dataclass(frozen=True)
class BetaPosterior:
    """Per-arm Beta(b1, b2) beliefs over Bernoulli means.

    ``b1`` holds prior-plus-successes and ``b2`` prior-plus-failures. The
    value is immutable; :meth:`update` returns a new posterior.
    """

    b1: tuple[float, ...]
    b2: tuple[float, ...]

    def __post_init__(self) -> None:
        b1 = tuple(float(v) for v in self.b1)
        b2 = tuple(float(v) for v in self.b2)
        if len(b1) != len(b2):
            raise ValueError("b1 and b2 must have the same length")
        if len(b1) < 2:
            raise ValueError("a bandit needs at least 2 arms")
        if not all(v > 0 and np.isfinite(v) for v in b1 + b2):
            raise ValueError("pseudo-counts must be positive and finite")
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)

    @classmethod
    def uniform(cls, n_arms: int, prior: Sequence[float] = DEFAULT_PRIOR) -> "BetaPosterior":
        a, b = prior
        return cls((a,) * n_arms, (b,) * n_arms)

    @classmethod
    def from_pairs(cls, pairs) -> "BetaPosterior":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def n_arms(self) -> int:
        return len(self.b1)

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.b1, self.b2))

    def _check_arm(self, arm: int) -> int:
        if isinstance(arm, bool) or not isinstance(arm, (int, np.integer)):
            raise IndexError(f"arm index must be an integer, got {arm!r}")
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range for {self.n_arms} arms")
        return int(arm)

    def update(self, arm: int, reward: int) -> "BetaPosterior":
        arm = self._check_arm(arm)
        if reward not in (0, 1):
            raise ValueError(f"reward must be 0 or 1, got {reward!r}")
        b1 = list(self.b1)
        b2 = list(self.b2)
        b1[arm] += reward
        b2[arm] += 1 - reward
        return BetaPosterior(tuple(b1), tuple(b2))

    def mean(self, arm: int) -> float:
        arm = self._check_arm(arm)
        return self.b1[arm] / (self.b1[arm] + self.b2[arm])

    def means(self) -> np.ndarray:
        b1 = np.asarray(self.b1)
        return b1 / (b1 + np.asarray(self.b2))


def update(state: BetaPosterior, arm: int, reward: int) -> BetaPosterior:
    return state.update(arm, reward)


def mean(state: BetaPosterior, arm: int) -> float:
    return state.mean(arm)


def bernoulli_kl(p1, p2):
    """KL divergence of Bernoulli(p1) from Bernoulli(p2), in nats.

    Both arguments are clamped into [1e-9, 1 - 1e-9] first so the result is
    always finite. Accepts scalars or broadcastable arrays.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    p = np.clip(p1, KL_CLAMP, 1.0 - KL_CLAMP)
    q = np.clip(p2, KL_CLAMP, 1.0 - KL_CLAMP)
    # clamp the complements directly so swapping p <-> 1 - p is exact
    pc = np.clip(1.0 - p1, KL_CLAMP, 1.0 - KL_CLAMP)
    qc = np.clip(1.0 - p2, KL_CLAMP, 1.0 - KL_CLAMP)
    kl = p * np.log(p / q) + pc * np.log(pc / qc)
    # rounding can leave tiny negatives when p == q
    kl = np.where(p == q, 0.0, np.maximum(kl, 0.0))
    return float(kl) if kl.ndim == 0 else kl


def entropy(dist, atol: float = 1e-9) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("entropy expects a non-empty probability vector")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > atol:
        raise ValueError(f"not a probability vector (sum={p.sum()!r})")
    nz = p[p > 0.0]
    return float(max(-np.sum(nz * np.log(nz)), 0.0))
