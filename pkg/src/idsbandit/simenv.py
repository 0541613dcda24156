"""Synthetic environments, seeded streams and regret accounting."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .gts import Expert, ExpertPool, gts_posterior, gts_select_arm, gts_update
from .ids import ids_select_arm
from .posterior import DEFAULT_PRIOR, BetaPosterior
from .special import Grid
from .thompson import ts_select_arm

BANDIT_ALGORITHMS = ("ids", "ts")


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for one component of a run.

    The label is folded into the seed sequence's spawn key, so each
    component's draws depend only on (seed, label).
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


@dataclass(frozen=True, eq=False)
class BernoulliEnv:
    true_means: tuple[float, ...]
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.true_means)
        if len(means) < 2:
            raise ValueError("need at least 2 arms")
        if not all(0.0 < m < 1.0 for m in means):
            raise ValueError(f"true means must lie in (0, 1), got {means}")
        object.__setattr__(self, "true_means", means)

    @property
    def n_arms(self) -> int:
        return len(self.true_means)

    @property
    def best_mean(self) -> float:
        return max(self.true_means)

    def gaps(self) -> np.ndarray:
        return self.best_mean - np.asarray(self.true_means)

    def with_rng(self, rng: np.random.Generator) -> "BernoulliEnv":
        return replace(self, rng=rng)

    def step(self, arm: int) -> int:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range")
        if self.rng is None:
            raise RuntimeError("environment has no random stream; use with_rng()")
        return int(self.rng.random() < self.true_means[arm])


@dataclass(frozen=True, eq=False)
class ContextualEnv:
    """Finite context set with a table of Bernoulli means ``means[context, arm]``."""

    means: np.ndarray
    context_weights: Optional[np.ndarray] = None
    rng: Optional[np.random.Generator] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        mu = np.array(self.means, dtype=float)
        if mu.ndim != 2 or mu.shape[0] < 1 or mu.shape[1] < 2:
            raise ValueError("means must be a (contexts, arms) table with at least 2 arms")
        if np.any(mu < 0.0) or np.any(mu > 1.0):
            raise ValueError("means must lie in [0, 1]")
        mu.setflags(write=False)
        object.__setattr__(self, "means", mu)
        if self.context_weights is None:
            w = np.full(mu.shape[0], 1.0 / mu.shape[0])
        else:
            w = np.asarray(self.context_weights, dtype=float)
            if w.shape != (mu.shape[0],) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("context weights must be non-negative, one per context")
            w = w / w.sum()
        object.__setattr__(self, "context_weights", w)

    @property
    def n_contexts(self) -> int:
        return self.means.shape[0]

    @property
    def n_arms(self) -> int:
        return self.means.shape[1]

    def with_rng(self, rng: np.random.Generator) -> "ContextualEnv":
        return replace(self, rng=rng)

    def sample_context(self) -> int:
        u = self.rng.random()
        idx = int(np.searchsorted(np.cumsum(self.context_weights), u, side="right"))
        return min(idx, self.n_contexts - 1)

    def step(self, arm: int, context: int) -> int:
        if not 0 <= context < self.n_contexts:
            raise IndexError(f"context {context} out of range")
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range")
        return int(self.rng.random() < self.means[context, arm])


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    arms: np.ndarray
    rewards: np.ndarray
    regret_step: np.ndarray
    contexts: Optional[np.ndarray] = None
    config_hash: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return int(self.arms.size)

    @property
    def regret_cum(self) -> np.ndarray:
        return np.cumsum(self.regret_step)

    @property
    def final_regret(self) -> float:
        return float(self.regret_cum[-1]) if self.horizon else 0.0


def run_bandit(
    algorithm: str,
    env: BernoulliEnv,
    horizon: int,
    seed: int,
    *,
    prior: Sequence[float] = DEFAULT_PRIOR,
    grid: Optional[Grid] = None,
    diagnostics: bool = True,
) -> RunRecord:
    """Simulate one Thompson Sampling or IDS trajectory with pseudo-regret.

    For IDS the per-step alpha, delta, gain and minimal information ratio are
    kept in ``RunRecord.diagnostics`` unless ``diagnostics`` is False.
    """
    if algorithm not in BANDIT_ALGORITHMS:
        raise ValueError(f"unknown bandit algorithm {algorithm!r}")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    env = env.with_rng(stream(seed, "env"))
    rng = stream(seed, "algorithm")
    grid = grid or Grid.uniform()
    state = BetaPosterior.uniform(env.n_arms, prior)
    k = env.n_arms
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=np.int64)
    keep = diagnostics and algorithm == "ids"
    if keep:
        diag = {
            "alpha": np.empty((horizon, k)),
            "delta": np.empty((horizon, k)),
            "gain": np.empty((horizon, k)),
            "psi": np.empty(horizon),
        }
    for t in range(horizon):
        if algorithm == "ts":
            arm = ts_select_arm(state, rng)
        else:
            arm, q, _ = ids_select_arm(state, grid, rng)
            if keep:
                diag["alpha"][t] = q.alpha
                diag["delta"][t] = q.delta
                diag["gain"][t] = q.gain
                diag["psi"][t] = q.psi_star
        reward = env.step(arm)
        state = state.update(arm, reward)
        arms[t] = arm
        rewards[t] = reward
    regret = env.gaps()[arms]
    return RunRecord(algorithm, seed, arms, rewards, regret, diagnostics=diag if keep else {})


def best_expert(experts: Sequence[Expert], env: ContextualEnv, contexts: np.ndarray) -> int:
    """Index of the expert with the largest true reward on a context sequence."""
    totals = [
        env.means[contexts, [e.policy(c) for c in contexts]].sum() if contexts.size else 0.0
        for e in experts
    ]
    return int(np.argmax(totals))


def run_gts(pool: ExpertPool, env: ContextualEnv, horizon: int, seed: int) -> RunRecord:
    """Simulate Generalized Thompson Sampling; regret is against the best expert.

    The comparator is chosen after the fact on the realised contexts.
    ``diagnostics['posterior']`` holds the final normalised weights and
    ``diagnostics['uniform_gap']`` the per-step regret uniform play would
    incur against the same comparator (see :func:`exploitation_regret`).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if (pool.n_contexts, pool.n_arms) != (env.n_contexts, env.n_arms):
        raise ValueError(
            f"experts cover {pool.n_contexts} contexts x {pool.n_arms} arms, "
            f"environment has {env.n_contexts} x {env.n_arms}"
        )
    env = env.with_rng(stream(seed, "env"))
    rng = stream(seed, "algorithm")
    contexts = np.empty(horizon, dtype=np.int64)
    arms = np.empty(horizon, dtype=np.int64)
    rewards = np.empty(horizon, dtype=np.int64)
    for t in range(horizon):
        x = env.sample_context()
        arm = gts_select_arm(pool, x, rng)
        reward = env.step(arm, x)
        pool = gts_update(pool, x, arm, reward)
        contexts[t], arms[t], rewards[t] = x, arm, reward
    best = pool.experts[best_expert(pool.experts, env, contexts)]
    comparator = env.means[contexts, [best.policy(c) for c in contexts]]
    regret = comparator - env.means[contexts, arms]
    return RunRecord(
        "gts", seed, arms, rewards, regret, contexts=contexts,
        diagnostics={
            "posterior": gts_posterior(pool),
            "best_expert": best.id,
            "uniform_gap": comparator - env.means[contexts].mean(axis=1),
        },
    )


def exploitation_regret(record: RunRecord, gamma: float) -> np.ndarray:
    """Cumulative GTS regret with the forced-exploration share removed.

    A fraction gamma of GTS steps is uniform play, whose expected regret
    grows linearly in t regardless of learning. Subtracting gamma times
    the uniform-play regret and dividing by (1 - gamma) leaves the regret
    of the expert-mixture part alone.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    gap = record.diagnostics["uniform_gap"]
    return np.cumsum(record.regret_step - gamma * gap) / (1.0 - gamma)


def uniform_regret(env: BernoulliEnv, horizon: int) -> float:
    """Expected pseudo-regret of uniformly random play."""
    return float(horizon * env.gaps().mean())


DEMO_CONTEXT_MEANS = (
    (0.80, 0.50, 0.20),
    (0.30, 0.70, 0.40),
    (0.25, 0.45, 0.85),
    (0.60, 0.35, 0.50),
)


def demo_contextual_problem(n_experts: int = 8, seed: int = 2015) -> tuple[ContextualEnv, list[Expert]]:
    """A 4-context, 3-arm environment and an expert pool containing the truth.

    Expert 0 predicts the true means exactly. The others perturb every cell
    by up to +-0.3 (clipped to [0.05, 0.95]), so most disagree with the
    truth on at least one context's best arm.
    """
    env = ContextualEnv(np.array(DEMO_CONTEXT_MEANS))
    rng = np.random.default_rng(seed)
    experts = [Expert(0, env.means)]
    for i in range(1, n_experts):
        noisy = np.clip(env.means + rng.uniform(-0.3, 0.3, env.means.shape), 0.05, 0.95)
        experts.append(Expert(i, noisy))
    return env, experts
