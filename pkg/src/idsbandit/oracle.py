"""Monte Carlo reference estimators for the quadrature-based IDS quantities.

Nothing here touches the grid or the cdf code: samples come straight from
numpy's Beta sampler, so agreement with :mod:`idsbandit.ids` is a genuine
cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .posterior import BetaPosterior, entropy

DEFAULT_SAMPLES = 1_000_000
MIN_HITS = 1000
BLOCK = 1 << 17


def _arm_streams(state: BetaPosterior, rng: np.random.Generator) -> list[np.random.Generator]:
    # one child stream per arm; callers seeding identically get common random numbers
    seeds = rng.integers(0, 2**63 - 1, size=state.n_arms)
    return [np.random.default_rng(int(s)) for s in seeds]


def _blocks(state: BetaPosterior, samples: int, rng: np.random.Generator):
    streams = _arm_streams(state, rng)
    done = 0
    while done < samples:
        n = min(BLOCK, samples - done)
        X = np.column_stack(
            [g.beta(b1, b2, size=n) for g, (b1, b2) in zip(streams, state.pairs())]
        )
        yield X
        done += n


def mc_alpha(state: BetaPosterior, samples: int = DEFAULT_SAMPLES, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Empirical frequency with which each arm is the argmax of a joint posterior draw."""
    if samples < 10_000:
        raise ValueError("mc_alpha needs at least 10^4 samples")
    rng = rng if rng is not None else np.random.default_rng()
    counts = np.zeros(state.n_arms)
    for X in _blocks(state, samples, rng):
        counts += np.bincount(np.argmax(X, axis=1), minlength=state.n_arms)
    return counts / samples


@dataclass(frozen=True)
class McMResult:
    """Conditional-mean estimates with per-row hit counts.

    Rows with fewer than ``min_hits`` conditioning hits are NaN and listed
    in ``insufficient``.
    """

    M: np.ndarray
    hits: np.ndarray
    stderr: np.ndarray
    insufficient: tuple[int, ...]


def mc_M(
    state: BetaPosterior,
    samples: int = DEFAULT_SAMPLES,
    rng: Optional[np.random.Generator] = None,
    min_hits: int = MIN_HITS,
) -> McMResult:
    rng = rng if rng is not None else np.random.default_rng()
    k = state.n_arms
    hits = np.zeros(k)
    sums = np.zeros((k, k))
    sumsq = np.zeros((k, k))
    for X in _blocks(state, samples, rng):
        idx = np.argmax(X, axis=1)
        hits += np.bincount(idx, minlength=k)
        for j in range(k):
            sums[:, j] += np.bincount(idx, weights=X[:, j], minlength=k)
            sumsq[:, j] += np.bincount(idx, weights=X[:, j] ** 2, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        M = sums / hits[:, None]
        var = np.maximum(sumsq / hits[:, None] - M**2, 0.0)
        stderr = np.sqrt(var / hits[:, None])
    low = hits < min_hits
    M[low] = np.nan
    stderr[low] = np.nan
    return McMResult(M, hits, stderr, tuple(int(i) for i in np.flatnonzero(low)))


def mc_information_gain(
    state: BetaPosterior,
    arm: int,
    samples: int = DEFAULT_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Expected drop in the entropy of the optimal-arm distribution after pulling ``arm``.

    Both reward outcomes are enumerated and weighted by the posterior
    predictive probability mean(arm). The three optimality estimates share
    their random numbers for every arm other than ``arm``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    base_seed = int(rng.integers(0, 2**63 - 1))
    p_success = state.mean(arm)

    def h(s: BetaPosterior) -> float:
        a = mc_alpha(s, samples, np.random.default_rng(base_seed))
        return entropy(a / a.sum())

    before = h(state)
    after = p_success * h(state.update(arm, 1)) + (1.0 - p_success) * h(state.update(arm, 0))
    return before - after


def random_states(
    rng: np.random.Generator,
    n: int,
    arm_counts: Sequence[int] = (2, 3, 5),
    low: float = 1.0,
    high: float = 50.0,
) -> list[BetaPosterior]:
    """Random posteriors; the number of arms cycles through ``arm_counts``."""
    states = []
    for i in range(n):
        k = arm_counts[i % len(arm_counts)]
        b = rng.uniform(low, high, size=(k, 2))
        states.append(BetaPosterior(tuple(b[:, 0]), tuple(b[:, 1])))
    return states
