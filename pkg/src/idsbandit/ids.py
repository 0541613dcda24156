"""Information-Directed Sampling for Beta-Bernoulli bandits.

One decision step runs

    compute_alpha -> compute_M -> compute_delta_gain -> minimize_psi

and samples an arm from the minimising distribution. The integrals over
[0, 1] are evaluated against the increments of the exact Beta cdfs (a
trapezoid-Stieltjes rule), so each arm's probability mass is exact cell by
cell and concentrated posteriors do not lose mass between grid points. The
rule is applied on the grid and on its bisection and the two results are
combined by one Richardson step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .posterior import BetaPosterior, bernoulli_kl
from .special import Grid, arm_tables, integrate_stieltjes_extrapolated

ALPHA_FLOOR = 1e-8
GAIN_FLOOR = 1e-12
SCAN_STEP = 1e-3
GOLDEN_TOL = 1e-9
TIE_RTOL = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class IdsQuantities:
    alpha: np.ndarray
    M: np.ndarray
    delta: np.ndarray
    gain: np.ndarray
    rho_star: float
    psi_star: float = float("nan")


@dataclass(frozen=True)
class ActionDistribution:
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"invalid action distribution {p!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point_mass(cls, n_arms: int, arm: int) -> "ActionDistribution":
        p = np.zeros(n_arms)
        p[arm] = 1.0
        return cls(p)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0.0))

    def sample(self, rng: np.random.Generator) -> int:
        """Inverse-cdf draw using a single uniform from ``rng``."""
        u = rng.random()
        cum = np.cumsum(self.probs)
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= self.probs.size or self.probs[idx] == 0.0:
            # u landed past a cumsum that rounds below 1
            idx = self.support[-1]
        return idx


def _tables(state: BetaPosterior, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    # tables live on the bisected grid; see integrate_stieltjes_extrapolated
    fine = grid.bisected
    cdfs, partials = zip(*(arm_tables(fine, b1, b2) for b1, b2 in state.pairs()))
    return np.vstack(cdfs), np.vstack(partials)


def _leave_one_out(F: np.ndarray) -> np.ndarray:
    """Row k of the result is the product of all rows of F except row k."""
    k = F.shape[0]
    ones = np.ones((1,) + F.shape[1:])
    prefix = np.cumprod(np.vstack([ones, F[:-1]]), axis=0)
    suffix = np.cumprod(np.vstack([ones, F[::-1][:-1]]), axis=0)[::-1]
    return (prefix * suffix)[:k]


def compute_alpha(state: BetaPosterior, grid: Grid) -> np.ndarray:
    """Posterior probability that each arm has the largest mean.

    alpha_i = integral of prod_{j != i} F_j(x) dF_i(x).
    """
    F, _ = _tables(state, grid)
    alpha = integrate_stieltjes_extrapolated(_leave_one_out(F), F)
    return np.maximum(alpha, 0.0)


def compute_M(state: BetaPosterior, alpha, grid: Grid) -> np.ndarray:
    """Conditional means M[i, j] = E[X_j | arm i is the maximum].

    Rows whose optimality probability is below ``ALPHA_FLOOR`` fall back to
    the unconditional means.
    """
    F, Q = _tables(state, grid)
    alpha = np.asarray(alpha, dtype=float)
    k = state.n_arms
    means = state.means()
    loo = _leave_one_out(F)
    M = np.tile(means, (k, 1))
    for i in range(k):
        if alpha[i] < ALPHA_FLOOR:
            continue
        others = [j for j in range(k) if j != i]
        # products over arms other than i and j, one row per j in `others`
        loo2 = _leave_one_out(F[others])
        M[i, others] = integrate_stieltjes_extrapolated(loo2 * Q[others], F[i]) / alpha[i]
        # x dF_i(x) = dQ_i(x), so the diagonal integrates against Q_i directly
        M[i, i] = integrate_stieltjes_extrapolated(loo[i], Q[i]) / alpha[i]
    return np.clip(M, 0.0, 1.0)


def compute_delta_gain(state: BetaPosterior, alpha, M) -> tuple[np.ndarray, np.ndarray, float]:
    """Immediate regrets, information gains and the expected optimal reward.

    gain[i] = sum_j alpha[j] * KL(M[j, i] || mean_i), the expectation over
    the identity of the optimal arm of the shift it induces in arm i's
    predictive reward distribution.
    """
    alpha = np.asarray(alpha, dtype=float)
    M = np.asarray(M, dtype=float)
    means = state.means()
    rho_star = float(np.dot(alpha, np.diag(M)))
    delta = rho_star - means
    gain = np.sum(alpha[:, None] * bernoulli_kl(M, means[None, :]), axis=0)
    return delta, gain, rho_star


def compute_quantities(state: BetaPosterior, grid: Grid) -> IdsQuantities:
    alpha = compute_alpha(state, grid)
    M = compute_M(state, alpha, grid)
    delta, gain, rho_star = compute_delta_gain(state, alpha, M)
    return IdsQuantities(alpha=alpha, M=M, delta=delta, gain=gain, rho_star=rho_star)


def information_ratio(probs, delta, gain) -> float:
    """(pi . delta)^2 / (pi . gain), with 0 for zero regret and inf for zero gain."""
    num = float(np.dot(probs, delta))
    den = float(np.dot(probs, gain))
    if num == 0.0:
        return 0.0
    if den <= 0.0:
        return math.inf
    return num * num / den


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on [lo, hi]; returns (argmin, min)."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _pair_ratio(q, di, dj, gi, gj):
    num = q * di + (1.0 - q) * dj
    den = q * gi + (1.0 - q) * gj
    with np.errstate(divide="ignore", invalid="ignore"):
        val = num * num / den
    val = np.where(den > 0.0, val, np.inf)
    return np.where(num == 0.0, 0.0, val)


def _pair_ratio_scalar(q: float, di: float, dj: float, gi: float, gj: float) -> float:
    num = q * di + (1.0 - q) * dj
    if num == 0.0:
        return 0.0
    den = q * gi + (1.0 - q) * gj
    return num * num / den if den > 0.0 else math.inf


def _better(value: float, best: float) -> bool:
    return value < best - TIE_RTOL * abs(best)


def minimize_psi(delta, gain) -> tuple[ActionDistribution, float]:
    """Minimise the information ratio over distributions with at most two arms.

    Every unordered pair (i, j) is searched over the mixing weight q on arm i
    by a coarse scan followed by golden-section refinement. Pairs are visited
    in lexicographic order and only a strictly better value replaces the
    incumbent, which fixes the tie rule. Within a pair, a flat stretch of
    equal ratios is resolved at its midpoint so identical arms are played
    evenly. Regrets below zero (quadrature noise) are treated as zero.

    If no arm carries more than ``GAIN_FLOOR`` information the result is a
    point mass on the lowest-regret arm with ratio ``inf``.
    """
    delta = np.maximum(np.asarray(delta, dtype=float), 0.0)
    gain = np.maximum(np.asarray(gain, dtype=float), 0.0)
    k = delta.size
    if gain.size != k or k < 1:
        raise ValueError("delta and gain must be non-empty vectors of equal length")
    if np.all(gain <= GAIN_FLOOR):
        return ActionDistribution.point_mass(k, int(np.argmin(delta))), math.inf
    if k == 1:
        return ActionDistribution.point_mass(1, 0), information_ratio([1.0], delta, gain)

    # scanning q downwards makes flat ties favour the lower-index arm
    qs = np.linspace(1.0, 0.0, int(round(1.0 / SCAN_STEP)) + 1)
    pairs = list(combinations(range(k), 2))
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    scan = _pair_ratio(qs[None, :], delta[ii, None], delta[jj, None], gain[ii, None], gain[jj, None])

    best_val = math.inf
    best = (0, 1, 1.0)
    for row, (i, j) in enumerate(pairs):
        vals = scan[row]
        kmin = int(np.argmin(vals))
        q_best, v_best = float(qs[kmin]), float(vals[kmin])
        tied = np.flatnonzero(vals <= v_best + TIE_RTOL * abs(v_best))
        if tied.size > 1:
            # flat stretch (e.g. identical arms): split it down the middle
            q_mid = 0.5 * float(qs[tied[0]] + qs[tied[-1]])
            v_mid = _pair_ratio_scalar(q_mid, float(delta[i]), float(delta[j]), float(gain[i]), float(gain[j]))
            if not _better(v_best, v_mid):
                q_best, v_best = q_mid, v_mid
        if np.isfinite(v_best) and v_best > 0.0:
            hi = float(qs[max(kmin - 1, 0)])
            lo = float(qs[min(kmin + 1, qs.size - 1)])
            di, dj, gi, gj = float(delta[i]), float(delta[j]), float(gain[i]), float(gain[j])
            q_ref, v_ref = golden_section(lambda q: _pair_ratio_scalar(q, di, dj, gi, gj), lo, hi)
            if _better(v_ref, v_best):
                q_best, v_best = q_ref, v_ref
        if _better(v_best, best_val) or (best_val == math.inf and row == 0):
            best_val, best = v_best, (i, j, q_best)

    i, j, q = best
    probs = np.zeros(k)
    probs[i] = q
    probs[j] = 1.0 - q
    pi = ActionDistribution(probs)
    return pi, information_ratio(pi.probs, delta, gain)


def ids_select_arm(
    state: BetaPosterior, grid: Grid, rng: np.random.Generator
) -> tuple[int, IdsQuantities, ActionDistribution]:
    quantities = compute_quantities(state, grid)
    pi, psi = minimize_psi(quantities.delta, quantities.gain)
    arm = pi.sample(rng)
    return arm, replace(quantities, psi_star=psi), pi
