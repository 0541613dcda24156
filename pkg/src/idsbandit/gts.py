"""Generalized Thompson Sampling over a finite pool of experts.

Experts are lookup tables of predicted mean reward over a finite context
set. Weights are kept in log space so long horizons never underflow them
to zero; ``ExpertPool.weights`` exponentiates on demand.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ids import ActionDistribution

LOG_LOSS_CLAMP = 1e-6


class LossKind(str, Enum):
    LOGARITHMIC = "logarithmic"
    SQUARE = "square"


class ExpertFileError(ValueError):
    pass


def loss(kind, predicted: float, reward: int) -> float:
    kind = LossKind(kind)
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    if kind is LossKind.SQUARE:
        return (predicted - reward) ** 2
    p = min(max(predicted, LOG_LOSS_CLAMP), 1.0 - LOG_LOSS_CLAMP)
    return -math.log(p) if reward == 1 else -math.log1p(-p)


def _loss_vector(kind: LossKind, predicted: np.ndarray, reward: int) -> np.ndarray:
    if kind is LossKind.SQUARE:
        return (predicted - reward) ** 2
    p = np.clip(predicted, LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP)
    return -np.log(p) if reward == 1 else -np.log1p(-p)


@dataclass(frozen=True, eq=False)
class Expert:
    """Prediction table ``table[context, arm]`` of mean rewards in [0, 1]."""

    id: int
    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or t.size == 0:
            raise ValueError("expert table must be a non-empty 2-D array")
        if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError(f"expert {self.id}: predictions must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_contexts(self) -> int:
        return self.table.shape[0]

    @property
    def n_arms(self) -> int:
        return self.table.shape[1]

    def predict(self, context: int, arm: int) -> float:
        return float(self.table[context, arm])

    def policy(self, context: int) -> int:
        # np.argmax picks the lowest arm on ties
        return int(np.argmax(self.table[context]))


@dataclass(frozen=True, eq=False)
class ExpertPool:
    experts: tuple[Expert, ...]
    log_weights: np.ndarray
    eta: float
    gamma: float
    prior: np.ndarray
    loss_kind: LossKind = LossKind.LOGARITHMIC

    def __post_init__(self) -> None:
        if not self.experts:
            raise ValueError("expert pool is empty")
        shapes = {e.table.shape for e in self.experts}
        if len(shapes) != 1:
            raise ValueError(f"experts disagree on (contexts, arms): {sorted(shapes)}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (len(self.experts),) or np.any(~np.isfinite(lw)):
            raise ValueError("log weights must be finite, one per expert")
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        object.__setattr__(
            self, "_tables", np.stack([e.table for e in self.experts])
        )

    @classmethod
    def create(
        cls,
        experts: Sequence[Expert],
        *,
        eta: float = 1.0,
        gamma: float = 0.05,
        prior: Optional[Sequence[float]] = None,
        loss_kind="logarithmic",
    ) -> "ExpertPool":
        n = len(experts)
        p = np.full(n, 1.0 / n) if prior is None else np.asarray(prior, dtype=float)
        if p.shape != (n,) or np.any(p <= 0) or np.any(~np.isfinite(p)):
            raise ValueError("prior must be a positive vector, one entry per expert")
        return cls(tuple(experts), np.log(p), float(eta), float(gamma), p, LossKind(loss_kind))

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def n_arms(self) -> int:
        return self.experts[0].n_arms

    @property
    def n_contexts(self) -> int:
        return self.experts[0].n_contexts

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def policies(self, context: int) -> np.ndarray:
        return np.argmax(self._tables[:, context, :], axis=1)

    def predictions(self, context: int, arm: int) -> np.ndarray:
        return self._tables[:, context, arm]


def default_gamma(n_arms: int, horizon: int) -> float:
    return min(1.0, n_arms ** (2.0 / 3.0) / horizon ** (1.0 / 3.0))


def gts_posterior(pool: ExpertPool) -> np.ndarray:
    lw = pool.log_weights - pool.log_weights.max()
    w = np.exp(lw)
    return w / w.sum()


def gts_action_distribution(pool: ExpertPool, context: int) -> ActionDistribution:
    k = pool.n_arms
    post = gts_posterior(pool)
    votes = np.bincount(pool.policies(context), weights=post, minlength=k)
    return ActionDistribution((1.0 - pool.gamma) * votes + pool.gamma / k)


def gts_select_arm(pool: ExpertPool, context: int, rng: np.random.Generator) -> int:
    return gts_action_distribution(pool, context).sample(rng)


def gts_update(pool: ExpertPool, context: int, arm: int, reward: int) -> ExpertPool:
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward!r}")
    losses = _loss_vector(pool.loss_kind, pool.predictions(context, arm), reward)
    return replace(pool, log_weights=pool.log_weights - pool.eta * losses)


_EXPERT_COLUMNS = ("expert_id", "context_id", "arm_id", "predicted_mean")


def load_experts(path) -> list[Expert]:
    """Read expert tables from a comma- or tab-separated file.

    Rows are ``expert_id, context_id, arm_id, predicted_mean`` under a
    header. Context and arm ids must be 0..C-1 and 0..K-1, and every expert
    must cover every (context, arm) cell exactly once.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ExpertFileError(f"cannot read experts file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ExpertFileError(f"{path}: empty experts file")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    if tuple(header) != _EXPERT_COLUMNS:
        raise ExpertFileError(f"{path}: header must be {','.join(_EXPERT_COLUMNS)}, got {header}")
    cells: dict[tuple[int, int, int], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise ExpertFileError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
        try:
            e, c, a = (int(v) for v in row[:3])
            value = float(row[3])
        except ValueError as exc:
            raise ExpertFileError(f"{path}:{lineno}: {exc}") from exc
        if min(e, c, a) < 0:
            raise ExpertFileError(f"{path}:{lineno}: ids must be non-negative")
        if not 0.0 <= value <= 1.0:
            raise ExpertFileError(f"{path}:{lineno}: predicted_mean {value} outside [0, 1]")
        if (e, c, a) in cells:
            raise ExpertFileError(f"{path}:{lineno}: duplicate cell {(e, c, a)}")
        cells[(e, c, a)] = value
    expert_ids = sorted({k[0] for k in cells})
    n_ctx = max(k[1] for k in cells) + 1
    n_arms = max(k[2] for k in cells) + 1
    experts = []
    for e in expert_ids:
        table = np.full((n_ctx, n_arms), np.nan)
        for (ee, c, a), v in cells.items():
            if ee == e:
                table[c, a] = v
        missing = np.argwhere(np.isnan(table))
        if missing.size:
            c, a = missing[0]
            raise ExpertFileError(
                f"{path}: expert {e} has no prediction for context {c}, arm {a}"
            )
        experts.append(Expert(e, table))
    return experts


def save_experts(experts: Sequence[Expert], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_EXPERT_COLUMNS)
        for e in experts:
            for c in range(e.n_contexts):
                for a in range(e.n_arms):
                    writer.writerow([e.id, c, a, repr(float(e.table[c, a]))])
