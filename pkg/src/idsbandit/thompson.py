"""Beta-Bernoulli Thompson Sampling."""
from __future__ import annotations

import numpy as np

from .posterior import BetaPosterior


def beta_sample(b1, b2, rng: np.random.Generator, size=None):
    """Beta(b1, b2) variates as a ratio of two independent gamma draws.

    numpy's ``standard_gamma`` is Marsaglia-Tsang for shape >= 1 and an exact
    rejection sampler below 1.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if np.any(b1 <= 0) or np.any(b2 <= 0):
        raise ValueError("Beta shape parameters must be positive")
    shape = size if size is not None else np.broadcast(b1, b2).shape
    x = rng.standard_gamma(b1, size=shape)
    y = rng.standard_gamma(b2, size=shape)
    out = x / (x + y)
    return float(out) if np.ndim(out) == 0 else out


def ts_select_arm(state: BetaPosterior, rng: np.random.Generator) -> int:
    """Draw one mean per arm from the posterior and play the argmax.

    ``np.argmax`` returns the lowest index on ties.
    """
    theta = beta_sample(np.asarray(state.b1), np.asarray(state.b2), rng)
    return int(np.argmax(theta))
