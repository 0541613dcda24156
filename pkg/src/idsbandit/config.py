"""Experiment configuration: one JSON file describes one reproducible experiment.

Example::

    {
      "algorithms": ["ts", "ids"],
      "environment": {"kind": "bernoulli", "means": [0.7, 0.5, 0.3]},
      "horizon": 1000,
      "seeds": [0, 1, 2],
      "prior": [1, 1],
      "ids": {"grid_points": 1001},
      "gts": {"eta": 1.0, "gamma": 0.05, "loss": "logarithmic", "experts_file": "experts.csv"},
      "output_dir": "results"
    }
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .gts import LossKind

ALGORITHMS = ("ids", "ts", "gts")
OUTPUT_ENV_VAR = "IDSBANDIT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class EnvironmentConfig:
    kind: str
    means: tuple
    context_weights: Optional[tuple] = None

    @property
    def n_arms(self) -> int:
        return len(self.means) if self.kind == "bernoulli" else len(self.means[0])


@dataclass(frozen=True)
class GtsConfig:
    eta: float = 1.0
    gamma: Optional[float] = None
    loss: str = "logarithmic"
    experts_file: Optional[Path] = None


@dataclass(frozen=True)
class OracleConfig:
    n_states: int = 20
    arm_counts: tuple = (2, 3, 5)
    low: float = 1.0
    high: float = 50.0
    samples: int = 1_000_000
    tolerance: float = 5e-3
    gain_states: int = 10
    gain_tolerance: float = 2e-2
    symmetry_tolerance: float = 1e-3
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple
    environment: EnvironmentConfig
    horizon: int
    seeds: tuple
    prior: tuple = (1.0, 1.0)
    grid_points: int = 1001
    gts: GtsConfig = field(default_factory=GtsConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output_dir: Optional[Path] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        content = {k: v for k, v in self.raw.items() if k != "output_dir"}
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def resolve_output_dir(self, override=None) -> Path:
        """--output beats the config file, which beats the environment variable."""
        if override is not None:
            return Path(override)
        if self.output_dir is not None:
            return self.output_dir
        return Path(os.environ.get(OUTPUT_ENV_VAR, DEFAULT_OUTPUT_DIR))


def _number(value: Any, name: str, *, positive=False, integer=False, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(name, f"must be >= {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ConfigError(name, f"must be <= {hi}, got {value!r}")
    return int(value) if integer else float(value)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    return sec


def _reject_unknown(section: dict, allowed, prefix: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown field")


def _parse_environment(raw: Any) -> EnvironmentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("environment", "must be an object")
    _reject_unknown(raw, ("kind", "means", "context_weights"), "environment.")
    kind = raw.get("kind", "bernoulli")
    means = raw.get("means")
    if kind == "bernoulli":
        if not isinstance(means, list) or len(means) < 2:
            raise ConfigError("environment.means", "need a list of at least 2 arm means")
        vals = tuple(_number(m, f"environment.means[{i}]") for i, m in enumerate(means))
        for i, m in enumerate(vals):
            if not 0.0 < m < 1.0:
                raise ConfigError(f"environment.means[{i}]", f"must lie in (0, 1), got {m}")
        return EnvironmentConfig("bernoulli", vals)
    if kind == "contextual":
        if means == "demo":
            from .simenv import DEMO_CONTEXT_MEANS
            means = [list(r) for r in DEMO_CONTEXT_MEANS]
        if not isinstance(means, list) or not means or not all(isinstance(r, list) for r in means):
            raise ConfigError("environment.means", "need a (contexts x arms) list of lists or \"demo\"")
        width = len(means[0])
        if width < 2 or any(len(r) != width for r in means):
            raise ConfigError("environment.means", "rows must have equal length >= 2")
        table = tuple(
            tuple(_number(m, f"environment.means[{c}][{a}]", lo=0.0, hi=1.0) for a, m in enumerate(r))
            for c, r in enumerate(means)
        )
        weights = raw.get("context_weights")
        if weights is not None:
            if not isinstance(weights, list) or len(weights) != len(table):
                raise ConfigError("environment.context_weights", "need one weight per context")
            weights = tuple(_number(w, f"environment.context_weights[{i}]", lo=0.0) for i, w in enumerate(weights))
            if sum(weights) <= 0:
                raise ConfigError("environment.context_weights", "weights must not all be zero")
        return EnvironmentConfig("contextual", table, weights)
    raise ConfigError("environment.kind", f"unknown environment kind {kind!r}")


def parse_config(raw: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _reject_unknown(
        raw,
        ("algorithms", "environment", "horizon", "seeds", "prior", "ids", "gts", "oracle", "output_dir"),
        "",
    )
    algos = raw.get("algorithms")
    if not isinstance(algos, list) or not algos:
        raise ConfigError("algorithms", "need a non-empty list")
    for i, a in enumerate(algos):
        if a not in ALGORITHMS:
            raise ConfigError(f"algorithms[{i}]", f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
    if len(set(algos)) != len(algos):
        raise ConfigError("algorithms", "duplicate entries")
    if "environment" not in raw:
        raise ConfigError("environment", "missing")
    env = _parse_environment(raw["environment"])
    for i, a in enumerate(algos):
        if (a == "gts") != (env.kind == "contextual"):
            raise ConfigError(
                f"algorithms[{i}]", f"{a!r} cannot run on a {env.kind} environment"
            )
    if "horizon" not in raw:
        raise ConfigError("horizon", "missing")
    horizon = _number(raw["horizon"], "horizon", integer=True, lo=1)
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds", "need a non-empty list of integers")
    seeds = tuple(_number(s, f"seeds[{i}]", integer=True, lo=0) for i, s in enumerate(seeds))
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "duplicate seeds")
    prior = raw.get("prior", [1.0, 1.0])
    if not isinstance(prior, list) or len(prior) != 2:
        raise ConfigError("prior", "need [alpha, beta]")
    prior = tuple(_number(p, f"prior[{i}]", positive=True) for i, p in enumerate(prior))

    ids_sec = _section(raw, "ids")
    _reject_unknown(ids_sec, ("grid_points",), "ids.")
    grid_points = _number(ids_sec.get("grid_points", 1001), "ids.grid_points", integer=True, lo=3)

    gts_sec = _section(raw, "gts")
    _reject_unknown(gts_sec, ("eta", "gamma", "loss", "experts_file"), "gts.")
    loss = gts_sec.get("loss", "logarithmic")
    if loss not in [k.value for k in LossKind]:
        raise ConfigError("gts.loss", f"unknown loss {loss!r}")
    gamma = gts_sec.get("gamma")
    if gamma is not None:
        gamma = _number(gamma, "gts.gamma", lo=0.0, hi=1.0)
    experts_file = gts_sec.get("experts_file")
    if experts_file is not None:
        if not isinstance(experts_file, str):
            raise ConfigError("gts.experts_file", "must be a path string")
        experts_file = experts_file if experts_file == "demo" else base_dir / experts_file
    gts = GtsConfig(
        eta=_number(gts_sec.get("eta", 1.0), "gts.eta", positive=True),
        gamma=gamma,
        loss=loss,
        experts_file=experts_file,
    )
    if "gts" in algos and experts_file is None:
        raise ConfigError("gts.experts_file", "required when running gts (a path or \"demo\")")

    o = _section(raw, "oracle")
    defaults = OracleConfig()
    _reject_unknown(o, OracleConfig.__dataclass_fields__, "oracle.")
    arm_counts = o.get("arm_counts", list(defaults.arm_counts))
    if not isinstance(arm_counts, list) or not arm_counts:
        raise ConfigError("oracle.arm_counts", "need a non-empty list")
    oracle = OracleConfig(
        n_states=_number(o.get("n_states", defaults.n_states), "oracle.n_states", integer=True, lo=0),
        arm_counts=tuple(_number(k, f"oracle.arm_counts[{i}]", integer=True, lo=2) for i, k in enumerate(arm_counts)),
        low=_number(o.get("low", defaults.low), "oracle.low", positive=True),
        high=_number(o.get("high", defaults.high), "oracle.high", positive=True),
        samples=_number(o.get("samples", defaults.samples), "oracle.samples", integer=True, lo=10_000),
        tolerance=_number(o.get("tolerance", defaults.tolerance), "oracle.tolerance", positive=True),
        gain_states=_number(o.get("gain_states", defaults.gain_states), "oracle.gain_states", integer=True, lo=0),
        gain_tolerance=_number(o.get("gain_tolerance", defaults.gain_tolerance), "oracle.gain_tolerance", positive=True),
        symmetry_tolerance=_number(
            o.get("symmetry_tolerance", defaults.symmetry_tolerance), "oracle.symmetry_tolerance", positive=True
        ),
        seed=_number(o.get("seed", defaults.seed), "oracle.seed", integer=True, lo=0),
    )
    if oracle.high < oracle.low:
        raise ConfigError("oracle.high", "must be >= oracle.low")

    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir", "must be a path string")
    return ExperimentConfig(
        algorithms=tuple(algos),
        environment=env,
        horizon=horizon,
        seeds=seeds,
        prior=prior,
        grid_points=grid_points,
        gts=gts,
        oracle=oracle,
        output_dir=None if out is None else Path(out),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(raw, path.parent)
