"""Experiment configuration: a YAML file plus command-line overrides.

Every run is fully determined by (config, master_seed); the resolved config
is hashed into all output files so results can be traced back.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from typing import Any

import yaml

from ..env import EnvironmentModel, load_model, model_from_dict, model_to_dict

EXPERIMENTS = (
    "hypotheses",
    "simulate",
    "regen",
    "estimate",
    "pair",
    "ychain",
    "green",
    "variance",
    "intersections",
    "clt",
    "occupation",
)


class ConfigError(ValueError):
    """Bad experiment configuration; message cites the offending key."""


@dataclass
class ExperimentConfig:
    experiment: str
    model: str | dict = "benchmark-A"
    master_seed: int = 20260810
    threads: int = 1
    out_dir: str = "out"
    check: bool = False
    force: bool = False

    # Common experiment knobs (defaults suit desk-scale runs).
    n_grid: list[int] = field(default_factory=lambda: [64, 128, 256, 512, 1024, 2048, 4096])
    n_steps: int = 4096
    replicas: int = 256
    environments: int = 200
    walks_per_env: int = 64
    confirm_horizon: int = 512
    a: int = 1
    walks: int = 10_000
    env_seeds: list[int] = field(default_factory=lambda: [1, 2])
    variant: str = "common-env"          # ychain: common-env | independent-env | coupled
    offsets: list[int] = field(default_factory=lambda: [2, 4, 8, 16])
    samples: int = 2000
    r0: int = 0
    window: int = 30
    green_steps: dict = field(default_factory=lambda: {"1": 0.5, "-1": 0.5})
    box_exit_grid: list[int] = field(default_factory=list)
    step_cap: int = 4096
    decay_rate: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown experiment {self.experiment!r}")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")
        for key in ("replicas", "environments", "walks_per_env", "walks", "samples",
                    "confirm_horizon", "a", "n_steps"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key}: must be >= 1")
        grid = [int(n) for n in self.n_grid]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid: must be strictly increasing")
        self.n_grid = grid

    def resolve_model(self) -> EnvironmentModel:
        if isinstance(self.model, dict):
            return model_from_dict(self.model)
        return load_model(self.model)

    def as_dict(self) -> dict:
        out: dict[str, Any] = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        if isinstance(self.model, dict):
            out["model"] = self.model
        return out

    def config_hash(self) -> str:
        """Hash of the scientific configuration only: runtime/presentation
        knobs (output dir, threads, check/force) cannot change results and
        are excluded so identical runs produce identical artifacts."""
        body = dict(self.as_dict())
        for key in ("out_dir", "threads", "check", "force"):
            body.pop(key, None)
        if not isinstance(body["model"], dict):
            body["model"] = model_to_dict(self.resolve_model())
        blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path: str, **overrides) -> ExperimentConfig:
    """Load a YAML config; parse errors cite line, field errors cite key."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: YAML parse error{loc}: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(doc, where=path)


def config_from_dict(doc: dict, where: str = "config") -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    if "experiment" not in doc:
        raise ConfigError(f"{where}: missing required key 'experiment'")
    try:
        return ExperimentConfig(**doc)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from e
