"""Experiment configuration and named random streams."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

SAMPLERS = ("layer-diverse", "independent", "none")


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for a named stage, so stages never share draws.

    ``keys`` further split the stream (epoch, layer, node, ...).
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode()), *map(int, keys)])


@dataclass
class ExperimentConfig:
    dataset_dir: str | None = None
    layers: int = 2
    hidden: int = 16
    lr: float = 0.02
    epochs: int = 200
    seed: int = 0
    gamma: float = 0.9
    k_fraction: float = 0.2
    central_fraction: float = 0.01
    sampler: str = "layer-diverse"
    Q: int | None = None
    cls_multipliers: tuple[int, ...] = (1, 5)
    P: int = 6
    mu_init: float = 0.5
    train_mu: bool = True
    metrics_every: int = 10
    dump_samples: bool = False

    def __post_init__(self):
        self.cls_multipliers = tuple(int(m) for m in self.cls_multipliers)
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.layers < 1:
            problems.append("layers must be >= 1")
        if self.hidden < 1:
            problems.append("hidden must be >= 1")
        if not self.lr > 0:
            problems.append("lr must be > 0")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            problems.append("gamma must lie in [0, 1]")
        if not 0.0 < self.k_fraction <= 1.0:
            problems.append("k_fraction must lie in (0, 1]")
        if not 0.0 < self.central_fraction <= 1.0:
            problems.append("central_fraction must lie in (0, 1]")
        if self.sampler not in SAMPLERS:
            problems.append(f"sampler must be one of {SAMPLERS}")
        if self.Q is not None and self.Q < 1:
            problems.append("Q must be >= 1")
        if any(m < 1 for m in self.cls_multipliers):
            problems.append("cls_multipliers must be positive")
        if self.P < 2:
            problems.append("P must be >= 2")
        if self.mu_init < 0:
            problems.append("mu_init must be >= 0")
        if self.metrics_every < 1:
            problems.append("metrics_every must be >= 1")
        if problems:
            raise ValueError("invalid config: " + "; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text()) if path else {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cls_multipliers"] = list(self.cls_multipliers)
        return d
