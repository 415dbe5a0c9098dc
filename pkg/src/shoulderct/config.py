"""Experiment configuration: one JSON file drives training and inference.

The config is the single source of hyperparameters; the CLI can override
``seed``, ``device``, and the output directory per invocation.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .losses import LossConfig
from .networks import SegmenterConfig, StagingConfig

CACHE_ENV = "SHOULDERCT_CACHE"


def cache_dir() -> Path:
    """Scratch directory for generated cohorts and default outputs."""
    return Path(os.environ.get(CACHE_ENV, "~/.cache/shoulderct")).expanduser()


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    device: str = "cpu"
    out_dir: str = "runs"

    learning_rate: float = 1e-4
    batch_size: int = 8
    max_epochs: int = 100
    early_stopping_patience: int = 50

    patch_size: int = 160
    patch_stride: int = 120
    crop_margin: int = 8

    loss: LossConfig = field(default_factory=LossConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    stager: StagingConfig = field(default_factory=StagingConfig)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.early_stopping_patience < 1 or self.max_epochs < 1:
            raise ValueError("batch size, patience, and epochs must be >= 1")
        if self.patch_size % 2 ** self.segmenter.levels != 0:
            raise ValueError(
                f"patch {self.patch_size} not divisible by 2^{self.segmenter.levels}"
            )

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "loss" in data and isinstance(data["loss"], dict):
            data["loss"] = LossConfig(**data["loss"])
        if "segmenter" in data and isinstance(data["segmenter"], dict):
            data["segmenter"] = SegmenterConfig(**data["segmenter"])
        if "stager" in data and isinstance(data["stager"], dict):
            st = dict(data["stager"])
            for key in ("head_classes", "dense_units"):
                if key in st and isinstance(st[key], list):
                    st[key] = tuple(st[key])
            data["stager"] = StagingConfig(**st)
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
