"""Run configuration: training hyperparameters, model scale, seeds.

The "paper" scale uses the published hyperparameters (base channels 128,
1000 diffusion steps); the "toy" scale divides channel counts by 8 and
uses 200 diffusion steps so the full pipeline runs on a laptop CPU. All
randomness flows from the explicit seeds here through Philox (a 64-bit
counter-based generator), so runs are reproducible across machines.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigMismatch, IoError, ParseError
from .style_encoder import ContrastiveConfig

CHAR_DIM = 150
TIME_DIM = 32


@dataclass
class LayoutTrainConfig:
    lr: float = 0.01
    batch: int = 32
    steps: int = 2000


@dataclass
class FontTrainConfig:
    lr: float = 0.001
    clip: float = 1.0
    decay: float = 0.9998
    batch: int = 64
    T: int = 200
    n_max: int = 120
    steps: int = 4000
    ref_len: int = 128


@dataclass
class Seeds:
    corpus: int = 0
    layout: int = 1
    font: int = 2
    generate: int = 3
    evaluate: int = 4


@dataclass
class RunConfig:
    scale: str = "toy"
    layout: LayoutTrainConfig = field(default_factory=LayoutTrainConfig)
    font: FontTrainConfig = field(default_factory=FontTrainConfig)
    contrastive: ContrastiveConfig = field(default_factory=ContrastiveConfig)
    seeds: Seeds = field(default_factory=Seeds)

    @property
    def base_channels(self) -> int:
        return 128 if self.scale == "paper" else 16

    @staticmethod
    def toy() -> "RunConfig":
        return RunConfig(scale="toy")

    @staticmethod
    def paper() -> "RunConfig":
        cfg = RunConfig(scale="paper")
        cfg.font.T = 1000
        cfg.font.steps = 400_000
        return cfg

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "layout": asdict(self.layout),
            "font": asdict(self.font),
            "contrastive": {
                "tau": self.contrastive.tau,
                "l": self.contrastive.segment_len,
                "lambdas": list(self.contrastive.weights),
                "batch_writers": self.contrastive.batch_writers,
            },
            "seeds": asdict(self.seeds),
        }

    @staticmethod
    def from_json(obj: dict) -> "RunConfig":
        cfg = RunConfig.paper() if obj.get("scale") == "paper" else RunConfig.toy()
        for key, value in obj.get("layout", {}).items():
            setattr(cfg.layout, key, value)
        for key, value in obj.get("font", {}).items():
            setattr(cfg.font, key, value)
        c = obj.get("contrastive", {})
        cfg.contrastive = ContrastiveConfig(
            tau=c.get("tau", 0.1),
            segment_len=c.get("l", 4),
            weights=tuple(c.get("lambdas", (0.01, 0.1, 0.1))),
            batch_writers=c.get("batch_writers", 16),
        )
        for key, value in obj.get("seeds", {}).items():
            setattr(cfg.seeds, key, value)
        return cfg

    @staticmethod
    def load(path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return RunConfig.from_json(json.load(f))
        except OSError as e:
            raise IoError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ParseError(f"config {path}: invalid JSON ({e.msg})") from e

    def dump(self, path: str):
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.to_json(), f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise IoError(f"cannot write config {path}: {e}") from e

    def make_schedule(self):
        """Noise schedule for this scale.

        Fewer steps re-linearize the published endpoint noise rates by
        1000/T, which preserves the total noise budget: alpha_bar[T]
        stays below 1e-4 at every scale (at T=1000 this is exactly the
        published linear schedule).
        """
        from .diffusion import linear_schedule

        s = 1000.0 / self.font.T
        return linear_schedule(self.font.T, 1.0 - 1e-4 * s, 1.0 - 2e-2 * s)

    def fingerprint(self) -> np.ndarray:
        """Architecture-determining values stored in checkpoints."""
        return np.array(
            [self.base_channels, self.font.T, self.font.n_max, CHAR_DIM, TIME_DIM], dtype=np.float32
        )

    def check_fingerprint(self, stored: np.ndarray, source: str):
        if stored.shape != (5,) or not np.array_equal(stored, self.fingerprint()):
            raise ConfigMismatch(
                f"{source}: checkpoint fingerprint {stored.tolist()} does not match "
                f"config {self.fingerprint().tolist()}"
            )
