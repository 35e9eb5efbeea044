"""Run configuration: a JSON file, named training profiles and ``--set`` overrides.

Schema (every key optional)::

    {
      "train_path": "data/train.csv",     # relative to the config file
      "level": "A",
      "profile": "desk",                  # "desk" or "paper"
      "seed": 42,
      "output_dir": "runs/a",             # relative to the config file
      "k": 5,
      "jobs": 1,
      "featurizer": {"word_ngrams": [1, 2], "char_ngrams": [3, 5],
                     "dimension": 262144, "use_idf": true, "lowercase": true},
      "train": {"learning_rate": 0.05, "epochs": 6, "batch_size": 32,
                "loss": "focal", "focal": {"alpha": 1.0, "gamma": 2.0},
                "class_weights": "balanced"},
      "split": {"train_fraction": 0.8, "stratify": true}
    }

Keys under ``train`` override the chosen profile field by field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .data import SplitSpec
from .errors import ConfigError
from .features import FeaturizerConfig
from .model import PROFILES, FocalLossConfig, TrainConfig
from .taxonomy import Level

TOP_LEVEL_KEYS = {"train_path", "level", "profile", "seed", "output_dir", "k", "jobs",
                  "featurizer", "train", "split"}


@dataclass(frozen=True)
class RunConfig:
    train_path: Optional[Path]
    level: Level
    profile: str
    seed: int
    output_dir: Path
    k: int
    jobs: int
    featurizer: FeaturizerConfig
    train: TrainConfig
    split: SplitSpec

    def to_dict(self) -> dict:
        return {
            "train_path": str(self.train_path) if self.train_path else None,
            "level": self.level.value,
            "profile": self.profile,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "k": self.k,
            "jobs": self.jobs,
            "featurizer": self.featurizer.to_dict(),
            "train": self.train.to_dict(),
            "split": {"train_fraction": self.split.train_fraction, "stratify": self.split.stratify},
        }


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_set(raw: dict, assignment: str) -> None:
    """Apply one ``a.b.c=value`` override in place; value is JSON if it parses."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {part!r} is not a section")
    node[parts[-1]] = parse_value(value)


def read_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    base = Path(path).resolve().parent
    for key in ("train_path", "output_dir"):
        if isinstance(raw.get(key), str) and not Path(raw[key]).is_absolute():
            raw[key] = str(base / raw[key])
    return raw


def build_config(raw: dict) -> RunConfig:
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        profile = raw.get("profile", "desk")
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        seed = int(raw.get("seed", 42))
        train_raw = dict(raw.get("train") or {})
        if isinstance(train_raw.get("focal"), dict):
            train_raw["focal"] = FocalLossConfig(**train_raw["focal"])
        train = replace(PROFILES[profile], seed=seed, **train_raw)
        split_raw = dict(raw.get("split") or {})
        split = SplitSpec(train_fraction=float(split_raw.get("train_fraction", 0.8)), seed=seed,
                          stratify=bool(split_raw.get("stratify", True)))
        featurizer = FeaturizerConfig.from_dict(raw.get("featurizer") or {})
        return RunConfig(
            train_path=Path(raw["train_path"]) if raw.get("train_path") else None,
            level=Level.parse(raw.get("level", "A")),
            profile=profile,
            seed=seed,
            output_dir=Path(raw.get("output_dir", "hiertext-out")),
            k=int(raw.get("k", 5)),
            jobs=int(raw.get("jobs", 1)),
            featurizer=featurizer,
            train=train,
            split=split,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
