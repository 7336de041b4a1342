"""Bridge configuration. Defaults mirror the reference fine-tuning setup:
batch size 32, learning rate 2e-5, L2 (weight decay) 0.01."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KNOWN_MODELS = ("bert-base-uncased", "distilbert", "roberta-base", "gpt2")

# Hub checkpoint names for each supported model id.
HUB_CHECKPOINTS = {
    "bert-base-uncased": "bert-base-uncased",
    "distilbert": "distilbert-base-uncased",
    "roberta-base": "roberta-base",
    "gpt2": "gpt2",
}


class BridgeConfigError(Exception):
    pass


@dataclass(frozen=True)
class BridgeConfig:
    model_id: str
    dataset_dir: Path
    output_dir: Path
    model_path: Path | None = None  # local checkpoint dir; defaults to the hub name
    batch_size: int = 32
    learning_rate: float = 2e-5
    weight_decay: float = 0.01  # the L2 regularization rate
    epochs: int = 3
    max_tokens: int = 256
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_id not in KNOWN_MODELS:
            raise BridgeConfigError(f"unknown model_id {self.model_id!r}; expected one of {list(KNOWN_MODELS)}")
        if self.batch_size < 1 or self.epochs < 1 or self.max_tokens < 8:
            raise BridgeConfigError("batch_size/epochs/max_tokens out of range")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise BridgeConfigError("learning_rate must be > 0 and weight_decay >= 0")

    @property
    def checkpoint_source(self) -> str:
        return str(self.model_path) if self.model_path else HUB_CHECKPOINTS[self.model_id]


def load_bridge_config(path: Path) -> BridgeConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BridgeConfigError(f"cannot read bridge config {path}: {exc}") from exc
    allowed = {
        "model_id", "dataset_dir", "output_dir", "model_path", "batch_size",
        "learning_rate", "weight_decay", "epochs", "max_tokens", "seed",
    }
    unknown = set(data) - allowed
    if unknown:
        raise BridgeConfigError(f"unknown bridge config keys: {sorted(unknown)}")
    for key in ("model_id", "dataset_dir", "output_dir"):
        if key not in data:
            raise BridgeConfigError(f"bridge config is missing required key {key!r}")
    defaults = dict(
        batch_size=32, learning_rate=2e-5, weight_decay=0.01, epochs=3, max_tokens=256, seed=0
    )
    return BridgeConfig(
        model_id=data["model_id"],
        dataset_dir=Path(data["dataset_dir"]),
        output_dir=Path(data["output_dir"]),
        model_path=Path(data["model_path"]) if data.get("model_path") else None,
        **{k: type(v)(data.get(k, v)) for k, v in defaults.items()},
    )
