"""Multinomial logistic regression over sparse feature vectors.

Training is plain seeded mini-batch gradient descent on the cross-entropy loss
with L2 weight (not bias) regularization, best-validation checkpointing, and
patience-based early stopping. Everything is deterministic given the seed; the
gradient is the exact analytic gradient of the reported loss, which the test
suite checks against central finite differences.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureVector, Vocabulary

MODEL_FORMAT_VERSION = 1


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class Hyperparams:
    batch_size: int = 32
    learning_rate: float = 2e-3
    l2: float = 0.01
    epochs: int = 10
    seed: int = 0
    early_stop_patience: int = 2
    optimizer: str = "gd"  # "gd" (default, exact) or opt-in "adam"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise ValueError(f"l2 must be >= 0, got {self.l2}")
        if self.optimizer not in ("gd", "adam"):
            raise ValueError(f"optimizer must be 'gd' or 'adam', got {self.optimizer!r}")


@dataclass
class ModelParams:
    W: np.ndarray  # (K, V)
    b: np.ndarray  # (K,)
    label_set: list[str]
    trained_config: Hyperparams
    vocab_fingerprint: str

    def __post_init__(self) -> None:
        if len(self.label_set) < 2:
            raise ValueError("a classifier needs at least 2 labels")
        if self.W.shape[0] != len(self.label_set) or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"parameter shapes inconsistent: W {self.W.shape}, b {self.b.shape}")

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def n_features(self) -> int:
        return self.W.shape[1]


Batch = Sequence[tuple[FeatureVector, int]]


def _check_vector(params: ModelParams, x: FeatureVector) -> None:
    if x.vocab_fingerprint != params.vocab_fingerprint:
        raise ValueError(
            "feature vector was built against a different vocabulary "
            f"({x.vocab_fingerprint[:12]}... != {params.vocab_fingerprint[:12]}...)"
        )
    if x.nnz and int(x.indices[-1]) >= params.n_features:
        raise ValueError(f"feature index {int(x.indices[-1])} out of range for V={params.n_features}")


def _logits(params: ModelParams, x: FeatureVector) -> np.ndarray:
    if x.nnz == 0:
        return params.b.copy()
    return params.W[:, x.indices] @ x.values + params.b


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max()
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum())


def loss_and_grad(params: ModelParams, batch: Batch) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Mean cross-entropy plus (l2/2)*||W||_F^2, with its exact gradient.

    The bias is not regularized. Raises on an empty batch, out-of-range labels,
    or non-finite feature values.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    l2 = params.trained_config.l2
    K = params.n_classes
    dW = l2 * params.W
    db = np.zeros(K)
    total = 0.0
    inv_b = 1.0 / len(batch)
    for x, y in batch:
        if not 0 <= y < K:
            raise ValueError(f"label index {y} out of range for K={K}")
        _check_vector(params, x)
        if x.nnz and not np.isfinite(x.values).all():
            raise ValueError("feature vector contains non-finite values")
        log_p = _log_softmax(_logits(params, x))
        total -= log_p[y]
        dz = np.exp(log_p) * inv_b
        dz[y] -= inv_b
        if x.nnz:
            dW[:, x.indices] += np.outer(dz, x.values)
        db += dz
    loss = total * inv_b + 0.5 * l2 * float(np.sum(params.W * params.W))
    return loss, (dW, db)


def predict_proba(params: ModelParams, x: FeatureVector) -> np.ndarray:
    """Softmax probabilities, computed with max-subtraction for stability."""
    _check_vector(params, x)
    z = _logits(params, x)
    e = np.exp(z - z.max())
    return e / e.sum()


def predict(params: ModelParams, x: FeatureVector) -> int:
    """Most probable label index; ties go to the lowest index."""
    return int(np.argmax(predict_proba(params, x)))


def _accuracy(params: ModelParams, data: Batch) -> float:
    correct = sum(1 for x, y in data if predict(params, x) == y)
    return correct / len(data)


class _AdamState:
    """Deterministic Adam moments for the opt-in adaptive optimizer."""

    def __init__(self, K: int, V: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.mW, self.vW = np.zeros((K, V)), np.zeros((K, V))
        self.mb, self.vb = np.zeros(K), np.zeros(K)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params: ModelParams, dW: np.ndarray, db: np.ndarray, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.mW = b1 * self.mW + (1 - b1) * dW
        self.vW = b2 * self.vW + (1 - b2) * dW * dW
        self.mb = b1 * self.mb + (1 - b1) * db
        self.vb = b2 * self.vb + (1 - b2) * db * db
        correction = math.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        params.W -= lr * correction * self.mW / (np.sqrt(self.vW) + self.eps)
        params.b -= lr * correction * self.mb / (np.sqrt(self.vb) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    mean_train_loss: float
    validation_accuracy: float
    is_best: bool


@dataclass
class TrainingLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "epochs": [asdict(e) for e in self.epochs],
        }


def train(
    train_data: Batch,
    validation_data: Batch,
    vocab: Vocabulary,
    label_set: list[str],
    hp: Hyperparams | None = None,
) -> tuple[ModelParams, TrainingLog]:
    """Seeded mini-batch gradient descent with best-validation checkpointing.

    Each epoch reshuffles the training segments with the seeded generator,
    walks batches of ``hp.batch_size``, and applies one gradient step per
    batch. Training stops after ``early_stop_patience`` epochs without a
    validation-accuracy improvement, or at ``hp.epochs``.
    """
    hp = hp or Hyperparams()
    if len(train_data) == 0 or len(validation_data) == 0:
        raise TrainingError("train and validation sets must both be non-empty")
    K, V = len(label_set), len(vocab)
    params = ModelParams(
        W=np.zeros((K, V)),
        b=np.zeros(K),
        label_set=list(label_set),
        trained_config=hp,
        vocab_fingerprint=vocab.fingerprint(),
    )
    rng = random.Random(hp.seed)
    order = list(range(len(train_data)))
    log = TrainingLog()
    best = (params.W.copy(), params.b.copy())
    best_acc = -1.0
    epochs_since_best = 0
    adam = _AdamState(K, V) if hp.optimizer == "adam" else None
    for epoch in range(hp.epochs):
        rng.shuffle(order)
        losses = []
        for batch_no, start in enumerate(range(0, len(order), hp.batch_size)):
            batch = [train_data[i] for i in order[start : start + hp.batch_size]]
            loss, (dW, db) = loss_and_grad(params, batch)
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch}, batch {batch_no}: loss={loss}")
            if adam is not None:
                adam.step(params, dW, db, hp.learning_rate)
            else:
                params.W -= hp.learning_rate * dW
                params.b -= hp.learning_rate * db
            losses.append(loss)
        val_acc = _accuracy(params, validation_data)
        is_best = val_acc > best_acc
        if is_best:
            best = (params.W.copy(), params.b.copy())
            best_acc = val_acc
            log.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        log.epochs.append(
            EpochRecord(
                epoch=epoch,
                mean_train_loss=float(np.mean(losses)),
                validation_accuracy=val_acc,
                is_best=is_best,
            )
        )
        if epochs_since_best >= hp.early_stop_patience:
            log.stopped_early = True
            break
    params.W, params.b = best
    return params, log


def save_model(params: ModelParams, path: Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "label_set": params.label_set,
        "vocab_fingerprint": params.vocab_fingerprint,
        "config": asdict(params.trained_config),
        "b": params.b.tolist(),
        "W": params.W.tolist(),
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path: Path) -> ModelParams:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {data.get('format_version')}")
    return ModelParams(
        W=np.asarray(data["W"], dtype=np.float64),
        b=np.asarray(data["b"], dtype=np.float64),
        label_set=list(data["label_set"]),
        trained_config=Hyperparams(**data["config"]),
        vocab_fingerprint=data["vocab_fingerprint"],
    )
