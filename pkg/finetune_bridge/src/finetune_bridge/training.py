"""Single-task single-label fine-tuning: cross-entropy over a linear head on the
pretrained encoder, constant learning rate, best-validation-epoch selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset

from .config import BridgeConfig
from .data import ExportedDataset, load_exported_dataset
from .models import architecture_note, load_model_and_tokenizer, save_checkpoint

LABELS_FILE = "labels.json"
TRAINING_LOG_FILE = "training_log.json"


class TrainingFailure(Exception):
    pass


class _SegmentDataset(Dataset):
    def __init__(self, encodings: list[dict], labels: list[int]):
        self.encodings = encodings
        self.labels = labels

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, idx: int) -> dict:
        item = dict(self.encodings[idx])
        item["labels"] = self.labels[idx]
        return item


def _encode_split(tokenizer, texts: list[str], max_tokens: int) -> list[dict]:
    encoded = tokenizer(texts, truncation=True, max_length=max_tokens)
    return [{k: encoded[k][i] for k in encoded} for i in range(len(texts))]


def _make_collate(tokenizer):
    def collate(items: list[dict]):
        labels = torch.tensor([it.pop("labels") for it in items], dtype=torch.long)
        batch = tokenizer.pad(items, return_tensors="pt")
        batch["labels"] = labels
        return batch

    return collate


@torch.no_grad()
def _accuracy(model, loader, device) -> float:
    model.eval()
    correct = total = 0
    for batch in loader:
        labels = batch.pop("labels").to(device)
        logits = model(**{k: v.to(device) for k, v in batch.items()}).logits
        correct += int((logits.argmax(dim=-1) == labels).sum())
        total += int(labels.numel())
    return correct / total


@dataclass
class FinetuneResult:
    checkpoint_dir: Path
    log: dict = field(default_factory=dict)


def finetune(config: BridgeConfig) -> FinetuneResult:
    """Fine-tune the configured checkpoint on the exported dataset.

    Keeps the best validation-accuracy epoch's weights; writes the checkpoint,
    a labels sidecar, and a training log under ``config.output_dir``.
    """
    dataset = load_exported_dataset(config.dataset_dir)
    torch.manual_seed(config.seed)
    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    model, tokenizer = load_model_and_tokenizer(config, num_labels=dataset.n_classes)
    model.to(device)

    train_split = dataset.splits["train"]
    val_split = dataset.splits["validation"]
    if not train_split.labels or not val_split.labels:
        raise TrainingFailure("train and validation splits must both be non-empty")
    collate = _make_collate(tokenizer)
    generator = torch.Generator().manual_seed(config.seed)
    train_loader = DataLoader(
        _SegmentDataset(_encode_split(tokenizer, train_split.texts, config.max_tokens), train_split.labels),
        batch_size=config.batch_size,
        shuffle=True,
        generator=generator,
        collate_fn=collate,
    )
    val_loader = DataLoader(
        _SegmentDataset(_encode_split(tokenizer, val_split.texts, config.max_tokens), val_split.labels),
        batch_size=config.batch_size,
        shuffle=False,
        collate_fn=collate,
    )

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    best_acc = -1.0
    best_epoch = -1
    epoch_rows = []
    try:
        for epoch in range(config.epochs):
            model.train()
            losses = []
            for batch in train_loader:
                labels = batch.pop("labels").to(device)
                optimizer.zero_grad()
                out = model(**{k: v.to(device) for k, v in batch.items()}, labels=labels)
                out.loss.backward()
                optimizer.step()
                losses.append(float(out.loss.detach()))
            val_acc = _accuracy(model, val_loader, device)
            is_best = val_acc > best_acc
            if is_best:
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                best_acc = val_acc
                best_epoch = epoch
            epoch_rows.append(
                {
                    "epoch": epoch,
                    "mean_train_loss": sum(losses) / len(losses),
                    "validation_accuracy": val_acc,
                    "is_best": is_best,
                }
            )
    except torch.cuda.OutOfMemoryError as exc:
        raise TrainingFailure(
            f"out of memory at batch_size={config.batch_size}; retry with a smaller batch_size"
        ) from exc
    model.load_state_dict(best_state)

    out_dir = Path(config.output_dir)
    save_checkpoint(model, tokenizer, out_dir)
    (out_dir / LABELS_FILE).write_text(
        json.dumps({"label_set": dataset.label_set, "model_id": config.model_id}, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    log = {
        "model_id": config.model_id,
        "checkpoint_source": config.checkpoint_source,
        "architecture": architecture_note(model),
        "hyperparameters": {
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "weight_decay": config.weight_decay,
            "epochs": config.epochs,
            "max_tokens": config.max_tokens,
            "seed": config.seed,
        },
        "best_epoch": best_epoch,
        "best_validation_accuracy": best_acc,
        "epochs": epoch_rows,
    }
    (out_dir / TRAINING_LOG_FILE).write_text(json.dumps(log, indent=2) + "\n", encoding="utf-8")
    return FinetuneResult(checkpoint_dir=out_dir, log=log)
