"""Prediction export in the toolkit's predictions JSON Lines schema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .data import load_exported_dataset
from .training import LABELS_FILE, _encode_split, _make_collate


class PredictError(Exception):
    pass


@dataclass
class PredictResult:
    predictions_path: Path
    n_predictions: int
    internal_accuracy: float  # must agree with the toolkit's scorer


def _load_checkpoint(checkpoint_dir: Path):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    checkpoint_dir = Path(checkpoint_dir)
    labels_path = checkpoint_dir / LABELS_FILE
    if not labels_path.is_file():
        raise PredictError(f"checkpoint is missing its labels sidecar: {labels_path}")
    labels_meta = json.loads(labels_path.read_text(encoding="utf-8"))
    model = AutoModelForSequenceClassification.from_pretrained(checkpoint_dir)
    tokenizer = AutoTokenizer.from_pretrained(checkpoint_dir)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    return model, tokenizer, labels_meta


@torch.no_grad()
def predict(
    checkpoint_dir: Path,
    dataset_dir: Path,
    out_path: Path,
    split: str = "test",
    batch_size: int = 32,
    max_tokens: int = 256,
) -> PredictResult:
    """Run the fine-tuned checkpoint over one split and write the predictions file.

    Refuses to run when the checkpoint's label set differs from the dataset's
    (printing both), since probability rows are ordered by the label set.
    """
    dataset = load_exported_dataset(dataset_dir)
    model, tokenizer, labels_meta = _load_checkpoint(checkpoint_dir)
    if list(labels_meta["label_set"]) != list(dataset.label_set):
        raise PredictError(
            "label sets differ between checkpoint and dataset:\n"
            f"  checkpoint: {labels_meta['label_set']}\n"
            f"  dataset:    {dataset.label_set}"
        )
    model_id = labels_meta["model_id"]
    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    model.to(device)
    model.eval()

    split_data = dataset.splits[split]
    encodings = _encode_split(tokenizer, split_data.texts, max_tokens)
    collate = _make_collate(tokenizer)
    label_set = dataset.label_set
    correct = 0
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8", newline="\n") as fh:
        for start in range(0, len(encodings), batch_size):
            items = [dict(encodings[i], labels=0) for i in range(start, min(start + batch_size, len(encodings)))]
            batch = collate(items)
            batch.pop("labels")
            logits = model(**{k: v.to(device) for k, v in batch.items()}).logits
            proba = torch.softmax(logits.double(), dim=-1).cpu().numpy()
            for row_no, probs in enumerate(proba):
                idx = start + row_no
                probs = probs / probs.sum()  # renormalize away float residue
                pred_idx = int(probs.argmax())
                true_label = label_set[split_data.labels[idx]]
                predicted_label = label_set[pred_idx]
                if predicted_label == true_label:
                    correct += 1
                doc_id, seg_index = split_data.refs[idx]
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc_id,
                            "seg_index": seg_index,
                            "true_label": true_label,
                            "predicted_label": predicted_label,
                            "proba": [float(p) for p in probs],
                            "model_id": model_id,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return PredictResult(
        predictions_path=out_path,
        n_predictions=len(encodings),
        internal_accuracy=correct / len(encodings),
    )
