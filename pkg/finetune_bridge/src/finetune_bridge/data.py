"""Reading and validating tdockit dataset exports (the only input this package touches)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

SPLITS = ("train", "validation", "test")
_ROW_KEYS = {"doc_id", "seg_index", "text", "label", "year"}


class DatasetContractError(Exception):
    pass


@dataclass
class SplitData:
    refs: list[tuple[str, int]]  # (doc_id, seg_index)
    texts: list[str]
    labels: list[int]  # indices into the sidecar label set


@dataclass
class ExportedDataset:
    label_set: list[str]
    splits: dict[str, SplitData]
    sidecar: dict

    @property
    def n_classes(self) -> int:
        return len(self.label_set)


def load_exported_dataset(dataset_dir: Path) -> ExportedDataset:
    """Load all three splits, validating every row against the sidecar."""
    dataset_dir = Path(dataset_dir)
    sidecar_path = dataset_dir / "dataset.json"
    if not sidecar_path.is_file():
        raise DatasetContractError(f"missing dataset sidecar: {sidecar_path}")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    label_set = list(sidecar["label_set"])
    label_index = {name: i for i, name in enumerate(label_set)}
    splits: dict[str, SplitData] = {}
    for split in SPLITS:
        path = dataset_dir / f"{split}.jsonl"
        if not path.is_file():
            raise DatasetContractError(f"missing split file: {path}")
        refs, texts, labels = [], [], []
        counts: dict[str, int] = {}
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetContractError(f"{path.name} line {lineno}: invalid JSON: {exc}") from exc
                if not isinstance(row, dict) or set(row) != _ROW_KEYS:
                    raise DatasetContractError(f"{path.name} line {lineno}: expected keys {sorted(_ROW_KEYS)}")
                if row["label"] not in label_index:
                    raise DatasetContractError(
                        f"{path.name} line {lineno}: label {row['label']!r} not in sidecar label_set"
                    )
                refs.append((row["doc_id"], row["seg_index"]))
                texts.append(row["text"])
                labels.append(label_index[row["label"]])
                counts[row["label"]] = counts.get(row["label"], 0) + 1
        expected = sidecar.get("counts", {}).get(split, {})
        if {k: v for k, v in counts.items()} != {k: v for k, v in expected.items()}:
            raise DatasetContractError(
                f"{split} split does not match the sidecar counts: file {counts} vs sidecar {expected}"
            )
        splits[split] = SplitData(refs=refs, texts=texts, labels=labels)
    return ExportedDataset(label_set=label_set, splits=splits, sidecar=sidecar)
