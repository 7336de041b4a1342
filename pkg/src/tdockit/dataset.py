"""Reproducible dataset manifests: year splits, subsampling, WG filtering, export.

Train/validation splitting happens at the document level (segments of one
document are near-duplicates, so splitting them across train and validation
would leak). Subsampling retains a prefix of one seeded permutation of the
train-era documents, which makes sweeps over fractions use nested datasets.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .preprocess import Segment, count_words
from .wg import canonical_order, wg_from_name

TRAIN, VALIDATION, TEST = "train", "validation", "test"
SPLITS = (TRAIN, VALIDATION, TEST)

DATASET_SIDECAR = "dataset.json"


class ManifestError(Exception):
    pass


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class SplitPolicy:
    train_years: tuple[int, int] = (2010, 2019)
    test_years: tuple[int, int] = (2020, 2023)
    validation_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_years[0] > self.train_years[1] or self.test_years[0] > self.test_years[1]:
            raise ManifestError(f"year range reversed: {self}")
        if self.train_years[1] >= self.test_years[0] and self.test_years[1] >= self.train_years[0]:
            raise ManifestError(f"train and test year ranges overlap: {self}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ManifestError(f"validation_fraction out of range: {self.validation_fraction}")


@dataclass(frozen=True)
class DocEntry:
    label: str
    year: int
    seg_count: int


@dataclass(frozen=True)
class Filters:
    train_years: tuple[int, int]
    test_years: tuple[int, int]
    wg_set: tuple[str, ...] | None
    fraction: float
    max_words: int


@dataclass
class DatasetManifest:
    label_set: list[str]
    splits: dict[str, list[str]]  # split name -> sorted doc ids
    docs: dict[str, DocEntry]
    policy: SplitPolicy
    filters: Filters
    excluded_segments: int = 0

    @property
    def seed(self) -> int:
        return self.policy.seed

    def refs(self, split: str) -> list[tuple[str, int]]:
        """Segment references (doc_id, seg_index) for one split."""
        out = []
        for doc_id in self.splits[split]:
            out.extend((doc_id, i) for i in range(self.docs[doc_id].seg_count))
        return out

    def stats(self) -> dict[str, dict[str, int]]:
        """Per-split, per-WG segment counts, recomputed from the splits."""
        out: dict[str, dict[str, int]] = {}
        for split in SPLITS:
            counts: dict[str, int] = {}
            for doc_id in self.splits.get(split, []):
                entry = self.docs[doc_id]
                counts[entry.label] = counts.get(entry.label, 0) + entry.seg_count
            out[split] = dict(sorted(counts.items()))
        return out

    def split_segment_count(self, split: str) -> int:
        return sum(self.docs[d].seg_count for d in self.splits[split])

    def train_era_doc_ids(self) -> list[str]:
        return sorted(set(self.splits[TRAIN]) | set(self.splits[VALIDATION]))


def _select_validation_docs(
    doc_ids: Iterable[str],
    docs: Mapping[str, DocEntry],
    fraction: float,
    seed: int,
) -> set[str]:
    """Seeded shuffle, then the prefix whose segment total is closest to the target.

    Pure function of the document *set* and seed, so re-running it on the same
    set reproduces the same validation split exactly.
    """
    ordered = sorted(doc_ids)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    total = sum(docs[d].seg_count for d in ordered)
    target = fraction * total
    chosen: set[str] = set()
    cum = 0
    for doc_id in ordered:
        nxt = cum + docs[doc_id].seg_count
        if abs(nxt - target) < abs(cum - target):
            chosen.add(doc_id)
            cum = nxt
        else:
            break
    return chosen


def build_manifest(segments: Iterable[Segment], policy: SplitPolicy, max_words: int) -> DatasetManifest:
    """Assign segments to train/validation/test by document year.

    Documents outside both year ranges are excluded and counted. Train-era
    documents are split into train/validation with the seeded document-level
    procedure; the test era is never touched by the seed.
    """
    docs: dict[str, DocEntry] = {}
    seg_counts: dict[str, int] = {}
    labels: dict[str, str] = {}
    years: dict[str, int] = {}
    for seg in segments:
        if seg.doc_id in labels and (labels[seg.doc_id] != seg.label.name or years[seg.doc_id] != seg.year):
            raise ManifestError(f"document {seg.doc_id!r} has inconsistent label/year across segments")
        labels[seg.doc_id] = seg.label.name
        years[seg.doc_id] = seg.year
        seg_counts[seg.doc_id] = seg_counts.get(seg.doc_id, 0) + 1

    train_era: list[str] = []
    test_era: list[str] = []
    excluded_segments = 0
    for doc_id, year in years.items():
        entry = DocEntry(label=labels[doc_id], year=year, seg_count=seg_counts[doc_id])
        if policy.train_years[0] <= year <= policy.train_years[1]:
            train_era.append(doc_id)
            docs[doc_id] = entry
        elif policy.test_years[0] <= year <= policy.test_years[1]:
            test_era.append(doc_id)
            docs[doc_id] = entry
        else:
            excluded_segments += entry.seg_count

    if not train_era:
        raise ManifestError("no documents fall in the train-era year range")
    if not test_era:
        raise ManifestError("no documents fall in the test-era year range")

    val = _select_validation_docs(train_era, docs, policy.validation_fraction, policy.seed)
    splits = {
        TRAIN: sorted(set(train_era) - val),
        VALIDATION: sorted(val),
        TEST: sorted(test_era),
    }
    label_set = canonical_order({e.label for e in docs.values()})
    filters = Filters(
        train_years=policy.train_years,
        test_years=policy.test_years,
        wg_set=None,
        fraction=1.0,
        max_words=max_words,
    )
    return DatasetManifest(
        label_set=label_set,
        splits=splits,
        docs=docs,
        policy=policy,
        filters=filters,
        excluded_segments=excluded_segments,
    )


def subsample(manifest: DatasetManifest, fraction: float, seed: int) -> DatasetManifest:
    """Retain a seeded-permutation prefix of ceil(fraction * N) train-era documents.

    The same seed gives nested prefixes across fractions. Validation is
    re-derived from the retained documents with the manifest's own policy seed,
    so fraction=1.0 reproduces the input manifest exactly. The test split is
    untouched.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    train_era = manifest.train_era_doc_ids()
    perm = list(train_era)
    random.Random(seed).shuffle(perm)
    retained = set(perm[: math.ceil(fraction * len(perm))])
    val = _select_validation_docs(retained, manifest.docs, manifest.policy.validation_fraction, manifest.policy.seed)
    splits = {
        TRAIN: sorted(retained - val),
        VALIDATION: sorted(val),
        TEST: list(manifest.splits[TEST]),
    }
    docs = {d: manifest.docs[d] for d in (*retained, *manifest.splits[TEST])}
    return DatasetManifest(
        label_set=list(manifest.label_set),
        splits=splits,
        docs=docs,
        policy=manifest.policy,
        filters=replace(manifest.filters, fraction=manifest.filters.fraction * fraction),
        excluded_segments=manifest.excluded_segments,
    )


def filter_wgs(manifest: DatasetManifest, wg_set: Iterable[str]) -> DatasetManifest:
    """Restrict the manifest to the given working groups (at least two)."""
    names = {wg_from_name(n).name for n in wg_set}
    if len(names) < 2:
        raise ValueError(f"classification needs at least 2 working groups, got {sorted(names)}")
    missing = names - set(manifest.label_set)
    if missing:
        raise ValueError(f"working groups not in this dataset: {sorted(missing)}")
    keep = {d for d, e in manifest.docs.items() if e.label in names}
    splits = {split: [d for d in ids if d in keep] for split, ids in manifest.splits.items()}
    return DatasetManifest(
        label_set=canonical_order(names),
        splits=splits,
        docs={d: manifest.docs[d] for d in keep},
        policy=manifest.policy,
        filters=replace(manifest.filters, wg_set=tuple(canonical_order(names))),
        excluded_segments=manifest.excluded_segments,
    )


def balance_manifest(manifest: DatasetManifest, seed: int) -> DatasetManifest:
    """Downsample train-split documents per class toward the minority class's
    segment count. Validation and test are untouched."""
    stats = manifest.stats()[TRAIN]
    if not stats:
        raise ManifestError("train split is empty")
    target = min(stats.values())
    rng = random.Random(seed)
    kept: list[str] = []
    for label in manifest.label_set:
        doc_ids = [d for d in manifest.splits[TRAIN] if manifest.docs[d].label == label]
        rng.shuffle(doc_ids)
        cum = 0
        for doc_id in doc_ids:
            nxt = cum + manifest.docs[doc_id].seg_count
            if abs(nxt - target) > abs(cum - target):
                break
            kept.append(doc_id)
            cum = nxt
    splits = dict(manifest.splits)
    splits[TRAIN] = sorted(kept)
    docs = {d: manifest.docs[d] for ids in splits.values() for d in ids}
    return DatasetManifest(
        label_set=list(manifest.label_set),
        splits=splits,
        docs=docs,
        policy=manifest.policy,
        filters=manifest.filters,
        excluded_segments=manifest.excluded_segments,
    )


def _sidecar_dict(manifest: DatasetManifest) -> dict:
    return {
        "label_set": list(manifest.label_set),
        "policy": {
            "train_years": list(manifest.policy.train_years),
            "test_years": list(manifest.policy.test_years),
            "validation_fraction": manifest.policy.validation_fraction,
            "seed": manifest.policy.seed,
        },
        "filters": {
            "wg_set": list(manifest.filters.wg_set) if manifest.filters.wg_set else None,
            "fraction": manifest.filters.fraction,
            "max_words": manifest.filters.max_words,
        },
        "seed": manifest.seed,
        "excluded_segments": manifest.excluded_segments,
        "counts": manifest.stats(),
    }


def export_dataset(
    manifest: DatasetManifest,
    segments_by_doc: Mapping[str, list[Segment]],
    out_dir: Path,
) -> dict[str, Path]:
    """Write one JSON Lines file per split plus the dataset sidecar.

    Line schema (key order fixed): doc_id, seg_index, text, label, year.
    Labels are canonical WG name strings, never indices.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for split in SPLITS:
        path = out_dir / f"{split}.jsonl"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for doc_id, seg_index in manifest.refs(split):
                doc_segs = segments_by_doc.get(doc_id)
                if doc_segs is None or seg_index >= len(doc_segs):
                    raise ExportError(f"dangling segment reference ({doc_id!r}, {seg_index})")
                seg = doc_segs[seg_index]
                fh.write(
                    json.dumps(
                        {
                            "doc_id": seg.doc_id,
                            "seg_index": seg.seg_index,
                            "text": seg.text,
                            "label": seg.label.name,
                            "year": seg.year,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        paths[split] = path
    sidecar = out_dir / DATASET_SIDECAR
    sidecar.write_text(json.dumps(_sidecar_dict(manifest), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    paths["sidecar"] = sidecar
    return paths


def segments_for(manifest: DatasetManifest, segments_by_doc: Mapping[str, list[Segment]], split: str) -> list[Segment]:
    """Materialize one split of any manifest over the same segment store."""
    return [segments_by_doc[d][i] for d, i in manifest.refs(split)]


@dataclass
class LoadedDataset:
    manifest: DatasetManifest
    segments: dict[str, list[Segment]]  # doc_id -> segments in seg_index order

    def split_segments(self, split: str) -> list[Segment]:
        return segments_for(self.manifest, self.segments, split)


def load_dataset(dataset_dir: Path) -> LoadedDataset:
    """Re-import an exported dataset; verifies sidecar counts against the files."""
    dataset_dir = Path(dataset_dir)
    sidecar_path = dataset_dir / DATASET_SIDECAR
    if not sidecar_path.is_file():
        raise ExportError(f"missing dataset sidecar: {sidecar_path}")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    policy = SplitPolicy(
        train_years=tuple(sidecar["policy"]["train_years"]),
        test_years=tuple(sidecar["policy"]["test_years"]),
        validation_fraction=sidecar["policy"]["validation_fraction"],
        seed=sidecar["policy"]["seed"],
    )
    segments: dict[str, list[Segment]] = {}
    splits: dict[str, list[str]] = {}
    docs: dict[str, DocEntry] = {}
    for split in SPLITS:
        path = dataset_dir / f"{split}.jsonl"
        if not path.is_file():
            raise ExportError(f"missing split file: {path}")
        doc_ids: dict[str, None] = {}
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                try:
                    row = json.loads(line)
                    seg = Segment(
                        doc_id=row["doc_id"],
                        seg_index=row["seg_index"],
                        text=row["text"],
                        word_count=count_words(row["text"]),
                        label=wg_from_name(row["label"]),
                        year=row["year"],
                    )
                except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                    raise ExportError(f"{path.name} line {lineno}: {exc}") from exc
                segments.setdefault(seg.doc_id, []).append(seg)
                doc_ids[seg.doc_id] = None
        splits[split] = sorted(doc_ids)
        for doc_id in doc_ids:
            segs = segments[doc_id]
            docs[doc_id] = DocEntry(label=segs[0].label.name, year=segs[0].year, seg_count=len(segs))
    for doc_segs in segments.values():
        doc_segs.sort(key=lambda s: s.seg_index)
    filters = Filters(
        train_years=policy.train_years,
        test_years=policy.test_years,
        wg_set=tuple(sidecar["filters"]["wg_set"]) if sidecar["filters"]["wg_set"] else None,
        fraction=sidecar["filters"]["fraction"],
        max_words=sidecar["filters"]["max_words"],
    )
    manifest = DatasetManifest(
        label_set=list(sidecar["label_set"]),
        splits=splits,
        docs=docs,
        policy=policy,
        filters=filters,
        excluded_segments=sidecar["excluded_segments"],
    )
    if manifest.stats() != {k: dict(v) for k, v in sidecar["counts"].items()}:
        raise ExportError("sidecar counts do not match the split files")
    return LoadedDataset(manifest=manifest, segments=segments)


def check_manifest(manifest: DatasetManifest) -> None:
    """Raise ManifestError on any leakage or self-consistency violation."""
    train_docs = set(manifest.splits[TRAIN])
    val_docs = set(manifest.splits[VALIDATION])
    test_docs = set(manifest.splits[TEST])
    if train_docs & val_docs:
        raise ManifestError("train and validation share documents")
    if (train_docs | val_docs) & test_docs:
        raise ManifestError("train-era and test-era splits share documents")
    lo, hi = manifest.filters.train_years
    for doc_id in train_docs | val_docs:
        if not lo <= manifest.docs[doc_id].year <= hi:
            raise ManifestError(f"train-era document {doc_id!r} outside {lo}-{hi}")
    lo, hi = manifest.filters.test_years
    for doc_id in test_docs:
        if not lo <= manifest.docs[doc_id].year <= hi:
            raise ManifestError(f"test document {doc_id!r} outside {lo}-{hi}")
    for doc_id, entry in manifest.docs.items():
        if entry.label not in manifest.label_set:
            raise ManifestError(f"document {doc_id!r} label {entry.label!r} not in label_set")
