"""Experiment runners: training-set portion sweep, WG-combination suite, and
test segment-length sweep.

Each sweep point is fully isolated: it derives its own manifest, fits its own
vocabulary on that manifest's train split, trains its own model, and evaluates
on the (fixed) test split. Points are keyed by (parameter, seed) and reported
with per-group mean and standard deviation.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .classifier import Hyperparams, ModelParams, train
from .dataset import DatasetManifest, TEST, TRAIN, VALIDATION, filter_wgs, segments_for, subsample
from .evaluate import EvalReport, evaluate_predictions, predict_segments
from .features import FeatureConfig, Vocabulary, fit_vocabulary, transform_many
from .preprocess import Segment, truncate_words

DEFAULT_FRACTIONS = (0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_SEGMENT_CAPS = (25, 50, 100, 150, 200)

# The seven WG combinations reported by the full-corpus reference experiments.
DEFAULT_WG_COMBOS: tuple[tuple[str, ...], ...] = (
    ("RAN1", "SA1", "CT1"),
    ("RAN1", "RAN2", "RAN3"),
    ("RAN1", "RAN2", "RAN3", "SA1", "CT1"),
    ("RAN1", "RAN2", "RAN3", "RAN4", "SA2", "SA5"),
    ("RAN1", "RAN2", "RAN3", "SA1", "SA2", "SA3", "CT1", "CT3", "CT4"),
    ("RAN1", "RAN2", "RAN3", "RAN4", "SA1", "SA2", "SA3", "SA4", "CT1", "CT3", "CT4", "CT6"),
    ("RAN1", "RAN2", "RAN3", "RAN4", "RAN5", "SA1", "SA2", "SA3", "SA4", "SA5", "SA6", "CT1", "CT3", "CT4", "CT6"),
)


@dataclass
class SweepRow:
    key: str
    seed: int
    accuracy: float
    roc_auc: float | None
    n_train_segments: int
    n_test_segments: int


@dataclass
class SweepReport:
    kind: str
    rows: list[SweepRow]

    def grouped(self) -> dict[str, dict[str, float]]:
        groups: dict[str, list[SweepRow]] = {}
        for row in self.rows:
            groups.setdefault(row.key, []).append(row)
        out = {}
        for key, rows in groups.items():
            accs = [r.accuracy for r in rows]
            aucs = [r.roc_auc for r in rows if r.roc_auc is not None]
            out[key] = {
                "mean_accuracy": statistics.fmean(accs),
                "stddev_accuracy": statistics.stdev(accs) if len(accs) > 1 else 0.0,
                "mean_roc_auc": statistics.fmean(aucs) if aucs else None,
                "runs": len(rows),
            }
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rows": [
                {
                    "key": r.key,
                    "seed": r.seed,
                    "accuracy": r.accuracy,
                    "roc_auc": r.roc_auc,
                    "n_train_segments": r.n_train_segments,
                    "n_test_segments": r.n_test_segments,
                }
                for r in self.rows
            ],
            "summary": self.grouped(),
        }

    def write(self, out_dir: Path, param_name: str) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.kind}.csv"
        with csv_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([param_name, "seed", "accuracy", "roc_auc", "n_train_segments", "n_test_segments"])
            for r in self.rows:
                writer.writerow([r.key, r.seed, repr(r.accuracy), "" if r.roc_auc is None else repr(r.roc_auc),
                                 r.n_train_segments, r.n_test_segments])
        json_path = out_dir / f"{self.kind}.json"
        json_path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return csv_path, json_path


@dataclass
class TrainedPoint:
    params: ModelParams
    vocab: Vocabulary
    report: EvalReport


def train_eval_point(
    manifest: DatasetManifest,
    segments_by_doc: Mapping[str, list[Segment]],
    feat_config: FeatureConfig,
    hp: Hyperparams,
) -> TrainedPoint:
    """Fit vocabulary on the manifest's train split, train, evaluate on test."""
    train_segs = segments_for(manifest, segments_by_doc, TRAIN)
    val_segs = segments_for(manifest, segments_by_doc, VALIDATION)
    test_segs = segments_for(manifest, segments_by_doc, TEST)
    vocab = fit_vocabulary((s.text for s in train_segs), feat_config)
    label_index = {name: i for i, name in enumerate(manifest.label_set)}
    train_x = transform_many((s.text for s in train_segs), vocab)
    val_x = transform_many((s.text for s in val_segs), vocab)
    train_data = [(x, label_index[s.label.name]) for x, s in zip(train_x, train_segs)]
    val_data = [(x, label_index[s.label.name]) for x, s in zip(val_x, val_segs)]
    params, _ = train(train_data, val_data, vocab, list(manifest.label_set), hp)
    preds = predict_segments(params, vocab, test_segs)
    report = evaluate_predictions(preds, manifest.label_set)
    return TrainedPoint(params=params, vocab=vocab, report=report)


def run_portion_sweep(
    manifest: DatasetManifest,
    segments_by_doc: Mapping[str, list[Segment]],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    seeds: Sequence[int] = (0,),
    feat_config: FeatureConfig | None = None,
    hp: Hyperparams | None = None,
) -> SweepReport:
    """Accuracy/ROC-AUC versus the portion of train-era documents retained.

    One seed drives both the (nested) subsample permutation and the training
    shuffle for that run, so fraction points within a seed use nested data.
    """
    feat_config = feat_config or FeatureConfig()
    hp = hp or Hyperparams()
    rows = []
    for seed in seeds:
        for fraction in fractions:
            sub = subsample(manifest, fraction, seed)
            point = train_eval_point(sub, segments_by_doc, feat_config, replace(hp, seed=seed))
            rows.append(
                SweepRow(
                    key=f"{fraction:g}",
                    seed=seed,
                    accuracy=point.report.accuracy,
                    roc_auc=point.report.roc_auc_macro_ovr,
                    n_train_segments=sub.split_segment_count(TRAIN),
                    n_test_segments=point.report.n_predictions,
                )
            )
    return SweepReport(kind="portion", rows=rows)


def run_wg_combination_suite(
    manifest: DatasetManifest,
    segments_by_doc: Mapping[str, list[Segment]],
    combos: Sequence[Sequence[str]] = DEFAULT_WG_COMBOS,
    seeds: Sequence[int] = (0,),
    feat_config: FeatureConfig | None = None,
    hp: Hyperparams | None = None,
) -> SweepReport:
    """Accuracy per working-group combination (labels restricted, then retrained)."""
    feat_config = feat_config or FeatureConfig()
    hp = hp or Hyperparams()
    rows = []
    for combo in combos:
        filtered = filter_wgs(manifest, combo)
        key = "+".join(filtered.label_set)
        for seed in seeds:
            point = train_eval_point(filtered, segments_by_doc, feat_config, replace(hp, seed=seed))
            rows.append(
                SweepRow(
                    key=key,
                    seed=seed,
                    accuracy=point.report.accuracy,
                    roc_auc=point.report.roc_auc_macro_ovr,
                    n_train_segments=filtered.split_segment_count(TRAIN),
                    n_test_segments=point.report.n_predictions,
                )
            )
    return SweepReport(kind="wg_combos", rows=rows)


def run_segment_length_sweep(
    manifest: DatasetManifest,
    segments_by_doc: Mapping[str, list[Segment]],
    caps: Sequence[int] = DEFAULT_SEGMENT_CAPS,
    seeds: Sequence[int] = (0,),
    feat_config: FeatureConfig | None = None,
    hp: Hyperparams | None = None,
) -> SweepReport:
    """Accuracy versus the word cap applied to test segments.

    The model is trained once per seed on full-length segments; each cap point
    truncates every test segment to its first ``cap`` words, re-featurizes with
    the trained vocabulary, and re-evaluates.
    """
    feat_config = feat_config or FeatureConfig()
    hp = hp or Hyperparams()
    if any(cap < 1 for cap in caps):
        raise ValueError(f"segment-length caps must be >= 1, got {list(caps)}")
    test_segs = segments_for(manifest, segments_by_doc, TEST)
    rows = []
    for seed in seeds:
        point = train_eval_point(manifest, segments_by_doc, feat_config, replace(hp, seed=seed))
        for cap in caps:
            truncated = [truncate_words(s.text, cap) for s in test_segs]
            preds = predict_segments(point.params, point.vocab, test_segs, texts=truncated)
            report = evaluate_predictions(preds, manifest.label_set)
            rows.append(
                SweepRow(
                    key=str(cap),
                    seed=seed,
                    accuracy=report.accuracy,
                    roc_auc=report.roc_auc_macro_ovr,
                    n_train_segments=manifest.split_segment_count(TRAIN),
                    n_test_segments=report.n_predictions,
                )
            )
    return SweepReport(kind="segment_length", rows=rows)
