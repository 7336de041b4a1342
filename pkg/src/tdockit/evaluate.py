"""Metrics (accuracy, macro-F1, macro one-vs-rest ROC-AUC, confusion matrix),
report rendering, and scoring of externally produced prediction files.

ROC-AUC uses the midrank method per class: AUC_k is the probability that a
positive outranks a negative, counting ties as one half, which the test suite
pins against a brute-force pairwise oracle. Metrics are computed per segment
(one prediction per segment).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import ModelParams, predict_proba
from .features import Vocabulary, transform
from .preprocess import Segment

PROBA_SUM_TOL_NATIVE = 1e-9
PROBA_SUM_TOL_EXTERNAL = 1e-6

_PREDICTION_KEYS = ("doc_id", "seg_index", "true_label", "predicted_label", "proba", "model_id")


class PredictionsFileError(Exception):
    pass


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    seg_index: int
    true_label: str
    predicted_label: str
    proba: tuple[float, ...]  # ordered by the label set


@dataclass
class EvalReport:
    label_set: list[str]
    accuracy: float
    macro_f1: float
    roc_auc_macro_ovr: float | None
    per_class: dict[str, dict[str, float]]
    confusion: list[list[int]]  # rows true, columns predicted
    n_predictions: int
    zero_f1_flagged: list[str] = field(default_factory=list)
    auc_excluded: list[str] = field(default_factory=list)
    argmax_mismatches: int = 0
    model_id: str | None = None
    config_fingerprint: str = ""

    def to_dict(self) -> dict:
        return {
            "label_set": self.label_set,
            "n_predictions": self.n_predictions,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "roc_auc_macro_ovr": self.roc_auc_macro_ovr,
            "per_class": self.per_class,
            "confusion": self.confusion,
            "zero_f1_flagged": self.zero_f1_flagged,
            "auc_excluded": self.auc_excluded,
            "argmax_mismatches": self.argmax_mismatches,
            "model_id": self.model_id,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_text(self) -> str:
        width = max(5, *(len(n) for n in self.label_set))
        lines = [
            f"predictions: {self.n_predictions}"
            + (f"    model: {self.model_id}" if self.model_id else ""),
            f"accuracy: {self.accuracy:.4f}    macro-F1: {self.macro_f1:.4f}    "
            + (
                f"ROC-AUC (macro OVR): {self.roc_auc_macro_ovr:.4f}"
                if self.roc_auc_macro_ovr is not None
                else "ROC-AUC (macro OVR): n/a"
            ),
            "",
            f"{'class':<{width}}  {'prec':>7}  {'recall':>7}  {'f1':>7}  {'support':>8}",
        ]
        for name in self.label_set:
            c = self.per_class[name]
            lines.append(
                f"{name:<{width}}  {c['precision']:>7.4f}  {c['recall']:>7.4f}  "
                f"{c['f1']:>7.4f}  {int(c['support']):>8}"
            )
        lines.append("")
        lines.append("confusion (rows true, columns predicted):")
        header = " " * (width + 2) + "  ".join(f"{n:>{width}}" for n in self.label_set)
        lines.append(header)
        for name, row in zip(self.label_set, self.confusion):
            lines.append(f"{name:<{width}}  " + "  ".join(f"{v:>{width}}" for v in row))
        if self.zero_f1_flagged:
            lines.append(f"flagged zero-F1 classes (no actual or predicted positives): {self.zero_f1_flagged}")
        if self.auc_excluded:
            lines.append(f"classes excluded from ROC-AUC (single-sided): {self.auc_excluded}")
        return "\n".join(lines) + "\n"


def accuracy(preds: Sequence[Prediction]) -> float:
    """Fraction of predictions whose predicted label equals the true label."""
    if not preds:
        raise ValueError("accuracy needs at least one prediction")
    return sum(1 for p in preds if p.predicted_label == p.true_label) / len(preds)


def confusion_matrix(preds: Sequence[Prediction], label_set: Sequence[str]) -> list[list[int]]:
    index = {name: i for i, name in enumerate(label_set)}
    matrix = [[0] * len(label_set) for _ in label_set]
    for p in preds:
        matrix[index[p.true_label]][index[p.predicted_label]] += 1
    return matrix


def _per_class_prf(confusion: list[list[int]], label_set: Sequence[str]) -> dict[str, dict[str, float]]:
    out = {}
    for i, name in enumerate(label_set):
        tp = confusion[i][i]
        actual = sum(confusion[i])
        predicted = sum(row[i] for row in confusion)
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[name] = {"precision": precision, "recall": recall, "f1": f1, "support": float(actual)}
    return out


def macro_f1(preds: Sequence[Prediction], label_set: Sequence[str]) -> float:
    """Unweighted mean of per-class F1; a class with no actual and no predicted
    positives contributes 0 by convention (flagged in the full report)."""
    if not preds:
        raise ValueError("macro_f1 needs at least one prediction")
    confusion = confusion_matrix(preds, label_set)
    per_class = _per_class_prf(confusion, label_set)
    return sum(c["f1"] for c in per_class.values()) / len(label_set)


def _midrank_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Rank-statistic AUC with the half-tie convention (midranks)."""
    n = len(scores)
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n_pos = int(positive.sum())
    n_neg = n - n_pos
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_auc_macro_ovr(preds: Sequence[Prediction], label_set: Sequence[str]) -> tuple[float, list[str]]:
    """Macro-averaged one-vs-rest AUC over classes with both positives and negatives.

    Returns (mean AUC over included classes, excluded class names). Raises when
    every class is single-sided.
    """
    if not preds:
        raise ValueError("roc_auc_macro_ovr needs at least one prediction")
    true = np.asarray([p.true_label for p in preds])
    proba = np.asarray([p.proba for p in preds], dtype=np.float64)
    aucs = []
    excluded = []
    for k, name in enumerate(label_set):
        positive = true == name
        n_pos = int(positive.sum())
        if n_pos == 0 or n_pos == len(preds):
            excluded.append(name)
            continue
        aucs.append(_midrank_auc(proba[:, k], positive))
    if not aucs:
        raise ValueError("no class has both positive and negative examples")
    return float(np.mean(aucs)), excluded


def evaluate_predictions(
    preds: Sequence[Prediction],
    label_set: Sequence[str],
    model_id: str | None = None,
    config_fingerprint: str = "",
    proba_sum_tol: float = PROBA_SUM_TOL_NATIVE,
) -> EvalReport:
    """Compute the full metrics bundle for a prediction list."""
    if not preds:
        raise ValueError("cannot evaluate an empty prediction list")
    argmax_mismatches = 0
    for p in preds:
        if len(p.proba) != len(label_set):
            raise ValueError(f"prediction {p.doc_id}/{p.seg_index}: proba length {len(p.proba)} != K={len(label_set)}")
        if abs(sum(p.proba) - 1.0) > proba_sum_tol:
            raise ValueError(f"prediction {p.doc_id}/{p.seg_index}: probabilities sum to {sum(p.proba)!r}")
        if label_set[int(np.argmax(p.proba))] != p.predicted_label:
            argmax_mismatches += 1
    confusion = confusion_matrix(preds, label_set)
    per_class = _per_class_prf(confusion, label_set)
    flagged = [
        name
        for i, name in enumerate(label_set)
        if sum(confusion[i]) == 0 and sum(row[i] for row in confusion) == 0
    ]
    try:
        auc, excluded = roc_auc_macro_ovr(preds, label_set)
    except ValueError:
        auc, excluded = None, list(label_set)
    return EvalReport(
        label_set=list(label_set),
        accuracy=accuracy(preds),
        macro_f1=sum(c["f1"] for c in per_class.values()) / len(label_set),
        roc_auc_macro_ovr=auc,
        per_class=per_class,
        confusion=confusion,
        n_predictions=len(preds),
        zero_f1_flagged=flagged,
        auc_excluded=excluded,
        argmax_mismatches=argmax_mismatches,
        model_id=model_id,
        config_fingerprint=config_fingerprint,
    )


def document_majority_vote(preds: Sequence[Prediction], label_set: Sequence[str]) -> dict:
    """Optional post-hoc document-level view: majority vote over a document's
    segment predictions, ties broken by the lowest label index."""
    if not preds:
        raise ValueError("cannot aggregate an empty prediction list")
    rank = {name: i for i, name in enumerate(label_set)}
    by_doc: dict[str, list[Prediction]] = {}
    for p in preds:
        by_doc.setdefault(p.doc_id, []).append(p)
    correct = 0
    for doc_id, doc_preds in by_doc.items():
        votes: dict[str, int] = {}
        for p in doc_preds:
            votes[p.predicted_label] = votes.get(p.predicted_label, 0) + 1
        winner = min(votes, key=lambda name: (-votes[name], rank[name]))
        if winner == doc_preds[0].true_label:
            correct += 1
    return {"n_documents": len(by_doc), "accuracy": correct / len(by_doc)}


def predict_segments(
    params: ModelParams,
    vocab: Vocabulary,
    segments: Iterable[Segment],
    texts: Iterable[str] | None = None,
) -> list[Prediction]:
    """Run the native model over segments; ``texts`` overrides segment text
    (used by the segment-length sweep to evaluate truncated copies)."""
    fp = vocab.fingerprint()
    preds = []
    seg_list = list(segments)
    text_list = [s.text for s in seg_list] if texts is None else list(texts)
    for seg, text in zip(seg_list, text_list):
        proba = predict_proba(params, transform(text, vocab, fp))
        preds.append(
            Prediction(
                doc_id=seg.doc_id,
                seg_index=seg.seg_index,
                true_label=seg.label.name,
                predicted_label=params.label_set[int(np.argmax(proba))],
                proba=tuple(float(v) for v in proba),
            )
        )
    return preds


def write_predictions(preds: Sequence[Prediction], model_id: str, path: Path) -> None:
    """Write the predictions JSON Lines file (the cross-component contract)."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            fh.write(
                json.dumps(
                    {
                        "doc_id": p.doc_id,
                        "seg_index": p.seg_index,
                        "true_label": p.true_label,
                        "predicted_label": p.predicted_label,
                        "proba": list(p.proba),
                        "model_id": model_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_predictions(path: Path, label_set: Sequence[str]) -> tuple[list[Prediction], str]:
    """Parse and validate a predictions file; errors name the offending line."""
    preds: list[Prediction] = []
    model_id: str | None = None
    labels = set(label_set)
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionsFileError(f"{path} line {lineno}: invalid JSON: {exc}") from exc

            def fail(msg: str) -> PredictionsFileError:
                return PredictionsFileError(f"{path} line {lineno}: {msg}")

            if not isinstance(row, dict) or set(row) != set(_PREDICTION_KEYS):
                raise fail(f"expected exactly the keys {list(_PREDICTION_KEYS)}")
            if not isinstance(row["doc_id"], str) or not isinstance(row["model_id"], str):
                raise fail("doc_id and model_id must be strings")
            if not isinstance(row["seg_index"], int) or isinstance(row["seg_index"], bool):
                raise fail("seg_index must be an integer")
            for key in ("true_label", "predicted_label"):
                if row[key] not in labels:
                    raise fail(f"{key} {row[key]!r} not in the dataset label set")
            proba = row["proba"]
            if (
                not isinstance(proba, list)
                or len(proba) != len(label_set)
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in proba)
            ):
                raise fail(f"proba must be a list of {len(label_set)} numbers")
            if not all(math.isfinite(v) for v in proba):
                raise fail("proba contains non-finite values")
            if abs(sum(proba) - 1.0) > PROBA_SUM_TOL_EXTERNAL:
                raise fail(f"proba sums to {sum(proba)!r}, not 1")
            if model_id is None:
                model_id = row["model_id"]
            elif row["model_id"] != model_id:
                raise fail(f"model_id changed from {model_id!r} to {row['model_id']!r}")
            preds.append(
                Prediction(
                    doc_id=row["doc_id"],
                    seg_index=row["seg_index"],
                    true_label=row["true_label"],
                    predicted_label=row["predicted_label"],
                    proba=tuple(float(v) for v in proba),
                )
            )
    if not preds:
        raise PredictionsFileError(f"{path}: no predictions found")
    return preds, model_id or ""


def score_external_predictions(path: Path, label_set: Sequence[str]) -> EvalReport:
    """Validate and score a predictions file produced outside the native model."""
    preds, model_id = read_predictions(path, label_set)
    return evaluate_predictions(
        preds,
        label_set,
        model_id=model_id,
        proba_sum_tol=PROBA_SUM_TOL_EXTERNAL,
    )
