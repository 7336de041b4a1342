"""Sparse TF-IDF features over a vocabulary fitted on training segments only.

The tokenizer is the pinned word contract from preprocessing. The IDF formula
is pinned for reproducibility: idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1,
followed by L2 normalization of each vector.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .preprocess import WORD_RE


@dataclass(frozen=True)
class FeatureConfig:
    min_df: int = 2
    max_features: int = 50000
    lowercase: bool = True
    include_bigrams: bool = False


def tokenize(text: str, lowercase: bool = True, include_bigrams: bool = False) -> list[str]:
    tokens = WORD_RE.findall(text)
    if lowercase:
        tokens = [t.lower() for t in tokens]
    if include_bigrams:
        tokens = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    return tokens


class Vocabulary:
    """Term -> (index, document frequency) with deterministic index assignment.

    Terms are ordered by (descending document frequency, ascending term) before
    indices are assigned, so two fits over the same segments agree exactly.
    """

    def __init__(self, terms: list[str], dfs: list[int], n_docs_fitted: int, config: FeatureConfig):
        self.terms = list(terms)
        self.dfs = list(dfs)
        self.n_docs_fitted = n_docs_fitted
        self.config = config
        self.index = {t: i for i, t in enumerate(self.terms)}
        self.idf = np.log((1.0 + n_docs_fitted) / (1.0 + np.asarray(self.dfs, dtype=np.float64))) + 1.0

    def __len__(self) -> int:
        return len(self.terms)

    def to_dict(self) -> dict:
        return {
            "config": {
                "min_df": self.config.min_df,
                "max_features": self.config.max_features,
                "lowercase": self.config.lowercase,
                "include_bigrams": self.config.include_bigrams,
            },
            "n_docs_fitted": self.n_docs_fitted,
            "terms": [[t, i, self.dfs[i]] for i, t in enumerate(self.terms)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        config = FeatureConfig(**data["config"])
        terms = [t for t, _, _ in data["terms"]]
        dfs = [df for _, _, df in data["terms"]]
        return cls(terms, dfs, data["n_docs_fitted"], config)

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def fit_vocabulary(texts: Iterable[str], config: FeatureConfig | None = None) -> Vocabulary:
    """Fit document frequencies over training segments and fix the term order.

    Call this with training-split segments only; the resulting IDF weights must
    never see validation or test statistics.
    """
    config = config or FeatureConfig()
    df: Counter[str] = Counter()
    n_docs = 0
    for text in texts:
        n_docs += 1
        df.update(set(tokenize(text, config.lowercase, config.include_bigrams)))
    if n_docs == 0:
        raise ValueError("cannot fit a vocabulary on an empty segment stream")
    kept = [(term, count) for term, count in df.items() if count >= config.min_df]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    kept = kept[: config.max_features]
    return Vocabulary([t for t, _ in kept], [c for _, c in kept], n_docs, config)


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray  # ascending feature indices, int32
    values: np.ndarray   # weights aligned with indices, float64
    norm: float          # 1.0 after normalization, 0.0 for the empty vector
    vocab_fingerprint: str

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def transform(text: str, vocab: Vocabulary, fingerprint: str | None = None) -> FeatureVector:
    """TF-IDF weights for one segment, L2-normalized; out-of-vocabulary terms ignored."""
    counts: Counter[str] = Counter(tokenize(text, vocab.config.lowercase, vocab.config.include_bigrams))
    idx_tf = sorted((vocab.index[t], tf) for t, tf in counts.items() if t in vocab.index)
    fp = fingerprint if fingerprint is not None else vocab.fingerprint()
    if not idx_tf:
        return FeatureVector(
            indices=np.empty(0, dtype=np.int32),
            values=np.empty(0, dtype=np.float64),
            norm=0.0,
            vocab_fingerprint=fp,
        )
    indices = np.asarray([i for i, _ in idx_tf], dtype=np.int32)
    weights = np.asarray([tf for _, tf in idx_tf], dtype=np.float64) * vocab.idf[indices]
    norm = float(math.sqrt(float(np.dot(weights, weights))))
    return FeatureVector(indices=indices, values=weights / norm, norm=1.0, vocab_fingerprint=fp)


def transform_many(texts: Iterable[str], vocab: Vocabulary) -> list[FeatureVector]:
    """Transform a batch against one fingerprint computation."""
    fp = vocab.fingerprint()
    return [transform(t, vocab, fp) for t in texts]
