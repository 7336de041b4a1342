"""Master JSON configuration: one document with per-stage sections.

Every CLI flag overrides its config key; unknown keys are rejected so typos
fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import Hyperparams
from .dataset import SplitPolicy
from .features import FeatureConfig
from .ingest import IngestConfig
from .preprocess import BoilerplateRules
from .sweeps import DEFAULT_FRACTIONS, DEFAULT_SEGMENT_CAPS, DEFAULT_WG_COMBOS


class ConfigError(Exception):
    pass


def _check_keys(section: dict, allowed: set[str], name: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in config section {name!r}: {sorted(unknown)}")


def _pair(value, name: str) -> tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a [low, high] pair, got {value!r}")
    return int(value[0]), int(value[1])


@dataclass(frozen=True)
class PreprocessSettings:
    rules: BoilerplateRules = field(default_factory=BoilerplateRules)
    min_doc_words: int = 30


@dataclass(frozen=True)
class DatasetSettings:
    policy: SplitPolicy = field(default_factory=SplitPolicy)
    max_words: int = 200
    min_tail_words: int = 20
    balance: bool = False


@dataclass(frozen=True)
class SweepSettings:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    seeds: tuple[int, ...] = (0, 1, 2)
    caps: tuple[int, ...] = DEFAULT_SEGMENT_CAPS
    combos: tuple[tuple[str, ...], ...] = DEFAULT_WG_COMBOS


@dataclass(frozen=True)
class MasterConfig:
    ingest: IngestConfig = field(default_factory=IngestConfig)
    preprocess: PreprocessSettings = field(default_factory=PreprocessSettings)
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: Hyperparams = field(default_factory=Hyperparams)
    sweep: SweepSettings = field(default_factory=SweepSettings)


def _parse_ingest(section: dict) -> IngestConfig:
    _check_keys(
        section,
        {"prefix_map", "year_bounds", "nested_zip_depth", "external_doc_converter",
         "template_patterns", "cr_filename_markers", "draft_head_markers"},
        "ingest",
    )
    defaults = IngestConfig()
    return IngestConfig(
        prefix_map=dict(section.get("prefix_map", defaults.prefix_map)),
        year_bounds=_pair(section["year_bounds"], "ingest.year_bounds") if "year_bounds" in section else defaults.year_bounds,
        nested_zip_depth=int(section.get("nested_zip_depth", defaults.nested_zip_depth)),
        external_doc_converter=section.get("external_doc_converter", defaults.external_doc_converter),
        template_patterns=tuple(section.get("template_patterns", defaults.template_patterns)),
        cr_filename_markers=tuple(section.get("cr_filename_markers", defaults.cr_filename_markers)),
        draft_head_markers=tuple(section.get("draft_head_markers", defaults.draft_head_markers)),
    )


def _parse_preprocess(section: dict) -> PreprocessSettings:
    _check_keys(
        section,
        {"caption_prefixes", "repeated_line_threshold", "pseudo_code_min_run",
         "max_paragraph_words", "min_doc_words"},
        "preprocess",
    )
    rule_defaults = BoilerplateRules()
    rules = BoilerplateRules(
        caption_prefixes=tuple(section.get("caption_prefixes", rule_defaults.caption_prefixes)),
        repeated_line_threshold=int(section.get("repeated_line_threshold", rule_defaults.repeated_line_threshold)),
        pseudo_code_min_run=int(section.get("pseudo_code_min_run", rule_defaults.pseudo_code_min_run)),
        max_paragraph_words=int(section.get("max_paragraph_words", rule_defaults.max_paragraph_words)),
    )
    return PreprocessSettings(rules=rules, min_doc_words=int(section.get("min_doc_words", 30)))


def _parse_dataset(section: dict) -> DatasetSettings:
    _check_keys(
        section,
        {"train_years", "test_years", "validation_fraction", "seed",
         "max_words", "min_tail_words", "balance"},
        "dataset",
    )
    policy_defaults = SplitPolicy()
    policy = SplitPolicy(
        train_years=_pair(section["train_years"], "dataset.train_years") if "train_years" in section else policy_defaults.train_years,
        test_years=_pair(section["test_years"], "dataset.test_years") if "test_years" in section else policy_defaults.test_years,
        validation_fraction=float(section.get("validation_fraction", policy_defaults.validation_fraction)),
        seed=int(section.get("seed", policy_defaults.seed)),
    )
    return DatasetSettings(
        policy=policy,
        max_words=int(section.get("max_words", 200)),
        min_tail_words=int(section.get("min_tail_words", 20)),
        balance=bool(section.get("balance", False)),
    )


def _parse_features(section: dict) -> FeatureConfig:
    _check_keys(section, {"min_df", "max_features", "lowercase", "include_bigrams"}, "features")
    defaults = FeatureConfig()
    return FeatureConfig(
        min_df=int(section.get("min_df", defaults.min_df)),
        max_features=int(section.get("max_features", defaults.max_features)),
        lowercase=bool(section.get("lowercase", defaults.lowercase)),
        include_bigrams=bool(section.get("include_bigrams", defaults.include_bigrams)),
    )


def _parse_train(section: dict) -> Hyperparams:
    _check_keys(
        section,
        {"batch_size", "learning_rate", "l2", "epochs", "seed", "early_stop_patience", "optimizer"},
        "train",
    )
    defaults = Hyperparams()
    return Hyperparams(
        batch_size=int(section.get("batch_size", defaults.batch_size)),
        learning_rate=float(section.get("learning_rate", defaults.learning_rate)),
        l2=float(section.get("l2", defaults.l2)),
        epochs=int(section.get("epochs", defaults.epochs)),
        seed=int(section.get("seed", defaults.seed)),
        early_stop_patience=int(section.get("early_stop_patience", defaults.early_stop_patience)),
        optimizer=str(section.get("optimizer", defaults.optimizer)),
    )


def _parse_sweep(section: dict) -> SweepSettings:
    _check_keys(section, {"fractions", "seeds", "caps", "combos"}, "sweep")
    defaults = SweepSettings()
    return SweepSettings(
        fractions=tuple(float(f) for f in section.get("fractions", defaults.fractions)),
        seeds=tuple(int(s) for s in section.get("seeds", defaults.seeds)),
        caps=tuple(int(c) for c in section.get("caps", defaults.caps)),
        combos=tuple(tuple(str(w) for w in combo) for combo in section.get("combos", defaults.combos)),
    )


def parse_config(data: dict) -> MasterConfig:
    _check_keys(data, {"ingest", "preprocess", "dataset", "features", "train", "sweep"}, "<root>")
    return MasterConfig(
        ingest=_parse_ingest(data.get("ingest", {})),
        preprocess=_parse_preprocess(data.get("preprocess", {})),
        dataset=_parse_dataset(data.get("dataset", {})),
        features=_parse_features(data.get("features", {})),
        train=_parse_train(data.get("train", {})),
        sweep=_parse_sweep(data.get("sweep", {})),
    )


def load_config(path: Path | None) -> MasterConfig:
    if path is None:
        return MasterConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return parse_config(data)


def config_snapshot(config: MasterConfig) -> dict:
    """Resolved configuration as one JSON-serializable document."""
    return {
        "ingest": {
            "prefix_map": dict(sorted(config.ingest.prefix_map.items())),
            "year_bounds": list(config.ingest.year_bounds),
            "nested_zip_depth": config.ingest.nested_zip_depth,
            "external_doc_converter": config.ingest.external_doc_converter,
            "template_patterns": list(config.ingest.template_patterns),
            "cr_filename_markers": list(config.ingest.cr_filename_markers),
            "draft_head_markers": list(config.ingest.draft_head_markers),
        },
        "preprocess": {
            "caption_prefixes": list(config.preprocess.rules.caption_prefixes),
            "repeated_line_threshold": config.preprocess.rules.repeated_line_threshold,
            "pseudo_code_min_run": config.preprocess.rules.pseudo_code_min_run,
            "max_paragraph_words": config.preprocess.rules.max_paragraph_words,
            "min_doc_words": config.preprocess.min_doc_words,
        },
        "dataset": {
            "train_years": list(config.dataset.policy.train_years),
            "test_years": list(config.dataset.policy.test_years),
            "validation_fraction": config.dataset.policy.validation_fraction,
            "seed": config.dataset.policy.seed,
            "max_words": config.dataset.max_words,
            "min_tail_words": config.dataset.min_tail_words,
            "balance": config.dataset.balance,
        },
        "features": {
            "min_df": config.features.min_df,
            "max_features": config.features.max_features,
            "lowercase": config.features.lowercase,
            "include_bigrams": config.features.include_bigrams,
        },
        "train": {
            "batch_size": config.train.batch_size,
            "learning_rate": config.train.learning_rate,
            "l2": config.train.l2,
            "epochs": config.train.epochs,
            "seed": config.train.seed,
            "early_stop_patience": config.train.early_stop_patience,
            "optimizer": config.train.optimizer,
        },
        "sweep": {
            "fractions": list(config.sweep.fractions),
            "seeds": list(config.sweep.seeds),
            "caps": list(config.sweep.caps),
            "combos": [list(c) for c in config.sweep.combos],
        },
    }
