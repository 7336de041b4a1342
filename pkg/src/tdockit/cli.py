"""Command-line pipeline: synth, ingest, build-dataset, train, evaluate, sweep.

One master JSON config drives every stage; flags override their config keys.
All diagnostics go to standard error prefixed "error:" / "warn:"; a subcommand
exits 0 only when its report was fully written.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import classifier, evaluate, synth
from .config import ConfigError, MasterConfig, config_snapshot, load_config
from .dataset import (
    DATASET_SIDECAR,
    ExportError,
    ManifestError,
    SPLITS,
    TEST,
    TRAIN,
    VALIDATION,
    balance_manifest,
    build_manifest,
    export_dataset,
    load_dataset,
)
from .features import Vocabulary, fit_vocabulary, transform_many
from .ingest import DocKind, IngestError, IngestReport, TDocMeta, iter_raw_docs
from .preprocess import CleanDoc, PIPELINE_STEPS, clean_document, segment
from .runs import OutputExistsError, ensure_writable, fingerprint_file, fingerprint_tree, write_run_manifest
from .sweeps import run_portion_sweep, run_segment_length_sweep, run_wg_combination_suite
from .synth import NoiseSpec, SyntheticCorpusSpec, WgVocab, generate_synthetic_corpus, make_standard_spec
from .wg import wg_from_name

log = logging.getLogger("tdockit")

CLEANDOCS_FILE = "cleandocs.jsonl"
INGEST_REPORT_FILE = "ingest_report.json"


class _StderrFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        prefix = "error" if record.levelno >= logging.ERROR else "warn"
        return f"{prefix}: {record.getMessage()}"


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_StderrFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- synth

def _parse_noise(section: dict) -> NoiseSpec:
    defaults = NoiseSpec()
    return NoiseSpec(
        url_count=int(section.get("url_count", defaults.url_count)),
        html_fragment_count=int(section.get("html_fragment_count", defaults.html_fragment_count)),
        references_tail=bool(section.get("references_tail", defaults.references_tail)),
        repeated_header_copies=int(section.get("repeated_header_copies", defaults.repeated_header_copies)),
        dropped_kind_docs_per_wg=int(section.get("dropped_kind_docs_per_wg", defaults.dropped_kind_docs_per_wg)),
        zip_every=int(section.get("zip_every", defaults.zip_every)),
    )


def _parse_synth_spec(data: dict, seed_override: int | None) -> SyntheticCorpusSpec:
    if "standard" in data:
        std = data["standard"]
        spec = make_standard_spec(
            wg_names=list(std["wg_names"]),
            docs_per_wg=int(std["docs_per_wg"]),
            words_per_doc=int(std["words_per_doc"]),
            alpha=float(std["alpha"]),
            seed=int(std.get("seed", 0)),
            core_size=int(std.get("core_size", 50)),
            shared_size=int(std.get("shared_size", 120)),
            tsg_overlap=bool(std.get("tsg_overlap", False)),
            years=tuple(std.get("years", range(2015, 2024))),
            noise=_parse_noise(std.get("noise", {})),
        )
    else:
        vocab = {
            name: WgVocab(core=tuple(v["core"]), shared=tuple(v["shared"]), alpha=float(v["alpha"]))
            for name, v in data["wg_vocab"].items()
        }
        spec = SyntheticCorpusSpec(
            wg_vocab=vocab,
            docs_per_wg=int(data["docs_per_wg"]),
            words_per_doc=int(data["words_per_doc"]),
            seed=int(data.get("seed", 0)),
            years=tuple(data.get("years", range(2015, 2024))),
            noise=_parse_noise(data.get("noise", {})),
        )
    if seed_override is not None:
        spec = SyntheticCorpusSpec(
            wg_vocab=spec.wg_vocab,
            docs_per_wg=spec.docs_per_wg,
            words_per_doc=spec.words_per_doc,
            seed=seed_override,
            years=spec.years,
            noise=spec.noise,
        )
    return spec


def _cmd_synth(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = _parse_synth_spec(data, args.seed)
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        raise OutputExistsError(f"corpus directory {out_dir} is not empty (pass --force to add anyway)")
    written = generate_synthetic_corpus(spec, out_dir)
    print(f"wrote {len(written)} files for {len(spec.wg_vocab)} working groups under {out_dir}")
    return 0


# ---------------------------------------------------------------- ingest

def _cmd_ingest(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out_dir = ensure_writable(args.out, [CLEANDOCS_FILE, INGEST_REPORT_FILE], args.force)
    root = Path(args.root)
    report = IngestReport()
    drop_counts: dict[str, int] = {}
    seen_ids: set[str] = set()
    duplicates = 0
    clean_count = 0
    threads = args.threads or os.cpu_count() or 1
    cleandocs_path = out_dir / CLEANDOCS_FILE
    with cleandocs_path.open("w", encoding="utf-8", newline="\n") as fh:
        for raw in iter_raw_docs(root, config.ingest, report, threads=threads):
            doc = clean_document(raw, config.preprocess.rules, config.preprocess.min_doc_words)
            if doc.meta.tdoc_id in seen_ids:
                duplicates += 1
                continue
            seen_ids.add(doc.meta.tdoc_id)
            if doc.dropped:
                drop_counts[doc.drop_reason or "unknown"] = drop_counts.get(doc.drop_reason or "unknown", 0) + 1
            else:
                clean_count += 1
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc.meta.tdoc_id,
                        "wg": doc.meta.wg.name if doc.meta.wg else None,
                        "year": doc.meta.year,
                        "text": doc.text,
                        "dropped": doc.dropped,
                        "reason": doc.drop_reason,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    payload = {
        "ingest": report.to_dict(),
        "cleaning": {
            "clean_docs": clean_count,
            "dropped": dict(sorted(drop_counts.items())),
            "duplicate_doc_ids": duplicates,
        },
    }
    _write_json(out_dir / INGEST_REPORT_FILE, payload)
    write_run_manifest(
        out_dir,
        command="ingest",
        config_snapshot=config_snapshot(config),
        input_fingerprints={"corpus_tree": fingerprint_tree(root)},
        artifacts=[CLEANDOCS_FILE, INGEST_REPORT_FILE],
    )
    print(
        f"entries={report.entries_seen} raw_docs={report.raw_docs} "
        f"clean={clean_count} dropped={sum(drop_counts.values())} "
        f"skipped={sum(report.skips.values())} corrupt_archives={report.corrupt_archives}"
    )
    return 0


# ---------------------------------------------------------------- build-dataset

def _read_cleandocs(path: Path) -> list[CleanDoc]:
    docs = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc = CleanDoc(
                    meta=TDocMeta(
                        tdoc_id=row["doc_id"],
                        wg=wg_from_name(row["wg"]) if row["wg"] else None,
                        year=row["year"],
                        doc_kind=DocKind.contribution,
                        source_path=str(path),
                    ),
                    text=row["text"],
                    steps_applied=list(PIPELINE_STEPS),
                    dropped=bool(row["dropped"]),
                    drop_reason=row["reason"],
                )
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise ExportError(f"{path} line {lineno}: {exc}") from exc
            docs.append(doc)
    return docs


def _cmd_build_dataset(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    settings = config.dataset
    if args.seed is not None:
        from dataclasses import replace

        settings = replace(settings, policy=replace(settings.policy, seed=args.seed))
    out_dir = ensure_writable(args.out, [f"{s}.jsonl" for s in SPLITS] + [DATASET_SIDECAR], args.force)
    docs = _read_cleandocs(args.cleandocs)
    segments_by_doc = {}
    all_segments = []
    skipped = {"dropped": 0, "no_label": 0, "no_year": 0, "no_segments": 0}
    for doc in docs:
        if doc.dropped:
            skipped["dropped"] += 1
            continue
        if doc.meta.wg is None:
            skipped["no_label"] += 1
            continue
        if doc.meta.year is None:
            skipped["no_year"] += 1
            continue
        segs = segment(doc, settings.max_words, settings.min_tail_words)
        if not segs:
            skipped["no_segments"] += 1
            continue
        segments_by_doc[doc.meta.tdoc_id] = segs
        all_segments.extend(segs)
    manifest = build_manifest(all_segments, settings.policy, settings.max_words)
    if settings.balance:
        manifest = balance_manifest(manifest, settings.policy.seed)
    export_dataset(manifest, segments_by_doc, out_dir)
    _write_json(
        out_dir / "build_report.json",
        {
            "documents_in": len(docs),
            "documents_skipped": skipped,
            "excluded_segments_by_year": manifest.excluded_segments,
            "counts": manifest.stats(),
        },
    )
    write_run_manifest(
        out_dir,
        command="build-dataset",
        config_snapshot=config_snapshot(config),
        input_fingerprints={"cleandocs": fingerprint_file(args.cleandocs)},
        artifacts=[f"{s}.jsonl" for s in SPLITS] + [DATASET_SIDECAR, "build_report.json"],
    )
    print(_render_wg_table(manifest))
    return 0


def _render_wg_table(manifest) -> str:
    stats = manifest.stats()
    width = max(5, *(len(n) for n in manifest.label_set))
    lines = [
        f"{'WG':<{width}}  {'train segs':>10}  {'valid segs':>10}  {'test segs':>10}",
    ]
    totals = {split: 0 for split in SPLITS}
    for name in manifest.label_set:
        row = []
        for split in SPLITS:
            count = stats[split].get(name, 0)
            totals[split] += count
            row.append(count)
        lines.append(f"{name:<{width}}  {row[0]:>10}  {row[1]:>10}  {row[2]:>10}")
    lines.append(
        f"{'Total':<{width}}  {totals[TRAIN]:>10}  {totals[VALIDATION]:>10}  {totals[TEST]:>10}"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------- train

def _cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    hp = config.train
    if args.seed is not None:
        from dataclasses import replace

        hp = replace(hp, seed=args.seed)
    out_dir = ensure_writable(args.out, ["model.json", "vocab.json", "training_log.json"], args.force)
    loaded = load_dataset(args.dataset)
    train_segs = loaded.split_segments(TRAIN)
    val_segs = loaded.split_segments(VALIDATION)
    vocab = fit_vocabulary((s.text for s in train_segs), config.features)
    label_index = {name: i for i, name in enumerate(loaded.manifest.label_set)}
    train_data = [
        (x, label_index[s.label.name])
        for x, s in zip(transform_many((s.text for s in train_segs), vocab), train_segs)
    ]
    val_data = [
        (x, label_index[s.label.name])
        for x, s in zip(transform_many((s.text for s in val_segs), vocab), val_segs)
    ]
    params, train_log = classifier.train(train_data, val_data, vocab, list(loaded.manifest.label_set), hp)
    vocab.save(out_dir / "vocab.json")
    classifier.save_model(params, out_dir / "model.json")
    _write_json(out_dir / "training_log.json", train_log.to_dict())
    write_run_manifest(
        out_dir,
        command="train",
        config_snapshot=config_snapshot(config),
        input_fingerprints={"dataset": fingerprint_tree(args.dataset)},
        artifacts=["model.json", "vocab.json", "training_log.json"],
    )
    best = train_log.epochs[train_log.best_epoch]
    print(
        f"trained K={params.n_classes} V={params.n_features} "
        f"epochs={len(train_log.epochs)} best_epoch={train_log.best_epoch} "
        f"val_accuracy={best.validation_accuracy:.4f}"
    )
    return 0


# ---------------------------------------------------------------- evaluate

def _cmd_evaluate(args: argparse.Namespace) -> int:
    if bool(args.model) == bool(args.predictions):
        raise ConfigError("pass exactly one of --model or --predictions")
    loaded = load_dataset(args.dataset)
    outputs = ["report.json", "report.txt"] + (["predictions.jsonl"] if args.model else [])
    out_dir = ensure_writable(args.out, outputs, args.force)
    if args.model:
        model_dir = Path(args.model)
        params = classifier.load_model(model_dir / "model.json")
        vocab = Vocabulary.load(model_dir / "vocab.json")
        if vocab.fingerprint() != params.vocab_fingerprint:
            raise ConfigError(f"vocab.json in {model_dir} does not match the model's vocabulary fingerprint")
        if params.label_set != list(loaded.manifest.label_set):
            raise ConfigError(
                f"model labels {params.label_set} do not match dataset labels {loaded.manifest.label_set}"
            )
        preds = evaluate.predict_segments(params, vocab, loaded.split_segments(TEST))
        model_id = "tdockit-softmax"
        evaluate.write_predictions(preds, model_id, out_dir / "predictions.jsonl")
        report = evaluate.evaluate_predictions(preds, loaded.manifest.label_set, model_id=model_id)
        inputs = {"model": fingerprint_file(model_dir / "model.json"), "dataset": fingerprint_tree(args.dataset)}
    else:
        preds, ext_model_id = evaluate.read_predictions(Path(args.predictions), loaded.manifest.label_set)
        report = evaluate.evaluate_predictions(
            preds, loaded.manifest.label_set, model_id=ext_model_id,
            proba_sum_tol=evaluate.PROBA_SUM_TOL_EXTERNAL,
        )
        inputs = {"predictions": fingerprint_file(args.predictions), "dataset": fingerprint_tree(args.dataset)}
    report_dict = report.to_dict()
    report_dict["document_level"] = evaluate.document_majority_vote(preds, loaded.manifest.label_set)
    _write_json(out_dir / "report.json", report_dict)
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    write_run_manifest(
        out_dir,
        command="evaluate",
        config_snapshot={},
        input_fingerprints=inputs,
        artifacts=outputs,
    )
    auc = f"{report.roc_auc_macro_ovr:.4f}" if report.roc_auc_macro_ovr is not None else "n/a"
    print(f"accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f} roc_auc={auc}")
    return 0


# ---------------------------------------------------------------- sweep

def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    loaded = load_dataset(args.dataset)
    seeds = (args.seed,) if args.seed is not None else config.sweep.seeds
    kind_files = {
        "portion": "portion",
        "wg-combos": "wg_combos",
        "segment-length": "segment_length",
    }
    stem = kind_files[args.kind]
    out_dir = ensure_writable(args.out, [f"{stem}.csv", f"{stem}.json"], args.force)
    if args.kind == "portion":
        report = run_portion_sweep(
            loaded.manifest, loaded.segments, config.sweep.fractions, seeds, config.features, config.train
        )
        param = "fraction"
    elif args.kind == "wg-combos":
        report = run_wg_combination_suite(
            loaded.manifest, loaded.segments, config.sweep.combos, seeds, config.features, config.train
        )
        param = "combo"
    else:
        report = run_segment_length_sweep(
            loaded.manifest, loaded.segments, config.sweep.caps, seeds, config.features, config.train
        )
        param = "cap"
    csv_path, json_path = report.write(out_dir, param)
    write_run_manifest(
        out_dir,
        command=f"sweep:{args.kind}",
        config_snapshot=config_snapshot(config),
        input_fingerprints={"dataset": fingerprint_tree(args.dataset)},
        artifacts=[csv_path.name, json_path.name],
    )
    for key, summary in report.grouped().items():
        print(f"{param}={key} accuracy={summary['mean_accuracy']:.4f} ± {summary['stddev_accuracy']:.4f}")
    return 0


# ---------------------------------------------------------------- parser

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--force", action="store_true", help="allow overwriting existing outputs")
    parser.add_argument("--seed", type=int, default=None, help="override the relevant config seed, where one applies")
    parser.add_argument("--threads", type=int, default=None, help="worker cap for parallel stages (default: cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdockit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic pseudo-TDoc corpus tree")
    p.add_argument("--spec", required=True, type=Path, help="synthetic corpus spec JSON")
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="scan archives, extract, clean, and spool CleanDocs")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--root", required=True, type=Path, help="corpus tree root")
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("build-dataset", help="segment CleanDocs and export the split dataset")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--cleandocs", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("train", help="fit the vocabulary and train the native classifier")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score the native model or an external predictions file")
    p.add_argument("--model", type=Path, default=None, help="model run directory")
    p.add_argument("--predictions", type=Path, default=None, help="external predictions JSONL")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="run one of the experiment sweeps")
    p.add_argument("--kind", required=True, choices=["portion", "wg-combos", "segment-length"])
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


_EXPECTED_ERRORS = (
    ConfigError,
    ExportError,
    IngestError,
    ManifestError,
    OutputExistsError,
    classifier.TrainingError,
    evaluate.PredictionsFileError,
    ValueError,
    OSError,
    json.JSONDecodeError,
)


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
