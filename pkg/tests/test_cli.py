"""CLI subcommands: full pipeline runs, determinism, and error discipline."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from tdockit.cli import main


def run_cli(*argv: str) -> int:
    return main([str(a) for a in argv])


def write_synth_spec(path: Path, wg_names: list[str], docs_per_wg: int, alpha: float, seed: int = 0) -> Path:
    path.write_text(
        json.dumps(
            {
                "standard": {
                    "wg_names": wg_names,
                    "docs_per_wg": docs_per_wg,
                    "words_per_doc": 320,
                    "alpha": alpha,
                    "seed": seed,
                }
            }
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    """One full synth -> ingest -> build-dataset -> train -> evaluate chain.

    The corpus is tiny (a dozen documents per group), so the training config
    bumps the learning rate; the stock defaults are sized for hundreds of
    documents per group.
    """
    base = tmp_path_factory.mktemp("cli_chain")
    spec = write_synth_spec(base / "spec.json", ["RAN1", "SA1", "CT1"], docs_per_wg=12, alpha=0.0)
    config = base / "config.json"
    config.write_text(json.dumps({"train": {"learning_rate": 0.5}}), encoding="utf-8")
    assert run_cli("synth", "--spec", spec, "--out", base / "corpus") == 0
    assert run_cli("ingest", "--root", base / "corpus", "--out", base / "ingested", "--threads", "2") == 0
    assert (
        run_cli("build-dataset", "--cleandocs", base / "ingested" / "cleandocs.jsonl", "--out", base / "dataset")
        == 0
    )
    assert run_cli("train", "--config", config, "--dataset", base / "dataset", "--out", base / "model") == 0
    assert run_cli("evaluate", "--model", base / "model", "--dataset", base / "dataset", "--out", base / "eval") == 0
    return base


class TestPipeline:
    def test_disjoint_vocabulary_classifies_perfectly(self, pipeline_dirs):
        report = json.loads((pipeline_dirs / "eval" / "report.json").read_text())
        assert report["accuracy"] == 1.0
        assert report["label_set"] == ["RAN1", "SA1", "CT1"]

    def test_ingest_report_accounts_for_everything(self, pipeline_dirs):
        report = json.loads((pipeline_dirs / "ingested" / "ingest_report.json").read_text())
        ingest = report["ingest"]
        assert ingest["entries_seen"] == ingest["raw_docs"] + sum(ingest["skips"].values())
        assert set(ingest["per_wg_docs"]) == {"RAN1", "SA1", "CT1"}

    def test_build_dataset_prints_wg_table(self, pipeline_dirs, capsys):
        # table re-printed on a fresh out dir to capture stdout
        out = pipeline_dirs / "dataset2"
        assert (
            run_cli("build-dataset", "--cleandocs", pipeline_dirs / "ingested" / "cleandocs.jsonl", "--out", out)
            == 0
        )
        captured = capsys.readouterr().out
        assert "RAN1" in captured and "Total" in captured and "test segs" in captured

    def test_external_scoring_of_native_predictions_matches(self, pipeline_dirs):
        assert (
            run_cli(
                "evaluate",
                "--predictions",
                pipeline_dirs / "eval" / "predictions.jsonl",
                "--dataset",
                pipeline_dirs / "dataset",
                "--out",
                pipeline_dirs / "eval_ext",
            )
            == 0
        )
        native = json.loads((pipeline_dirs / "eval" / "report.json").read_text())
        external = json.loads((pipeline_dirs / "eval_ext" / "report.json").read_text())
        assert external == native

    def test_training_log_written(self, pipeline_dirs):
        log = json.loads((pipeline_dirs / "model" / "training_log.json").read_text())
        assert log["epochs"] and "validation_accuracy" in log["epochs"][0]

    def test_run_manifests_written(self, pipeline_dirs):
        for stage in ("ingested", "dataset", "model", "eval"):
            manifest = json.loads((pipeline_dirs / stage / "run_manifest.json").read_text())
            assert manifest["run_id"] and manifest["artifacts"]


class TestDeterminism:
    def test_rerun_produces_identical_outputs_except_run_manifest(self, pipeline_dirs, tmp_path):
        base = pipeline_dirs
        assert run_cli("ingest", "--root", base / "corpus", "--out", tmp_path / "ingested") == 0
        assert (base / "ingested" / "cleandocs.jsonl").read_bytes() == (tmp_path / "ingested" / "cleandocs.jsonl").read_bytes()
        assert (base / "ingested" / "ingest_report.json").read_bytes() == (tmp_path / "ingested" / "ingest_report.json").read_bytes()
        assert (
            run_cli("build-dataset", "--cleandocs", tmp_path / "ingested" / "cleandocs.jsonl", "--out", tmp_path / "dataset")
            == 0
        )
        for name in ("train.jsonl", "validation.jsonl", "test.jsonl", "dataset.json"):
            assert (base / "dataset" / name).read_bytes() == (tmp_path / "dataset" / name).read_bytes()
        assert run_cli("train", "--config", base / "config.json", "--dataset", tmp_path / "dataset", "--out", tmp_path / "model") == 0
        assert (base / "model" / "model.json").read_bytes() == (tmp_path / "model" / "model.json").read_bytes()
        assert run_cli("evaluate", "--model", tmp_path / "model", "--dataset", tmp_path / "dataset", "--out", tmp_path / "eval") == 0
        assert (base / "eval" / "report.json").read_bytes() == (tmp_path / "eval" / "report.json").read_bytes()
        assert (base / "eval" / "predictions.jsonl").read_bytes() == (tmp_path / "eval" / "predictions.jsonl").read_bytes()


class TestSweepCommand:
    def test_portion_sweep_outputs(self, pipeline_dirs, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sweep": {"fractions": [0.5, 1.0], "seeds": [0]}}))
        out = tmp_path / "sweep"
        assert (
            run_cli("sweep", "--kind", "portion", "--config", config, "--dataset", pipeline_dirs / "dataset", "--out", out)
            == 0
        )
        rows = (out / "portion.csv").read_text().splitlines()
        assert rows[0].startswith("fraction,seed,")
        assert len(rows) == 3
        assert (out / "portion.json").exists()

    def test_segment_length_sweep_outputs(self, pipeline_dirs, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sweep": {"caps": [25, 200], "seeds": [0]}}))
        out = tmp_path / "sweep"
        assert (
            run_cli("sweep", "--kind", "segment-length", "--config", config, "--dataset", pipeline_dirs / "dataset", "--out", out)
            == 0
        )
        assert len((out / "segment_length.csv").read_text().splitlines()) == 3

    def test_wg_combo_sweep_outputs(self, pipeline_dirs, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sweep": {"combos": [["RAN1", "SA1"], ["RAN1", "SA1", "CT1"]], "seeds": [0]}}))
        out = tmp_path / "sweep"
        assert (
            run_cli("sweep", "--kind", "wg-combos", "--config", config, "--dataset", pipeline_dirs / "dataset", "--out", out)
            == 0
        )
        assert len((out / "wg_combos.csv").read_text().splitlines()) == 3


class TestErrorDiscipline:
    def test_existing_outputs_require_force(self, pipeline_dirs, capsys):
        code = run_cli("ingest", "--root", pipeline_dirs / "corpus", "--out", pipeline_dirs / "ingested")
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")
        assert (
            run_cli("ingest", "--root", pipeline_dirs / "corpus", "--out", pipeline_dirs / "ingested", "--force") == 0
        )

    def test_evaluate_flag_contradiction(self, pipeline_dirs, tmp_path, capsys):
        code = run_cli(
            "evaluate",
            "--model", pipeline_dirs / "model",
            "--predictions", pipeline_dirs / "eval" / "predictions.jsonl",
            "--dataset", pipeline_dirs / "dataset",
            "--out", tmp_path / "x",
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_required_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("train", "--out", "somewhere")
        assert exc.value.code == 2

    def test_unreadable_root_fails_cleanly(self, tmp_path, capsys):
        assert run_cli("ingest", "--root", tmp_path / "nope", "--out", tmp_path / "out") == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_fails_cleanly(self, pipeline_dirs, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"trian": {}}))
        assert (
            run_cli("train", "--config", config, "--dataset", pipeline_dirs / "dataset", "--out", tmp_path / "m") == 1
        )
        assert "unknown keys" in capsys.readouterr().err

    def test_config_overrides_are_honored(self, pipeline_dirs, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"dataset": {"train_years": [2016, 2019], "test_years": [2020, 2023]}}))
        out = tmp_path / "dataset"
        assert (
            run_cli(
                "build-dataset", "--config", config,
                "--cleandocs", pipeline_dirs / "ingested" / "cleandocs.jsonl",
                "--out", out,
            )
            == 0
        )
        sidecar = json.loads((out / "dataset.json").read_text())
        assert sidecar["policy"]["train_years"] == [2016, 2019]
