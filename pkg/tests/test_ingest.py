"""Archive scanning, extraction, and metadata derivation."""

from __future__ import annotations

import zipfile
from pathlib import Path

import pytest

from conftest import make_docx, make_zip
from tdockit.ingest import (
    ArchiveEntry,
    DocKind,
    ExtractSkip,
    ExtractionMethod,
    IngestConfig,
    IngestError,
    IngestReport,
    classify_doc_kind,
    extract_text,
    iter_raw_docs,
    parse_tdoc_id,
    scan_archives,
    wg_from_dirs,
    year_from_dirs,
)
from tdockit.wg import wg_from_name

CFG = IngestConfig()


def _scan(root: Path, config: IngestConfig = CFG) -> tuple[list[ArchiveEntry], IngestReport]:
    report = IngestReport()
    entries = list(scan_archives(root, config, report))
    return entries, report


class TestScanArchives:
    def test_single_archive_single_member(self, tmp_path):
        (tmp_path / "R1-2009123.zip").write_bytes(make_zip({"R1-2009123.docx": make_docx(["alpha"])}))
        entries, report = _scan(tmp_path)
        assert [e.name for e in entries] == ["R1-2009123.docx"]
        assert report.corrupt_archives == 0

    def test_empty_directory(self, tmp_path):
        entries, report = _scan(tmp_path)
        assert entries == []
        assert report.corrupt_archives == 0 and report.skips == {}

    def test_corrupt_zip_counted_and_valid_one_scanned(self, tmp_path):
        (tmp_path / "bad.zip").write_bytes(b"this is not a zip archive")
        (tmp_path / "good.zip").write_bytes(
            make_zip({"a.txt": b"a", "b.txt": b"b", "c.txt": b"c"})
        )
        entries, report = _scan(tmp_path)
        assert len(entries) == 3
        assert report.corrupt_archives == 1

    def test_nested_zip_expanded_within_depth(self, tmp_path):
        inner = make_zip({"doc.txt": b"hello"})
        (tmp_path / "outer.zip").write_bytes(make_zip({"inner.zip": inner}))
        entries, report = _scan(tmp_path)
        assert [e.source_path for e in entries] == [f"{tmp_path.as_posix()}/outer.zip!inner.zip!doc.txt"]
        assert entries[0].read_bytes() == b"hello"

    def test_nested_zip_beyond_depth_skipped(self, tmp_path):
        level3 = make_zip({"deep.txt": b"x"})
        level2 = make_zip({"mid.zip": level3})
        (tmp_path / "outer.zip").write_bytes(make_zip({"inner.zip": level2}))
        entries, report = _scan(tmp_path)
        assert entries == []
        assert report.skips == {"nested_depth_exceeded": 1}
        assert report.entries_seen == 1

    def test_loose_supported_files_yielded_unsupported_ignored(self, tmp_path):
        (tmp_path / "a.txt").write_text("a")
        (tmp_path / "b.png").write_bytes(b"\x89PNG")
        entries, _ = _scan(tmp_path)
        assert [e.name for e in entries] == ["a.txt"]

    def test_deterministic_lexicographic_order(self, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "x.txt").write_text("x")
        (tmp_path / "a.txt").write_text("a")
        (tmp_path / "z.zip").write_bytes(make_zip({"m2.txt": b"2", "m1.txt": b"1"}))
        first, _ = _scan(tmp_path)
        second, _ = _scan(tmp_path)
        assert [e.source_path for e in first] == [e.source_path for e in second]
        names = [e.source_path for e in first]
        assert names == sorted(names)

    def test_unreadable_root_is_fatal(self, tmp_path):
        with pytest.raises(IngestError):
            list(scan_archives(tmp_path / "missing", CFG, IngestReport()))


class TestExtractText:
    def _entry(self, tmp_path: Path, name: str, data: bytes) -> ArchiveEntry:
        path = tmp_path / name
        path.write_bytes(data)
        return ArchiveEntry(fs_path=path)

    def test_docx_paragraphs_joined_with_newlines(self, tmp_path):
        entry = self._entry(tmp_path, "d.docx", make_docx(["alpha", "beta"]))
        text, method = extract_text(entry, CFG)
        assert text == "alpha\nbeta"
        assert method is ExtractionMethod.docx_xml

    def test_txt_decoded(self, tmp_path):
        text, method = extract_text(self._entry(tmp_path, "t.txt", b"hello"), CFG)
        assert (text, method) == ("hello", ExtractionMethod.plain_text)

    def test_html_passed_through_raw(self, tmp_path):
        text, method = extract_text(self._entry(tmp_path, "h.html", b"<p>x</p>"), CFG)
        assert (text, method) == ("<p>x</p>", ExtractionMethod.html)

    def test_doc_without_converter_skipped(self, tmp_path):
        with pytest.raises(ExtractSkip) as exc:
            extract_text(self._entry(tmp_path, "old.doc", b"text"), CFG)
        assert exc.value.reason == "unsupported_doc_no_converter"

    def test_doc_with_converter(self, tmp_path):
        config = IngestConfig(external_doc_converter="cp {in} {out}")
        text, method = extract_text(self._entry(tmp_path, "old.doc", b"converted body"), config)
        assert text == "converted body"
        assert method is ExtractionMethod.external_converter

    def test_failing_converter_skipped(self, tmp_path):
        config = IngestConfig(external_doc_converter="false {in} {out}")
        with pytest.raises(ExtractSkip) as exc:
            extract_text(self._entry(tmp_path, "old.doc", b"x"), config)
        assert exc.value.reason == "doc_converter_failed"

    def test_binary_text_rejected(self, tmp_path):
        with pytest.raises(ExtractSkip) as exc:
            extract_text(self._entry(tmp_path, "b.txt", b"ab\x00cd"), CFG)
        assert exc.value.reason == "binary_content"

    def test_corrupt_docx_skipped(self, tmp_path):
        with pytest.raises(ExtractSkip) as exc:
            extract_text(self._entry(tmp_path, "bad.docx", b"not a container"), CFG)
        assert exc.value.reason == "docx_container_error"

    def test_unsupported_extension_skipped(self, tmp_path):
        with pytest.raises(ExtractSkip) as exc:
            extract_text(self._entry(tmp_path, "img.png", b"\x89PNG"), CFG)
        assert exc.value.reason == "unsupported_extension"


class TestParseTDocId:
    def test_default_map_examples(self):
        parsed = parse_tdoc_id("R1-2009123.docx")
        assert parsed is not None
        assert parsed.tdoc_id == "R1-2009123"
        assert parsed.wg == wg_from_name("RAN1")
        assert parsed.year == 2009

    def test_no_match_returns_none(self):
        assert parse_tdoc_id("readme.txt") is None
        assert parse_tdoc_id("Draft_R1-2009123.docx") is None

    def test_two_digit_year_heuristic(self):
        parsed = parse_tdoc_id("S2-2204567.zip")
        assert parsed is not None
        assert parsed.wg == wg_from_name("SA2")
        assert parsed.year == 2022

    def test_year_unset_when_out_of_bounds(self):
        parsed = parse_tdoc_id("C1-990001.docx")
        assert parsed is not None and parsed.year is None

    def test_all_prefixes_map(self):
        for prefix, wg in (("R5", "RAN5"), ("S6", "SA6"), ("C3", "CT3"), ("C6", "CT6")):
            parsed = parse_tdoc_id(f"{prefix}-2015001.txt")
            assert parsed is not None and parsed.wg == wg_from_name(wg)


class TestDirDerivation:
    def test_wg_and_year_from_directories(self):
        dirs = ("corpus", "SA2", "2022", "docs")
        assert wg_from_dirs(dirs) == wg_from_name("SA2")
        assert year_from_dirs(dirs, (2009, 2023)) == 2022

    def test_deepest_component_wins(self):
        dirs = ("RAN1", "2015", "SA3", "2021")
        assert wg_from_dirs(dirs) == wg_from_name("SA3")
        assert year_from_dirs(dirs, (2009, 2023)) == 2021

    def test_out_of_bounds_year_ignored(self):
        assert year_from_dirs(("1999",), (2009, 2023)) is None


class TestClassifyDocKind:
    def test_change_request_signature_in_head(self):
        assert classify_doc_kind("R1-1.docx", "3GPP TSG ... CHANGE REQUEST ...", CFG) is DocKind.change_request
        assert classify_doc_kind("R1-1.docx", "lower change request form", CFG) is DocKind.change_request

    def test_draft_by_filename_stem(self):
        assert classify_doc_kind("Draft_R1-2009123.docx", "body", CFG) is DocKind.draft

    def test_template_by_filename_pattern(self):
        assert classify_doc_kind("report_template.docx", "body", CFG) is DocKind.template

    def test_ordinary_contribution(self):
        assert classify_doc_kind("R1-2009123.docx", "ordinary technical text", CFG) is DocKind.contribution

    def test_precedence_cr_over_draft(self):
        assert classify_doc_kind("Draft_R1-1.docx", "CHANGE REQUEST", CFG) is DocKind.change_request

    def test_configured_markers(self):
        config = IngestConfig(cr_filename_markers=("-CR-",), draft_head_markers=("working draft",))
        assert classify_doc_kind("R1-CR-99.docx", "x", config) is DocKind.change_request
        assert classify_doc_kind("R1-1.docx", "this working draft covers", config) is DocKind.draft


def _build_fixture_tree(root: Path) -> None:
    (root / "RAN1" / "2015").mkdir(parents=True)
    (root / "RAN1" / "2015" / "R1-150001.zip").write_bytes(
        make_zip({"R1-150001.docx": make_docx(["alpha beta"])})
    )
    (root / "SA2" / "2022").mkdir(parents=True)
    (root / "SA2" / "2022" / "S2-2204567.txt").write_text("core network text")
    # filename prefix disagrees with the directory label: directory must win
    (root / "RAN1" / "2015" / "R2-150002.txt").write_text("mislabeled body")
    # no label derivable at all
    (root / "stray.txt").write_text("unlabeled")


class TestIterRawDocs:
    def test_labels_years_and_accounting(self, tmp_path):
        _build_fixture_tree(tmp_path)
        report = IngestReport()
        docs = list(iter_raw_docs(tmp_path, CFG, report))
        by_id = {d.meta.tdoc_id: d for d in docs}
        assert by_id["R1-150001"].meta.wg == wg_from_name("RAN1")
        assert by_id["R1-150001"].meta.year == 2015
        assert by_id["S2-2204567"].meta.wg == wg_from_name("SA2")
        assert by_id["S2-2204567"].meta.year == 2022
        # directory label beats the filename prefix, and the conflict is counted
        assert by_id["R2-150002"].meta.wg == wg_from_name("RAN1")
        assert report.wg_conflicts == 1
        assert report.skips == {"no_wg_label": 1}
        assert report.entries_seen == len(docs) + sum(report.skips.values())

    def test_thread_count_does_not_change_output(self, tmp_path):
        _build_fixture_tree(tmp_path)
        r1, r2 = IngestReport(), IngestReport()
        serial = [(d.meta.tdoc_id, d.text) for d in iter_raw_docs(tmp_path, CFG, r1, threads=1)]
        pooled = [(d.meta.tdoc_id, d.text) for d in iter_raw_docs(tmp_path, CFG, r2, threads=4)]
        assert serial == pooled
        assert r1.to_dict() == r2.to_dict()

    def test_two_runs_identical(self, tmp_path):
        _build_fixture_tree(tmp_path)
        runs = []
        for _ in range(2):
            report = IngestReport()
            runs.append([(d.meta.tdoc_id, d.meta.source_path, d.text) for d in iter_raw_docs(tmp_path, CFG, report)])
        assert runs[0] == runs[1]
