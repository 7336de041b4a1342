"""Shared fixture builders: in-memory docx files, archive trees, documents."""

from __future__ import annotations

import io
import zipfile
from pathlib import Path

import pytest

from tdockit.ingest import DocKind, RawDoc, ExtractionMethod, TDocMeta
from tdockit.preprocess import CleanDoc, PIPELINE_STEPS
from tdockit.wg import wg_from_name

_DOCX_CONTENT_TYPES = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">
<Default Extension="xml" ContentType="application/xml"/>
<Override PartName="/word/document.xml"
 ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml"/>
</Types>"""

_DOCX_DOCUMENT_TMPL = """<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<w:document xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main">
<w:body>{paragraphs}</w:body></w:document>"""


def make_docx(paragraphs: list[str]) -> bytes:
    """Minimal OOXML container with one text run per paragraph."""
    body = "".join(f"<w:p><w:r><w:t>{p}</w:t></w:r></w:p>" for p in paragraphs)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("[Content_Types].xml", _DOCX_CONTENT_TYPES)
        zf.writestr("word/document.xml", _DOCX_DOCUMENT_TMPL.format(paragraphs=body))
    return buf.getvalue()


def make_zip(members: dict[str, bytes]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, data in members.items():
            zf.writestr(name, data)
    return buf.getvalue()


def make_meta(
    tdoc_id: str = "R1-2015001",
    wg: str = "RAN1",
    year: int | None = 2015,
    kind: DocKind = DocKind.contribution,
) -> TDocMeta:
    return TDocMeta(
        tdoc_id=tdoc_id,
        wg=wg_from_name(wg) if wg else None,
        year=year,
        doc_kind=kind,
        source_path=f"fixture/{tdoc_id}.txt",
    )


def make_raw(text: str, **meta_kwargs) -> RawDoc:
    return RawDoc(meta=make_meta(**meta_kwargs), text=text, extraction_method=ExtractionMethod.plain_text)


def make_clean(text: str, **meta_kwargs) -> CleanDoc:
    return CleanDoc(meta=make_meta(**meta_kwargs), text=text, steps_applied=list(PIPELINE_STEPS))


@pytest.fixture
def tmp_tree(tmp_path: Path) -> Path:
    return tmp_path


def pipeline_dataset(
    corpus_dir: Path,
    wg_names: list[str],
    docs_per_wg: int,
    alpha: float,
    seed: int = 0,
    words_per_doc: int = 320,
    max_words: int = 200,
    tsg_overlap: bool = False,
):
    """Synth corpus -> ingest -> clean -> segment -> manifest, via library calls."""
    from tdockit.dataset import SplitPolicy, build_manifest
    from tdockit.ingest import IngestConfig, IngestReport, iter_raw_docs
    from tdockit.preprocess import clean_document, segment
    from tdockit.synth import generate_synthetic_corpus, make_standard_spec

    spec = make_standard_spec(
        wg_names, docs_per_wg=docs_per_wg, words_per_doc=words_per_doc, alpha=alpha,
        seed=seed, tsg_overlap=tsg_overlap,
    )
    generate_synthetic_corpus(spec, corpus_dir)
    report = IngestReport()
    segments_by_doc = {}
    all_segments = []
    for raw in iter_raw_docs(corpus_dir, IngestConfig(), report):
        doc = clean_document(raw)
        if doc.dropped:
            continue
        segs = segment(doc, max_words)
        if segs:
            segments_by_doc[doc.meta.tdoc_id] = segs
            all_segments.extend(segs)
    policy = SplitPolicy(train_years=(2015, 2019), test_years=(2020, 2023), seed=seed)
    manifest = build_manifest(all_segments, policy, max_words)
    return manifest, segments_by_doc
