"""Archive-tree ingestion: scan ZIP trees, extract text, derive document metadata.

The scan yields a deterministic entry stream (lexicographic by archive path,
then entry path); extraction is a pure function of one entry, so entries can be
extracted by a worker pool and re-emitted in scan order. Every entry is
accounted for: it either becomes a RawDoc or increments exactly one skip
reason.
"""

from __future__ import annotations

import io
import logging
import re
import subprocess
import tempfile
import zipfile
from dataclasses import dataclass, field
from enum import Enum
from fnmatch import fnmatch
from pathlib import Path, PurePosixPath
from typing import Iterable, Iterator
from xml.etree import ElementTree

from .wg import DEFAULT_PREFIX_MAP, WorkingGroup, is_wg_name, wg_from_name

log = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".docx", ".htm", ".html", ".txt", ".doc")


class DocKind(str, Enum):
    contribution = "contribution"
    change_request = "change_request"
    draft = "draft"
    template = "template"
    unknown = "unknown"


class ExtractionMethod(str, Enum):
    docx_xml = "docx_xml"
    html = "html"
    plain_text = "plain_text"
    external_converter = "external_converter"


@dataclass
class TDocMeta:
    tdoc_id: str
    wg: WorkingGroup | None
    year: int | None
    doc_kind: DocKind
    source_path: str
    title: str | None = None


@dataclass
class RawDoc:
    meta: TDocMeta
    text: str
    extraction_method: ExtractionMethod


@dataclass(frozen=True)
class IngestConfig:
    prefix_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_PREFIX_MAP))
    year_bounds: tuple[int, int] = (2009, 2023)
    nested_zip_depth: int = 2
    external_doc_converter: str | None = None  # command template with {in}/{out}
    template_patterns: tuple[str, ...] = ("*template*",)
    cr_filename_markers: tuple[str, ...] = ()
    draft_head_markers: tuple[str, ...] = ()


class IngestError(Exception):
    """Fatal ingest problem (unreadable root, unwritable output)."""


class ExtractSkip(Exception):
    """Entry skipped for a recorded reason; never propagates past the driver."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class IngestReport:
    entries_seen: int = 0
    raw_docs: int = 0
    skips: dict[str, int] = field(default_factory=dict)
    corrupt_archives: int = 0
    wg_conflicts: int = 0
    per_wg_docs: dict[str, int] = field(default_factory=dict)
    per_wg_year_docs: dict[str, dict[str, int]] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skips[reason] = self.skips.get(reason, 0) + 1

    def count_doc(self, wg_name: str, year: int | None) -> None:
        self.raw_docs += 1
        self.per_wg_docs[wg_name] = self.per_wg_docs.get(wg_name, 0) + 1
        year_key = str(year) if year is not None else "unknown"
        by_year = self.per_wg_year_docs.setdefault(wg_name, {})
        by_year[year_key] = by_year.get(year_key, 0) + 1

    def to_dict(self) -> dict:
        return {
            "entries_seen": self.entries_seen,
            "raw_docs": self.raw_docs,
            "skips": dict(sorted(self.skips.items())),
            "corrupt_archives": self.corrupt_archives,
            "wg_conflicts": self.wg_conflicts,
            "per_wg_docs": dict(sorted(self.per_wg_docs.items())),
            "per_wg_year_docs": {
                wg: dict(sorted(years.items())) for wg, years in sorted(self.per_wg_year_docs.items())
            },
        }


@dataclass(frozen=True)
class ArchiveEntry:
    """One candidate file: loose on disk, or a member of a (possibly nested) ZIP."""

    fs_path: Path
    inner_path: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        if self.inner_path:
            return PurePosixPath(self.inner_path[-1]).name
        return self.fs_path.name

    @property
    def source_path(self) -> str:
        return "!".join([self.fs_path.as_posix(), *self.inner_path])

    @property
    def context_dirs(self) -> tuple[str, ...]:
        """Directory components used for WG/year inference, outermost first."""
        parts = list(self.fs_path.parent.parts)
        if self.inner_path:
            parts.append(self.fs_path.name)
        for member in self.inner_path[:-1]:
            parts.extend(PurePosixPath(member).parts)
        if self.inner_path:
            parts.extend(PurePosixPath(self.inner_path[-1]).parts[:-1])
        return tuple(parts)

    def read_bytes(self) -> bytes:
        """Read entry content through fresh handles (safe for concurrent use)."""
        if not self.inner_path:
            return self.fs_path.read_bytes()
        with zipfile.ZipFile(self.fs_path) as zf:
            data = zf.read(self.inner_path[0])
        for member in self.inner_path[1:]:
            with zipfile.ZipFile(io.BytesIO(data)) as zf:
                data = zf.read(member)
        return data


def _iter_zip_entries(
    entry_path: Path,
    inner: tuple[str, ...],
    zf: zipfile.ZipFile,
    depth: int,
    config: IngestConfig,
    report: IngestReport,
) -> Iterator[ArchiveEntry]:
    for name in sorted(zf.namelist()):
        if name.endswith("/"):
            continue
        if name.lower().endswith(".zip"):
            if depth >= config.nested_zip_depth:
                report.entries_seen += 1
                report.skip("nested_depth_exceeded")
                log.warning("nested ZIP depth %d exceeded, skipping %s!%s", depth, entry_path, name)
                continue
            try:
                data = zf.read(name)
                with zipfile.ZipFile(io.BytesIO(data)) as nested:
                    yield from _iter_zip_entries(entry_path, inner + (name,), nested, depth + 1, config, report)
            except (zipfile.BadZipFile, NotImplementedError, OSError):
                report.entries_seen += 1
                report.skip("corrupt_nested_archive")
                log.warning("corrupt nested ZIP skipped: %s!%s", entry_path, name)
            continue
        yield ArchiveEntry(fs_path=entry_path, inner_path=inner + (name,))


def scan_archives(root: Path, config: IngestConfig, report: IngestReport) -> Iterator[ArchiveEntry]:
    """Yield candidate entries under ``root`` in deterministic scan order.

    Every file inside every ZIP (nested up to ``config.nested_zip_depth``) is
    yielded, plus loose files with a supported extension. Corrupt archives are
    counted and skipped, never fatal.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"root is not a readable directory: {root}")
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        suffix = path.suffix.lower()
        if suffix == ".zip":
            try:
                with zipfile.ZipFile(path) as zf:
                    yield from _iter_zip_entries(path, (), zf, 1, config, report)
            except (zipfile.BadZipFile, NotImplementedError, OSError):
                report.corrupt_archives += 1
                log.warning("corrupt ZIP archive skipped: %s", path)
        elif suffix in SUPPORTED_EXTENSIONS:
            yield ArchiveEntry(fs_path=path)


_DOCX_W_NS = "http://schemas.openxmlformats.org/wordprocessingml/2006/main"


def _extract_docx(data: bytes) -> str:
    """Concatenate text runs of the main document part, paragraph breaks as newlines.

    Only ``word/document.xml`` is read, so header/footer parts never enter the
    text (they are re-filtered as repeated lines in preprocessing anyway).
    """
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            xml_bytes = zf.read("word/document.xml")
    except (zipfile.BadZipFile, KeyError, NotImplementedError, OSError):
        raise ExtractSkip("docx_container_error")
    try:
        tree = ElementTree.fromstring(xml_bytes)
    except ElementTree.ParseError:
        raise ExtractSkip("docx_parse_error")
    paragraphs = []
    for p in tree.iter(f"{{{_DOCX_W_NS}}}p"):
        runs = [t.text for t in p.iter(f"{{{_DOCX_W_NS}}}t") if t.text]
        paragraphs.append("".join(runs))
    return "\n".join(paragraphs)


def _decode_text(data: bytes) -> str:
    if b"\x00" in data:
        raise ExtractSkip("binary_content")
    return data.decode("utf-8", errors="replace")


def _run_doc_converter(data: bytes, template: str) -> str:
    import shlex

    with tempfile.TemporaryDirectory(prefix="tdockit_doc_") as tmp:
        in_path = Path(tmp) / "input.doc"
        out_path = Path(tmp) / "output.txt"
        in_path.write_bytes(data)
        argv = [tok.format(**{"in": str(in_path), "out": str(out_path)}) for tok in shlex.split(template)]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=120)
        except (OSError, subprocess.TimeoutExpired):
            raise ExtractSkip("doc_converter_failed")
        if proc.returncode != 0 or not out_path.exists():
            raise ExtractSkip("doc_converter_failed")
        return _decode_text(out_path.read_bytes())


def extract_text(entry: ArchiveEntry, config: IngestConfig) -> tuple[str, ExtractionMethod]:
    """Extract Unicode text from one entry, or raise ExtractSkip with a reason."""
    suffix = PurePosixPath(entry.name.lower()).suffix
    if suffix not in SUPPORTED_EXTENSIONS:
        raise ExtractSkip("unsupported_extension")
    try:
        data = entry.read_bytes()
    except (OSError, zipfile.BadZipFile, KeyError, NotImplementedError):
        raise ExtractSkip("entry_read_error")
    if suffix == ".docx":
        return _extract_docx(data), ExtractionMethod.docx_xml
    if suffix in (".htm", ".html"):
        return _decode_text(data), ExtractionMethod.html
    if suffix == ".txt":
        return _decode_text(data), ExtractionMethod.plain_text
    # .doc: only via the external converter hook
    if not config.external_doc_converter:
        raise ExtractSkip("unsupported_doc_no_converter")
    return _run_doc_converter(data, config.external_doc_converter), ExtractionMethod.external_converter


@dataclass(frozen=True)
class ParsedTDocId:
    tdoc_id: str
    wg: WorkingGroup
    year: int | None


def _year_in_bounds(year: int, bounds: tuple[int, int]) -> bool:
    return bounds[0] <= year <= bounds[1]


def parse_tdoc_id(filename: str, prefix_map: dict[str, str] | None = None,
                  year_bounds: tuple[int, int] = (2009, 2023)) -> ParsedTDocId | None:
    """Parse ``<prefix>-<digits><extension>`` filenames into (tdoc_id, wg, year).

    The year comes from a digit-prefix heuristic on the numeric part (4-digit,
    then 2-digit two-thousands form), validated against ``year_bounds``; the
    caller prefers a directory-derived year when one exists. Returns None when
    the filename does not match -- that is a fallback signal, not an error.
    """
    prefix_map = prefix_map if prefix_map is not None else DEFAULT_PREFIX_MAP
    m = re.match(r"^([A-Za-z]+[0-9]*)-([0-9]+)(\.[A-Za-z0-9]+)?$", filename)
    if m is None:
        return None
    prefix, digits = m.group(1), m.group(2)
    wg_name = prefix_map.get(prefix)
    if wg_name is None:
        return None
    year = None
    if len(digits) >= 6 and _year_in_bounds(int(digits[:4]), year_bounds):
        year = int(digits[:4])
    elif len(digits) >= 4 and _year_in_bounds(2000 + int(digits[:2]), year_bounds):
        year = 2000 + int(digits[:2])
    return ParsedTDocId(tdoc_id=f"{prefix}-{digits}", wg=wg_from_name(wg_name), year=year)


def wg_from_dirs(dirs: Iterable[str]) -> WorkingGroup | None:
    """Deepest directory component that names a working group, if any."""
    found = None
    for part in dirs:
        if is_wg_name(part):
            found = wg_from_name(part)
    return found


def year_from_dirs(dirs: Iterable[str], year_bounds: tuple[int, int]) -> int | None:
    """Deepest 4-digit directory component within bounds, if any."""
    found = None
    for part in dirs:
        if re.fullmatch(r"\d{4}", part) and _year_in_bounds(int(part), year_bounds):
            found = int(part)
    return found


def classify_doc_kind(filename: str, text_head: str, config: IngestConfig) -> DocKind:
    """Classify by cover-sheet signature and filename conventions.

    Precedence: change_request > draft > template > contribution.
    """
    head = text_head[:2000].casefold()
    name = filename.casefold()
    stem = PurePosixPath(name).stem
    if "change request" in head or any(m.casefold() in name for m in config.cr_filename_markers):
        return DocKind.change_request
    if stem.startswith("draft") or any(m.casefold() in head for m in config.draft_head_markers):
        return DocKind.draft
    if any(fnmatch(name, pat.casefold()) for pat in config.template_patterns):
        return DocKind.template
    return DocKind.contribution


_ExtractResult = tuple[ArchiveEntry, str | None, str, ExtractionMethod | None]


def _extract_one(entry: ArchiveEntry, config: IngestConfig) -> _ExtractResult:
    try:
        text, method = extract_text(entry, config)
        return entry, text, "", method
    except ExtractSkip as skip:
        return entry, None, skip.reason, None


def iter_raw_docs(
    root: Path,
    config: IngestConfig,
    report: IngestReport,
    threads: int = 1,
) -> Iterator[RawDoc]:
    """Scan, extract (optionally with a worker pool), and label every entry.

    Output order always equals scan order regardless of ``threads``; all skip
    and conflict accounting lands in ``report``.
    """
    entries = scan_archives(root, config, report)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results: Iterable[_ExtractResult] = pool.map(lambda e: _extract_one(e, config), entries)
            yield from _assemble_raw_docs(results, config, report)
    else:
        yield from _assemble_raw_docs((_extract_one(e, config) for e in entries), config, report)


def _assemble_raw_docs(
    results: Iterable[_ExtractResult],
    config: IngestConfig,
    report: IngestReport,
) -> Iterator[RawDoc]:
    for entry, text, skip_reason, method in results:
        report.entries_seen += 1
        if text is None:
            report.skip(skip_reason)
            continue
        parsed = parse_tdoc_id(entry.name, config.prefix_map, config.year_bounds)
        dir_wg = wg_from_dirs(entry.context_dirs)
        dir_year = year_from_dirs(entry.context_dirs, config.year_bounds)
        wg = dir_wg or (parsed.wg if parsed else None)
        if dir_wg is not None and parsed is not None and parsed.wg != dir_wg:
            report.wg_conflicts += 1  # directory label is authoritative
        if wg is None:
            report.skip("no_wg_label")
            continue
        year = dir_year if dir_year is not None else (parsed.year if parsed else None)
        tdoc_id = parsed.tdoc_id if parsed else PurePosixPath(entry.name).stem
        kind = classify_doc_kind(entry.name, text[:2000], config)
        meta = TDocMeta(
            tdoc_id=tdoc_id,
            wg=wg,
            year=year,
            doc_kind=kind,
            source_path=entry.source_path,
        )
        report.count_doc(wg.name, year)
        yield RawDoc(meta=meta, text=text, extraction_method=method if method is not None else ExtractionMethod.plain_text)
