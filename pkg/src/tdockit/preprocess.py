"""Document cleaning and segmentation.

The cleaning pipeline applies, in order: markup stripping, URL removal,
boilerplate removal, references truncation, whitespace normalization.
Word counting uses one pinned tokenizer contract (``WORD_RE``) shared by
segmentation, vocabulary fitting, and every "word" threshold in the system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ingest import DocKind, RawDoc, TDocMeta
from .wg import WorkingGroup

# Pinned tokenizer: letter/digit runs joined by internal hyphen/apostrophe/underscore.
WORD_RE = re.compile(r"[A-Za-z0-9]+(?:[-'_][A-Za-z0-9]+)*")

# Pinned URL pattern: http/https scheme followed by the RFC-ish character class.
URL_RE = re.compile(r"https?://[A-Za-z0-9._~:/?#\[\]@!$&'()*+,;=%-]+")

# Purity check pattern: anything that still looks like an element tag.
TAG_RE = re.compile(r"<[a-zA-Z/!][^>]*>")

# Tags whose entire content is removed, not just the tags themselves.
_REMOVE_SUBTREES = frozenset({"table", "script", "style"})

_ENTITY_RE = re.compile(r"&(amp|lt|gt|quot|#[0-9]+);")
_NAMED_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"'}

_TAG_NAME_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9]*")

# Horizontal whitespace (keeps newlines so the later line-based rules still see lines).
_HSPACE_RE = re.compile(r"[^\S\n]+")

PIPELINE_STEPS = (
    "strip_markup",
    "remove_urls",
    "remove_boilerplate",
    "truncate_references",
    "normalize_whitespace",
)


@dataclass(frozen=True)
class BoilerplateRules:
    """Line/paragraph heuristics for headers, footers, captions, and pseudo code."""

    caption_prefixes: tuple[str, ...] = ("Figure", "Table", "Fig.")
    repeated_line_threshold: int = 3
    pseudo_code_min_run: int = 4
    max_paragraph_words: int = 500


@dataclass
class CleanDoc:
    meta: TDocMeta
    text: str
    steps_applied: list[str] = field(default_factory=list)
    dropped: bool = False
    drop_reason: str | None = None


@dataclass(frozen=True)
class Segment:
    doc_id: str
    seg_index: int
    text: str
    word_count: int
    label: WorkingGroup
    year: int


def _decode_entity(text: str, pos: int) -> tuple[str, int]:
    """Decode an entity at ``pos``; returns (replacement, chars consumed) or ("", 0)."""
    m = _ENTITY_RE.match(text, pos)
    if m is None:
        return "", 0
    body = m.group(1)
    if body.startswith("#"):
        try:
            ch = chr(int(body[1:]))
        except (ValueError, OverflowError):
            return "", 0
        return ch, m.end() - pos
    return _NAMED_ENTITIES[body], m.end() - pos


def _strip_markup_once(text: str) -> str:
    out: list[str] = []
    i = 0
    n = len(text)
    skip_name: str | None = None  # subtree element currently being dropped
    skip_depth = 0
    while i < n:
        c = text[i]
        if c == "<" and i + 1 < n and (text[i + 1].isascii() and text[i + 1].isalpha() or text[i + 1] in "/!"):
            # A plausible tag: consume through ">" or, if unclosed, to end of input.
            gt = text.find(">", i + 1)
            end = n if gt == -1 else gt + 1
            body = text[i + 1 : gt if gt != -1 else n]
            closing = body.startswith("/")
            name_m = _TAG_NAME_RE.match(body[1:] if closing else body)
            name = name_m.group(0).lower() if name_m else ""
            self_closing = body.rstrip().endswith("/") and not closing
            if skip_name is None:
                if not closing and not self_closing and name in _REMOVE_SUBTREES:
                    skip_name, skip_depth = name, 1
            elif name == skip_name:
                if closing:
                    skip_depth -= 1
                    if skip_depth == 0:
                        skip_name = None
                elif not self_closing:
                    skip_depth += 1
            i = end
            continue
        if skip_name is not None:
            i += 1
            continue
        if c == "&":
            repl, consumed = _decode_entity(text, i)
            if consumed:
                out.append(repl)
                i += consumed
                continue
        out.append(c)
        i += 1
    return "".join(out)


def strip_markup(text: str) -> str:
    """Remove element tags, table/script/style subtrees, and decode character entities.

    Tolerant of malformed markup: a tag is anything starting ``<`` plus a letter,
    ``/`` or ``!``, consumed through the next ``>`` (or end of input when unclosed);
    stray ``<``/``>`` that do not open a plausible tag are preserved. The single
    pass is iterated to a fixpoint so the result is idempotent and free of
    tag-pattern matches even when entities decode into markup.
    """
    prev = text
    while True:
        cur = _strip_markup_once(prev)
        if cur == prev:
            return cur
        prev = cur


def remove_urls(text: str) -> str:
    """Delete every match of the pinned URL pattern, leaving a single space.

    Runs of horizontal whitespace are collapsed afterwards; newlines are kept so
    the later line-based boilerplate rules still operate on real lines.
    """
    return _HSPACE_RE.sub(" ", URL_RE.sub(" ", text))


def count_words(text: str) -> int:
    """Number of tokens under the pinned tokenizer contract."""
    return sum(1 for _ in WORD_RE.finditer(text))


def truncate_words(text: str, max_words: int) -> str:
    """Original character span covering the first ``max_words`` tokens."""
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")
    last_end = None
    for i, m in enumerate(WORD_RE.finditer(text)):
        if i == max_words:
            return text[:last_end]
        last_end = m.end()
    return text


def _caption_re(rules: BoilerplateRules) -> re.Pattern[str]:
    alts = "|".join(re.escape(p) for p in rules.caption_prefixes)
    return re.compile(rf"^(?:{alts})\s*\d", re.IGNORECASE)


def _is_pseudo_code_line(line: str) -> bool:
    if not line[:1] in (" ", "\t"):
        return False
    return "{" in line or "}" in line or ":=" in line or line.rstrip().endswith(";")


def remove_boilerplate(text: str, rules: BoilerplateRules | None = None) -> str:
    """Remove caption lines, repeated header/footer lines, and pseudo-code runs;
    truncate over-long paragraphs at a word boundary.

    All three line rules are evaluated against the original line list and their
    removals unioned; paragraph truncation runs last, on blank-line-delimited
    paragraphs.
    """
    rules = rules or BoilerplateRules()
    lines = text.split("\n")

    counts: dict[str, int] = {}
    for line in lines:
        key = line.strip()
        if key:
            counts[key] = counts.get(key, 0) + 1
    repeated = {k for k, v in counts.items() if v >= rules.repeated_line_threshold}

    caption = _caption_re(rules)
    drop = [False] * len(lines)
    for i, line in enumerate(lines):
        key = line.strip()
        if key and key in repeated:
            drop[i] = True
        elif caption.match(key):
            drop[i] = True

    run_start = None
    for i in range(len(lines) + 1):
        codey = i < len(lines) and _is_pseudo_code_line(lines[i])
        if codey and run_start is None:
            run_start = i
        elif not codey and run_start is not None:
            if i - run_start >= rules.pseudo_code_min_run:
                for j in range(run_start, i):
                    drop[j] = True
            run_start = None

    kept = "\n".join(line for i, line in enumerate(lines) if not drop[i])

    parts = re.split(r"(\n\s*\n)", kept)
    for i in range(0, len(parts), 2):
        para = parts[i]
        if count_words(para) > rules.max_paragraph_words:
            parts[i] = truncate_words(para, rules.max_paragraph_words)
    return "".join(parts)


_NUMBERED_REFS_RE = re.compile(r"^\d+(\.\d+)*\s+references$")


def truncate_references(text: str) -> str:
    """Cut the text at the earliest whole-line references heading.

    A heading is a line that, trimmed and case-folded, equals "references" or
    matches ``^\\d+(\\.\\d+)*\\s+references$``. The heading and everything after
    it are removed; cutting at the earliest heading makes the operation
    idempotent (iterating last-heading removal converges to the same result).
    """
    lines = text.split("\n")
    for i, line in enumerate(lines):
        key = line.strip().casefold()
        if key == "references" or _NUMBERED_REFS_RE.match(key):
            return "\n".join(lines[:i])
    return text


def normalize_whitespace(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


_DROPPED_KINDS = (DocKind.change_request, DocKind.draft, DocKind.template)


def clean_document(
    raw: RawDoc,
    rules: BoilerplateRules | None = None,
    min_doc_words: int = 30,
) -> CleanDoc:
    """Run the full cleaning pipeline on one extracted document.

    Change requests, drafts, and templates are dropped before any text work;
    documents that clean down to fewer than ``min_doc_words`` words are dropped
    with reason "empty". Drops are recorded, never raised.
    """
    if raw.meta.doc_kind in _DROPPED_KINDS:
        return CleanDoc(
            meta=raw.meta,
            text="",
            steps_applied=[],
            dropped=True,
            drop_reason=f"doc_kind:{raw.meta.doc_kind.value}",
        )
    text = strip_markup(raw.text)
    text = remove_urls(text)
    text = remove_boilerplate(text, rules)
    text = truncate_references(text)
    text = normalize_whitespace(text)
    doc = CleanDoc(meta=raw.meta, text=text, steps_applied=list(PIPELINE_STEPS))
    if count_words(text) < min_doc_words:
        doc.dropped = True
        doc.drop_reason = "empty"
    return doc


def segment(doc: CleanDoc, max_words: int, min_tail_words: int = 20) -> list[Segment]:
    """Split a cleaned document into consecutive chunks of ``max_words`` words.

    Each segment's text is the original character span from its first to its
    last word, so inter-word punctuation survives inside a segment. Only the
    final chunk can hold fewer than ``max_words`` words; it is discarded when it
    has fewer than ``min_tail_words``.
    """
    if doc.dropped:
        raise ValueError(f"cannot segment dropped document {doc.meta.tdoc_id!r} ({doc.drop_reason})")
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")
    if doc.meta.wg is None:
        raise ValueError(f"cannot segment unlabeled document {doc.meta.tdoc_id!r}")
    if doc.meta.year is None:
        raise ValueError(f"cannot segment document without a year: {doc.meta.tdoc_id!r}")
    matches = list(WORD_RE.finditer(doc.text))
    segments: list[Segment] = []
    for start in range(0, len(matches), max_words):
        chunk = matches[start : start + max_words]
        if len(chunk) < max_words and len(chunk) < min_tail_words:
            break
        segments.append(
            Segment(
                doc_id=doc.meta.tdoc_id,
                seg_index=len(segments),
                text=doc.text[chunk[0].start() : chunk[-1].end()],
                word_count=len(chunk),
                label=doc.meta.wg,
                year=doc.meta.year,
            )
        )
    return segments
