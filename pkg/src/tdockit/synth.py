"""Synthetic pseudo-TDoc corpus generation for desk-scale pipeline testing.

Each working group draws words from its own core vocabulary mixed with a shared
vocabulary at weight alpha: alpha=0 makes the groups' texts fully disjoint,
alpha=1 makes the label statistically independent of the text. Generated trees
are ingest-compatible (per-WG/per-year directories, TDoc-style filenames) and
carry injected noise (URLs, HTML fragments, references tails, repeated header
lines) so the cleaning pipeline is exercised end to end. Output is
byte-identical for a fixed spec.
"""

from __future__ import annotations

import io
import random
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .wg import DEFAULT_PREFIX_MAP, Tsg, wg_from_name

_PREFIX_BY_WG = {wg: prefix for prefix, wg in DEFAULT_PREFIX_MAP.items()}

# Fixed member date keeps zipped docs byte-identical across runs.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class WgVocab:
    core: tuple[str, ...]
    shared: tuple[str, ...]
    alpha: float

    def __post_init__(self) -> None:
        if not self.core or not self.shared:
            raise ValueError("core and shared vocabularies must be non-empty")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class NoiseSpec:
    url_count: int = 2
    html_fragment_count: int = 2
    references_tail: bool = True
    repeated_header_copies: int = 4  # >= the repeated-line threshold so cleaning removes them
    dropped_kind_docs_per_wg: int = 2
    zip_every: int = 5  # every Nth doc is wrapped in a ZIP; 0 disables

    @staticmethod
    def none() -> "NoiseSpec":
        return NoiseSpec(
            url_count=0,
            html_fragment_count=0,
            references_tail=False,
            repeated_header_copies=0,
            dropped_kind_docs_per_wg=0,
            zip_every=0,
        )


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    wg_vocab: dict[str, WgVocab]
    docs_per_wg: int
    words_per_doc: int
    seed: int
    years: tuple[int, ...] = tuple(range(2015, 2024))
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self) -> None:
        if self.docs_per_wg < 1:
            raise ValueError("docs_per_wg must be >= 1")
        if self.words_per_doc < 1:
            raise ValueError("words_per_doc must be >= 1")
        if not self.years:
            raise ValueError("years must be non-empty")
        for name in self.wg_vocab:
            wg_from_name(name)


def make_standard_spec(
    wg_names: list[str],
    docs_per_wg: int,
    words_per_doc: int,
    alpha: float,
    seed: int,
    core_size: int = 50,
    shared_size: int = 120,
    tsg_overlap: bool = False,
    years: tuple[int, ...] = tuple(range(2015, 2024)),
    noise: NoiseSpec | None = None,
) -> SyntheticCorpusSpec:
    """Build a corpus spec with programmatic vocabularies.

    With ``tsg_overlap`` the shared pool is per-TSG, so working groups inside
    one TSG are confusable with each other while staying distinguishable from
    other TSGs; otherwise a single global shared pool is used (alpha=1 then
    makes every group draw from the same distribution).
    """
    vocab: dict[str, WgVocab] = {}
    global_shared = tuple(f"common_{i:03d}" for i in range(shared_size))
    tsg_shared = {
        tsg: tuple(f"{tsg.value.lower()}_topic_{i:03d}" for i in range(shared_size)) for tsg in Tsg
    }
    for name in wg_names:
        wg = wg_from_name(name)
        core = tuple(f"{wg.name.lower()}_term_{i:03d}" for i in range(core_size))
        shared = tsg_shared[wg.tsg] if tsg_overlap else global_shared
        vocab[wg.name] = WgVocab(core=core, shared=shared, alpha=alpha)
    return SyntheticCorpusSpec(
        wg_vocab=vocab,
        docs_per_wg=docs_per_wg,
        words_per_doc=words_per_doc,
        seed=seed,
        years=years,
        noise=noise if noise is not None else NoiseSpec(),
    )


_NOISE_WORDS = ("annex", "clause", "revision", "editorial", "agenda", "minutes")


def _doc_body(rng: random.Random, vocab: WgVocab, words_per_doc: int) -> list[str]:
    words = [
        rng.choice(vocab.shared) if rng.random() < vocab.alpha else rng.choice(vocab.core)
        for _ in range(words_per_doc)
    ]
    lines = []
    for i in range(0, len(words), 12):
        lines.append(" ".join(words[i : i + 12]))
        if (i // 12) % 5 == 4:
            lines.append("")
    return lines


def _inject_noise(rng: random.Random, lines: list[str], noise: NoiseSpec) -> list[str]:
    out = list(lines)
    header = "Meeting Report Document Header Rev 2"
    for _ in range(noise.repeated_header_copies):
        out.insert(rng.randrange(len(out) + 1), header)
    for _ in range(noise.url_count):
        out.insert(rng.randrange(len(out) + 1), f"see http://example.org/doc/{rng.randrange(10**6)} for details")
    for _ in range(noise.html_fragment_count):
        junk = " ".join(rng.choice(_NOISE_WORDS) for _ in range(4))
        fragment = rng.choice(
            [
                f"<b>{rng.choice(_NOISE_WORDS)}</b> inline markup",
                f"<table><tr><td>{junk}</td></tr></table>",
                "<style>p { margin: 0 }</style>",
            ]
        )
        out.insert(rng.randrange(len(out) + 1), fragment)
    if noise.references_tail:
        out.extend(
            [
                "References",
                f"[1] archived discussion record {rng.randrange(10**4)}",
                "[2] obsolete attachment listing",
            ]
        )
    return out


def _write_doc(path: Path, text: str, as_zip: bool) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not as_zip:
        path.write_text(text, encoding="utf-8", newline="\n")
        return path
    zip_path = path.with_suffix(".zip")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo(path.name, date_time=_ZIP_EPOCH)
        zf.writestr(info, text.encode("utf-8"))
    zip_path.write_bytes(buf.getvalue())
    return zip_path


def generate_synthetic_corpus(spec: SyntheticCorpusSpec, out_dir: Path) -> list[Path]:
    """Write the pseudo-TDoc tree under ``out_dir``; returns the files written."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out_dir}: {exc}") from exc
    written: list[Path] = []
    for wg_name in sorted(spec.wg_vocab):
        wg = wg_from_name(wg_name)
        prefix = _PREFIX_BY_WG[wg.name]
        vocab = spec.wg_vocab[wg.name]
        for i in range(spec.docs_per_wg):
            rng = random.Random(f"{spec.seed}:{wg.name}:{i}")
            year = spec.years[i % len(spec.years)]
            lines = _inject_noise(rng, _doc_body(rng, vocab, spec.words_per_doc), spec.noise)
            text = "\n".join(lines) + "\n"
            fname = f"{prefix}-{year}{i:04d}.txt"
            as_zip = spec.noise.zip_every > 0 and i % spec.noise.zip_every == spec.noise.zip_every - 1
            written.append(_write_doc(out_dir / wg.name / str(year) / fname, text, as_zip))
        for j in range(spec.noise.dropped_kind_docs_per_wg):
            rng = random.Random(f"{spec.seed}:{wg.name}:dropped:{j}")
            year = spec.years[j % len(spec.years)]
            filler = " ".join(rng.choice(_NOISE_WORDS) for _ in range(60))
            # 5-digit serial so these ids can never collide with the 4-digit content docs
            if j % 2 == 0:
                fname = f"Draft_{prefix}-{year}999{j:02d}.txt"
                text = f"working draft placeholder\n{filler}\n"
            else:
                fname = f"{prefix}-{year}999{j:02d}.txt"
                text = f"CHANGE REQUEST cover sheet\n{filler}\n"
            written.append(_write_doc(out_dir / wg.name / str(year) / fname, text, as_zip=False))
    return written
