"""Checkpoint loading for the supported model families.

Every model gets a K-way linear classification head via the standard
sequence-classification wrappers. GPT-2 has no padding token and no pooler;
the wrapper classifies from the last non-padding token's hidden state, so the
tokenizer's pad token is set to the end-of-text token and the id is mirrored
into the model config.
"""

from __future__ import annotations

from pathlib import Path

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .config import BridgeConfig


class CheckpointError(Exception):
    pass


def load_model_and_tokenizer(config: BridgeConfig, num_labels: int):
    source = config.checkpoint_source
    try:
        tokenizer = AutoTokenizer.from_pretrained(source)
        model = AutoModelForSequenceClassification.from_pretrained(
            source,
            num_labels=num_labels,
            ignore_mismatched_sizes=True,
        )
    except (OSError, ValueError) as exc:
        raise CheckpointError(
            f"cannot load checkpoint {source!r} for model_id {config.model_id!r}: {exc}. "
            "Pass model_path pointing at a local checkpoint directory when offline."
        ) from exc
    if tokenizer.pad_token is None:
        # decoder-only models (gpt2): pad with end-of-text
        tokenizer.pad_token = tokenizer.eos_token
    if getattr(model.config, "pad_token_id", None) is None:
        model.config.pad_token_id = tokenizer.pad_token_id
    return model, tokenizer


def architecture_note(model) -> dict:
    """Layer/width/head counts and parameter total, read off the loaded config."""
    cfg = model.config
    layers = next(
        (getattr(cfg, name) for name in ("num_hidden_layers", "n_layers", "n_layer") if hasattr(cfg, name)),
        None,
    )
    hidden = next((getattr(cfg, name) for name in ("hidden_size", "dim", "n_embd") if hasattr(cfg, name)), None)
    heads = next(
        (getattr(cfg, name) for name in ("num_attention_heads", "n_heads", "n_head") if hasattr(cfg, name)),
        None,
    )
    return {
        "model_type": cfg.model_type,
        "layers": layers,
        "hidden_units": hidden,
        "attention_heads": heads,
        "parameters": sum(p.numel() for p in model.parameters()),
    }


def save_checkpoint(model, tokenizer, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)


def build_local_distilbert_checkpoint(
    out_dir: Path,
    corpus_texts: list[str],
    num_labels: int,
    dim: int = 64,
    n_layers: int = 2,
    n_heads: int = 2,
    max_positions: int = 512,
    seed: int = 0,
) -> Path:
    """Construct a small randomly initialized DistilBERT-architecture checkpoint
    with a WordPiece vocabulary covering the given texts.

    This exists for offline and desk-scale work: the result is a regular
    checkpoint directory that `model_path` can point at. It carries no
    pretrained knowledge, so use a larger learning rate than the 2e-5
    fine-tuning default when training it.
    """
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
    from transformers import DistilBertConfig, DistilBertForSequenceClassification, PreTrainedTokenizerFast

    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    probe = Tokenizer(models.WordPiece(vocab={t: i for i, t in enumerate(specials)}, unk_token="[UNK]"))
    probe.normalizer = normalizers.BertNormalizer(lowercase=True)
    probe.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    pieces: set[str] = set()
    for text in corpus_texts:
        normalized = probe.normalizer.normalize_str(text)
        pieces.update(piece for piece, _ in probe.pre_tokenizer.pre_tokenize_str(normalized))
    vocab = {t: i for i, t in enumerate(specials + sorted(pieces))}

    word_piece = Tokenizer(models.WordPiece(vocab=vocab, unk_token="[UNK]"))
    word_piece.normalizer = normalizers.BertNormalizer(lowercase=True)
    word_piece.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    word_piece.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=word_piece,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    torch.manual_seed(seed)
    model = DistilBertForSequenceClassification(
        DistilBertConfig(
            vocab_size=len(vocab),
            dim=dim,
            n_layers=n_layers,
            n_heads=n_heads,
            hidden_dim=4 * dim,
            max_position_embeddings=max_positions,
            num_labels=num_labels,
        )
    )
    save_checkpoint(model, tokenizer, out_dir)
    return Path(out_dir)
