"""Bridge CLI: `finetune --config bridge.json` and `predict --checkpoint ... --dataset ...`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import BridgeConfigError, load_bridge_config
from .data import DatasetContractError
from .models import CheckpointError
from .predict import PredictError, predict
from .training import TrainingFailure, finetune


def _cmd_finetune(args: argparse.Namespace) -> int:
    config = load_bridge_config(args.config)
    result = finetune(config)
    best = result.log["best_validation_accuracy"]
    print(f"checkpoint written to {result.checkpoint_dir} (best validation accuracy {best:.4f})")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    result = predict(
        checkpoint_dir=args.checkpoint,
        dataset_dir=args.dataset,
        out_path=args.out,
        split=args.split,
        batch_size=args.batch_size,
        max_tokens=args.max_tokens,
    )
    print(
        f"wrote {result.n_predictions} predictions to {result.predictions_path} "
        f"(internal accuracy {result.internal_accuracy:.4f})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finetune-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="fine-tune a pretrained checkpoint on an exported dataset")
    p.add_argument("--config", required=True, type=Path, help="bridge config JSON")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("predict", help="emit predictions for one split in the scoreable schema")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--split", default="test", choices=["train", "validation", "test"])
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-tokens", type=int, default=256)
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BridgeConfigError, DatasetContractError, CheckpointError, TrainingFailure, PredictError,
            OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
