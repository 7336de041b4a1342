"""Run-directory bookkeeping: fingerprints, append-only outputs, run manifests.

Timestamps exist only inside run_manifest.json; every other output of a rerun
with identical inputs, seed, and thread count is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path


class OutputExistsError(Exception):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint_dict(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def fingerprint_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fingerprint_tree(root: Path) -> str:
    """Content hash of a directory tree: sorted (relative path, file sha256)."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(path.relative_to(root).as_posix().encode("utf-8"))
        h.update(b"\x00")
        h.update(fingerprint_file(path).encode("ascii"))
        h.update(b"\x00")
    return h.hexdigest()


def ensure_writable(out_dir: Path, filenames: list[str], force: bool) -> Path:
    """Create the run directory; refuse to overwrite existing outputs without force."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not force:
        existing = [name for name in filenames if (out_dir / name).exists()]
        if existing:
            raise OutputExistsError(
                f"outputs already exist in {out_dir}: {existing} (pass --force to overwrite)"
            )
    return out_dir


def write_run_manifest(
    out_dir: Path,
    command: str,
    config_snapshot: dict,
    input_fingerprints: dict[str, str],
    artifacts: list[str],
) -> Path:
    config_hash = fingerprint_dict(config_snapshot)
    run_id = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ") + "-" + config_hash[:8]
    payload = {
        "run_id": run_id,
        "command": command,
        "config_hash": config_hash,
        "config": config_snapshot,
        "input_fingerprints": input_fingerprints,
        "artifacts": artifacts,
    }
    path = Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
