"""Canonical JSON, content hashing, and output-directory manifests.

Every output directory gets a manifest.json binding the effective config
hash, input file hashes, and artifact listing. Canonical form sorts keys
and uses compact separators; floats serialize via repr (shortest
round-trip), so equal configs hash equally across runs.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    def default(o):
        raise TypeError(f"not canonically serializable: {type(o)!r}")

    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=default)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def config_hash(config: dict) -> str:
    return sha256_text(canonical_json(config))


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path: str | os.PathLike, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_json(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_manifest(
    out_dir: str | os.PathLike,
    command: str,
    config: dict,
    input_hashes: dict[str, str],
    extra: dict | None = None,
) -> dict:
    payload = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "input_hashes": dict(sorted(input_hashes.items())),
    }
    if extra:
        payload.update(extra)
    write_json(Path(out_dir) / "manifest.json", payload)
    return payload


def manifest_matches(out_dir: str | os.PathLike, command: str, config: dict) -> bool:
    """True when out_dir already holds a manifest for this exact config."""
    path = Path(out_dir) / "manifest.json"
    if not path.exists():
        return False
    try:
        existing = read_json(path)
    except (OSError, json.JSONDecodeError):
        return False
    return (
        existing.get("command") == command
        and existing.get("config_hash") == config_hash(config)
    )
