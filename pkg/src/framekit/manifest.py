"""Run manifests: every CLI invocation drops a JSON record of its config
digest, input file digests and library versions beside its outputs."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Mapping, Union


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_manifest(
    out_path: Union[str, Path],
    command: str,
    config: Mapping,
    inputs: Iterable[Union[str, Path]],
) -> dict:
    from . import __version__
    manifest = {
        "command": command,
        "config": dict(config),
        "config_digest": config_digest(config),
        "inputs": {
            str(p): file_digest(p) for p in inputs if Path(p).is_file()
        },
        "versions": {
            "framekit": __version__,
            "python": platform.python_version(),
        },
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
