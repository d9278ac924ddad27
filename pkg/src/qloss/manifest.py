"""Run manifests: what went in, what came out, and how long it took."""

from __future__ import annotations

import hashlib
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Union

from . import __version__
from .io import write_json


def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Accumulates input hashes, stage timings, and emitted artifacts."""

    def __init__(self, command: str, config_hash: str):
        self.command = command
        self.config_hash = config_hash
        self.inputs: Dict[str, str] = {}
        self.timings: Dict[str, float] = {}
        self.artifacts: List[str] = []

    def add_input(self, path: Union[str, Path]) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_artifact(self, path: Union[str, Path]) -> None:
        self.artifacts.append(str(path))

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

    def write(self, path: Union[str, Path]) -> None:
        payload = {
            "tool_version": __version__,
            "command": self.command,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "timings_s": {k: round(v, 6) for k, v in self.timings.items()},
            "artifacts": sorted(self.artifacts),
        }
        write_json(path, payload)
        self.artifacts.append(str(path))
