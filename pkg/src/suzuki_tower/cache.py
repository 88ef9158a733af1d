"""Content-addressed on-disk cache.

Every stored file is listed in ``manifest.json`` with its sha256 digest, so a
file edited or truncated behind our back is detected on load.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path


class CacheError(RuntimeError):
    """A cached file does not match its recorded digest."""

    def __init__(self, path, msg: str = "digest mismatch"):
        self.path = str(path)
        super().__init__(f"{msg}: {path}")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def cache_key(*parts) -> str:
    return sha256_text("|".join(str(p) for p in parts))[:16]


class Cache:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "manifest.json"
        if self._manifest_path.exists():
            try:
                self._manifest = json.loads(self._manifest_path.read_text())
            except json.JSONDecodeError as exc:
                raise CacheError(self._manifest_path, "unreadable manifest") from exc
        else:
            self._manifest = {}

    def path(self, rel: str) -> Path:
        return self.root / rel

    def has(self, rel: str) -> bool:
        return rel in self._manifest and self.path(rel).exists()

    def read(self, rel: str) -> str | None:
        """Contents of ``rel`` or None when absent; raises on digest mismatch."""
        if rel not in self._manifest:
            return None
        p = self.path(rel)
        if not p.exists():
            raise CacheError(p, "listed in manifest but missing")
        text = p.read_text()
        if sha256_text(text) != self._manifest[rel]:
            raise CacheError(p)
        return text

    def write(self, rel: str, text: str) -> Path:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        tmp = p.with_name(p.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(p)
        self._manifest[rel] = sha256_text(text)
        self._save_manifest()
        return p

    def read_json(self, rel: str):
        text = self.read(rel)
        return None if text is None else json.loads(text)

    def write_json(self, rel: str, obj) -> Path:
        return self.write(rel, json.dumps(obj, indent=1, sort_keys=True) + "\n")

    def discard(self, rel: str) -> None:
        self._manifest.pop(rel, None)
        self.path(rel).unlink(missing_ok=True)
        self._save_manifest()

    def _save_manifest(self) -> None:
        tmp = self._manifest_path.with_name("manifest.json.tmp")
        tmp.write_text(json.dumps(self._manifest, indent=1, sort_keys=True) + "\n")
        tmp.replace(self._manifest_path)
