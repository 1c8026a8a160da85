"""Persistent model registry: a JSON index beside the model directories."""

import json
import os
from pathlib import Path

from .errors import ConfigError, ServiceError

INDEX_FILE = "registry.json"


class ModelRegistry:
    """Maps model ids to checkpoint directories.

    The index is a single JSON file under the registry root, rewritten
    atomically on every change, so a registry reopened on the same root
    lists exactly the models registered before.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / INDEX_FILE
        self._entries = {}
        if self.index_path.is_file():
            self._load()

    def _load(self):
        try:
            doc = json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ServiceError(
                "cannot read registry index %s: %s" % (self.index_path, exc),
                code="corrupt_registry",
            ) from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("models"), list):
            raise ServiceError(
                "registry index %s is malformed" % self.index_path, code="corrupt_registry"
            )
        self._entries = {entry["id"]: entry for entry in doc["models"]}

    def _save(self):
        doc = {"models": self.list_entries()}
        tmp = self.index_path.with_name(self.index_path.name + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, self.index_path)

    def register(self, model_id, model_dir, config=None, metrics=None,
                 fingerprint=None, deployed=True):
        if model_id in self._entries:
            raise ConfigError(
                "model id %r is already registered; pick another name" % model_id,
                code="duplicate_model",
            )
        entry = {
            "id": model_id,
            "path": str(Path(model_dir).resolve()),
            "subword_fingerprint": fingerprint,
            "config": config or {},
            "metrics": metrics or {},
            "deployed": bool(deployed),
        }
        self._entries[model_id] = entry
        self._save()
        return entry

    def get(self, model_id):
        return self._entries.get(model_id)

    def list_entries(self):
        """Entries sorted by model id."""
        return [self._entries[k] for k in sorted(self._entries)]

    def unique_id(self, base):
        """First free id among base, base-2, base-3, ..."""
        if base not in self._entries:
            return base
        n = 2
        while "%s-%d" % (base, n) in self._entries:
            n += 1
        return "%s-%d" % (base, n)

    def __contains__(self, model_id):
        return model_id in self._entries

    def __len__(self):
        return len(self._entries)
