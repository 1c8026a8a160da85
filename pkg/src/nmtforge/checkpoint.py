"""Checkpoint serialization.

A model directory is self-contained:

    model_dir/
      subword.json            vocabulary, written by the pipeline
      checkpoint/
        manifest.json         config, step, metrics, tensor layout
        params.bin            raw weights, little-endian float32
        average.bin           smoothed weights, same layout

Blobs are written to a temporary name and renamed into place, and the
manifest goes last, so a crash mid-save never leaves a manifest that
points at missing or short files.
"""

import json
import os
from pathlib import Path

from . import autodiff as ad
from .errors import IntegrityError
from .models import Model, ModelConfig
from .subword import load_subword_model, subword_fingerprint

MANIFEST_VERSION = 1
SUBWORD_FILE = "subword.json"
CHECKPOINT_DIR = "checkpoint"


def _atomic_write_blob(arrays, path):
    tmp = path.with_name(path.name + ".tmp")
    layout = ad.write_tensor_blob(arrays, tmp)
    os.replace(tmp, path)
    return layout


def _atomic_write_text(text, path):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def save_checkpoint(model_dir, params, averaged, config, step, metrics,
                    fingerprint=None, run_id=None):
    """Write weights plus manifest under model_dir/checkpoint.

    params may be a ParameterSet or a plain name->array dict; averaged is
    a name->array dict with the same names. Returns the checkpoint path.
    """
    values = params.value_dict() if hasattr(params, "value_dict") else dict(params)
    if sorted(values) != sorted(averaged):
        raise IntegrityError("raw and averaged parameter names disagree")
    ckpt = Path(model_dir) / CHECKPOINT_DIR
    ckpt.mkdir(parents=True, exist_ok=True)
    params_layout = _atomic_write_blob(values, ckpt / "params.bin")
    average_layout = _atomic_write_blob(averaged, ckpt / "average.bin")
    manifest = {
        "version": MANIFEST_VERSION,
        "run_id": run_id,
        "config": config.to_dict(),
        "step": int(step),
        "metrics": metrics,
        "subword_fingerprint": fingerprint,
        "subword_file": SUBWORD_FILE,
        "params": params_layout,
        "average": average_layout,
    }
    _atomic_write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                       ckpt / "manifest.json")
    return ckpt


def read_manifest(model_dir):
    path = Path(model_dir) / CHECKPOINT_DIR / "manifest.json"
    if not path.is_file():
        raise IntegrityError("no checkpoint manifest at %s" % path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise IntegrityError("checkpoint manifest is not valid JSON: %s" % exc) from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise IntegrityError("unsupported checkpoint version %r" % manifest.get("version"))
    for key in ("config", "step", "params", "average"):
        if key not in manifest:
            raise IntegrityError("checkpoint manifest missing %r" % key)
    return manifest


def load_checkpoint(model_dir, prefer_average=True):
    """Read weights back as (values, config, manifest).

    prefer_average selects the smoothed weights, the ones meant for
    deployment; pass False to get the raw training weights.
    """
    manifest = read_manifest(model_dir)
    ckpt = Path(model_dir) / CHECKPOINT_DIR
    which = "average" if prefer_average else "params"
    blob = ckpt / ("average.bin" if prefer_average else "params.bin")
    values = ad.read_tensor_blob(blob, manifest[which])
    config = ModelConfig.from_dict(manifest["config"])
    return values, config, manifest


def load_model(model_dir, prefer_average=True):
    """Rebuild a ready-to-run (Model, SubwordModel, manifest) triple."""
    values, config, manifest = load_checkpoint(model_dir, prefer_average)
    subword_path = Path(model_dir) / manifest.get("subword_file", SUBWORD_FILE)
    if not subword_path.is_file():
        raise IntegrityError("model directory lacks %s" % subword_path.name)
    subword = load_subword_model(subword_path)
    want = manifest.get("subword_fingerprint")
    if want is not None and subword_fingerprint(subword) != want:
        raise IntegrityError("subword model does not match checkpoint fingerprint")
    from .models import init_parameters

    params = init_parameters(config, seed=0)
    params.load_values(values)
    return Model(config=config, params=params), subword, manifest
