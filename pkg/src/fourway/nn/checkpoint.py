"""Parameter checkpoint files: versioned JSON, little-endian float64 payload,
bit-exact round trip."""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .optim import ParamStore

CHECKPOINT_VERSION = 1


def save_params(path: str | Path, store: ParamStore,
                meta: dict | None = None) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "params": {
            name: {
                "shape": list(t.data.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(t.data, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, t in store.params.items()
        },
    }
    # key order preserved: parameter order is part of the round trip
    Path(path).write_text(json.dumps(doc, indent=None))


def load_params(path: str | Path) -> tuple[ParamStore, dict]:
    doc = json.loads(Path(path).read_text())
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint version {version!r} not supported "
            f"(expected {CHECKPOINT_VERSION})")
    store = ParamStore()
    for name, entry in doc["params"].items():
        raw = base64.b64decode(entry["data"])
        arr = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
        store.add(name, arr)
    return store, doc.get("meta", {})
