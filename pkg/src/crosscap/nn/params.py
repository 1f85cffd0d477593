"""Exact-restart parameter persistence.

One flat little-endian float64 blob (``<prefix>.bin``) plus a JSON
manifest (``<prefix>.json``) recording entry order, shapes, offsets and
whatever metadata the caller wants (hyperparameters, seed).  Loading
reproduces the arrays bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def save_params(prefix, params: dict[str, np.ndarray], meta: dict | None = None):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blobs = []
    for name, arr in params.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        blobs.append(arr.reshape(-1))
    flat = np.concatenate(blobs) if blobs else np.empty(0)
    flat.astype("<f8").tofile(str(prefix) + ".bin")
    manifest = {
        "dtype": "<f8",
        "total": int(offset),
        "entries": entries,
        "meta": meta or {},
    }
    with open(str(prefix) + ".json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_params(prefix) -> tuple[dict[str, np.ndarray], dict]:
    with open(str(prefix) + ".json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    flat = np.fromfile(str(prefix) + ".bin", dtype=manifest["dtype"])
    if flat.size != manifest["total"]:
        raise ValueError(
            f"blob holds {flat.size} values, manifest says {manifest['total']}"
        )
    params = {}
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        params[entry["name"]] = flat[start:start + size].reshape(shape).astype(np.float64)
    return params, manifest["meta"]
