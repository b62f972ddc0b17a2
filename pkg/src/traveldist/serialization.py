"""Versioned model files: a JSON header next to a little-endian float64 blob.

``<stem>.json`` carries the model kind, free-form metadata and an array table
(name, shape, offset and count in float64 elements); ``<stem>.bin`` holds the
concatenated array data.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "traveldist-model"
VERSION = 1


class ModelFileError(ValueError):
    pass


def save_arrays(stem: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> tuple[Path, Path]:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    table, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        table.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
        chunks.append(a.ravel().tobytes())
        offset += a.size
    header = {"format": FORMAT, "version": VERSION, "kind": kind, "meta": meta, "arrays": table,
              "dtype": "<f8", "blob": stem.name + ".bin"}
    json_path, bin_path = stem.with_suffix(".json"), stem.with_suffix(".bin")
    json_path.write_text(json.dumps(header, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    bin_path.write_bytes(b"".join(chunks))
    return json_path, bin_path


def load_arrays(stem: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    json_path, bin_path = stem.with_suffix(".json"), stem.with_suffix(".bin")
    if not json_path.exists() or not bin_path.exists():
        raise ModelFileError(f"model files missing for {stem}")
    header = json.loads(json_path.read_text(encoding="utf-8"))
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise ModelFileError(f"{json_path}: unsupported format {header.get('format')!r} v{header.get('version')!r}")
    blob = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    arrays = {}
    for entry in header["arrays"]:
        start, count = entry["offset"], entry["count"]
        if start + count > blob.size:
            raise ModelFileError(f"{bin_path}: truncated blob")
        arrays[entry["name"]] = blob[start:start + count].astype(float).reshape(entry["shape"])
    return header["kind"], header["meta"], arrays
