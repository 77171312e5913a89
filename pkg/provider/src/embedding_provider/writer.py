"""Embedding interchange writer (the consumer engine's input format).

Layout: magic "EMB1" | version u16 LE | dim u32 LE | count u64 LE |
count*dim float32 LE row-major, with a JSON-lines metadata sidecar at
``<path>.meta``. Written atomically (temp files + rename) so a crashed
export never leaves a half-file behind.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")


def write_interchange(
    out_path: str | Path,
    ids: list[str],
    vectors: np.ndarray,
    label: str,
    namespace: str,
    extra: dict | None = None,
) -> None:
    """Write vectors (n, dim) float32 plus one sidecar line per row."""
    out_path = Path(out_path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or len(ids) != vectors.shape[0]:
        raise ValueError(f"need (n, dim) vectors matching {len(ids)} ids, got {vectors.shape}")
    n, dim = vectors.shape

    tmp_payload = out_path.with_name(out_path.name + ".tmp")
    tmp_sidecar = out_path.with_name(out_path.name + ".meta.tmp")
    with open(tmp_payload, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, dim if n else 0, n))
        f.write(vectors.tobytes(order="C"))
    with open(tmp_sidecar, "w", encoding="utf-8") as f:
        for name in ids:
            row = {"id": name, "source_name": name, "label": label, "namespace": namespace}
            if extra:
                row.update(extra)
            f.write(json.dumps(row) + "\n")
    os.replace(tmp_payload, out_path)
    os.replace(tmp_sidecar, out_path.with_name(out_path.name + ".meta"))
