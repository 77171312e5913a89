"""Domain types and the bit-exact embedding interchange format.

An embedding file is a little-endian binary blob:

    magic "EMB1" | version u16 | dim u32 | count u64 | count*dim float32

Metadata travels in a JSON-lines sidecar at ``<path>.meta``, one object per
vector in payload order, so the payload itself stays mmap-friendly.

Also home to ``toy_embed``, a model-free reference embedder (normalized
16x16 grayscale downsample) that makes the whole engine testable without
any ML backend.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")  # magic, version, dim, count

TOY_GRID = 16
TOY_DIM = TOY_GRID * TOY_GRID


class Label(Enum):
    """Provenance class of an embedding: AI-generated or human-made."""

    AI = "ai"
    HUMAN = "human"

    @classmethod
    def from_string(cls, s: str) -> "Label":
        try:
            return cls(s.lower())
        except ValueError:
            raise ValidationError(f"unknown label {s!r}, expected 'ai' or 'human'") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RecordMeta:
    """Identity and placement of one stored vector."""

    id: str
    source_name: str
    label: Label
    namespace: str

    def __post_init__(self):
        if not self.id:
            raise ValidationError("record id must be non-empty")
        if not self.namespace:
            raise ValidationError("namespace must be non-empty")


def as_vector(values, dim: int | None = None) -> np.ndarray:
    """Coerce to a canonical float32 embedding vector.

    Rejects anything that is not a finite 1-D vector of at least one
    component. Does not reject the all-zero vector; that happens at the
    ingest points (store upsert, hashing) where it would be meaningless.
    """
    v = np.asarray(values, dtype=np.float32)
    if v.ndim != 1:
        raise ValidationError(f"embedding must be 1-D, got shape {v.shape}")
    if v.size < 1:
        raise ValidationError("embedding must have at least one component")
    if not np.all(np.isfinite(v)):
        raise ValidationError("embedding contains non-finite components")
    if dim is not None and v.size != dim:
        raise ValidationError(f"expected dim {dim}, got {v.size}")
    return v


def ensure_not_zero(v: np.ndarray) -> np.ndarray:
    if not np.any(v):
        raise ValidationError("all-zero embedding is not admissible")
    return v


def write_embedding_file(
    records: Sequence[tuple[RecordMeta, np.ndarray]],
    path: str | Path,
    dim: int | None = None,
) -> None:
    """Write records to an interchange file plus its ``.meta`` sidecar.

    Args:
        records: (meta, vector) pairs; all vectors must share one dimension
            and (namespace, id) pairs must be unique.
        path: Destination of the binary payload; the sidecar lands at
            ``str(path) + ".meta"``.
        dim: Required only for an empty record sequence, where the
            dimension cannot be inferred.
    """
    path = Path(path)
    vecs = []
    seen: set[tuple[str, str]] = set()
    for meta, vec in records:
        v = as_vector(vec)
        if dim is None:
            dim = v.size
        elif v.size != dim:
            raise ValidationError(
                f"mixed dimensions: record {meta.id!r} has dim {v.size}, file has dim {dim}"
            )
        key = (meta.namespace, meta.id)
        if key in seen:
            raise ValidationError(f"duplicate id {meta.id!r} in namespace {meta.namespace!r}")
        seen.add(key)
        vecs.append(v)

    if dim is None:
        dim = 0  # empty file, dimension unknowable

    header = _HEADER.pack(MAGIC, VERSION, dim, len(vecs))
    if vecs:
        payload = np.stack(vecs).astype("<f4", copy=False).tobytes(order="C")
    else:
        payload = b""

    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)

    with open(_sidecar_path(path), "w", encoding="utf-8") as f:
        for meta, _ in records:
            f.write(
                json.dumps(
                    {
                        "id": meta.id,
                        "source_name": meta.source_name,
                        "label": meta.label.value,
                        "namespace": meta.namespace,
                    }
                )
                + "\n"
            )


def read_embedding_file(path: str | Path) -> list[tuple[RecordMeta, np.ndarray]]:
    """Read an interchange file back into (meta, vector) pairs.

    Validates the header against the payload byte-for-byte: a payload that
    is short, long, or non-finite is rejected, never silently repaired.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not an embedding file (bad magic)")
    magic, version, dim, count = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")

    expected = count * dim * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise ValidationError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected} "
            f"({count} x {dim} x 4)"
        )

    metas = _read_sidecar(_sidecar_path(path), count)

    if count == 0:
        return []
    mat = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    if not np.all(np.isfinite(mat)):
        raise ValidationError(f"{path}: payload contains non-finite components")
    return [(meta, mat[i].copy()) for i, meta in enumerate(metas)]


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def _read_sidecar(path: Path, count: int) -> list[RecordMeta]:
    if not path.exists():
        raise ValidationError(f"missing sidecar {path}")
    metas = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}:{lineno + 1}: bad metadata line: {e}") from None
            try:
                metas.append(
                    RecordMeta(
                        id=obj["id"],
                        source_name=obj.get("source_name", ""),
                        label=Label.from_string(obj["label"]),
                        namespace=obj["namespace"],
                    )
                )
            except KeyError as e:
                raise ValidationError(f"{path}:{lineno + 1}: missing field {e}") from None
    if len(metas) != count:
        raise ValidationError(
            f"{path}: sidecar has {len(metas)} records, payload header declares {count}"
        )
    return metas


# --- reference embedder ---------------------------------------------------


def area_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average resample of a 2-D (or 2-D + channels) image.

    Output pixel (i, j) is the mean of the input over the box
    [i*H/out_h, (i+1)*H/out_h) x [j*W/out_w, (j+1)*W/out_w), with fractional
    pixel overlap weighted exactly. Resizing to the input size is the
    identity; constant images stay constant.
    """
    if out_h < 1 or out_w < 1:
        raise ValidationError("target size must be >= 1")
    h, w = img.shape[:2]
    if h == out_h and w == out_w:
        return img.astype(np.float64, copy=True)
    wr = _overlap_weights(h, out_h)
    wc = _overlap_weights(w, out_w)
    work = img.astype(np.float64, copy=False)
    if work.ndim == 2:
        return wr @ work @ wc.T
    c = work.shape[2]
    rows_done = (wr @ work.reshape(h, w * c)).reshape(out_h, w, c)
    return np.tensordot(rows_done, wc, axes=([1], [1])).transpose(0, 2, 1)


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    # weights[i, r] = |[r, r+1) ∩ [i*n_in/n_out, (i+1)*n_in/n_out)| * n_out/n_in
    edges = np.arange(n_out + 1, dtype=np.float64) * n_in / n_out
    lo, hi = edges[:-1], edges[1:]
    r = np.arange(n_in, dtype=np.float64)
    overlap = np.minimum(hi[:, None], r + 1.0) - np.maximum(lo[:, None], r)
    np.clip(overlap, 0.0, None, out=overlap)
    return overlap * (n_out / n_in)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec. 601 luma; accepts (H, W), (H, W, 3) or (H, W, 4) arrays."""
    a = np.asarray(img)
    if a.ndim == 2:
        return a.astype(np.float64, copy=False)
    if a.ndim == 3 and a.shape[2] in (3, 4):
        rgb = a[..., :3].astype(np.float64, copy=False)
        return rgb @ np.array([0.299, 0.587, 0.114])
    raise ValidationError(f"unsupported image shape {a.shape}")


def toy_embed(image: np.ndarray) -> np.ndarray:
    """Embed a raster image without any model.

    Converts to grayscale, area-averages onto a 16x16 grid, flattens
    row-major to 256 components, and scales to unit Euclidean norm.
    Bit-deterministic for identical pixel data.
    """
    a = np.asarray(image)
    if a.ndim < 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError("image must have positive width and height")
    gray = to_grayscale(a)
    grid = area_resize(gray, TOY_GRID, TOY_GRID)
    flat = grid.reshape(-1)
    norm = float(np.linalg.norm(flat))
    if norm == 0.0:
        raise ValidationError("all-black image embeds to the zero vector")
    return (flat / norm).astype(np.float32)


def image_from_bytes(data: bytes) -> np.ndarray:
    """Decode image bytes (PNG/JPEG/...) into an RGB uint8 array."""
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as e:
        raise ValidationError(f"undecodable image: {e}") from None
