"""Persistent exact nearest-neighbor store over labeled collections.

Every query is a full linear scan with cosine distance, accumulated in
float64 over the float32 stored components and clamped to [0, 2]. Ties
break by ascending record id, so results are deterministic and equal to
any faithful brute-force reimplementation.

On disk a collection is a directory: ``<root>/<name>/manifest`` (JSON)
plus one interchange file per namespace (``<namespace>.emb``).

Concurrency contract: many readers or one writer per collection. Writers
hold the collection lock for a whole batch; readers snapshot under the
same lock, so a query never sees a half-applied batch.
"""
from __future__ import annotations

import dataclasses
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NotDeterminableError, ValidationError
from .interchange import (
    Label,
    RecordMeta,
    as_vector,
    ensure_not_zero,
    read_embedding_file,
    write_embedding_file,
)

MANIFEST_NAME = "manifest"
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")  # no leading dot: ".." must not resolve


@dataclass(frozen=True)
class Neighbor:
    """One search hit: record id, cosine distance, original filename."""

    id: str
    distance: float
    source_name: str


def cosine_distance(u, v) -> float:
    """1 - cos(u, v), accumulated in float64 and clamped to [0, 2]."""
    uu = as_vector(u)
    vv = as_vector(v)
    if uu.size != vv.size:
        raise ValidationError(f"dimension mismatch: {uu.size} vs {vv.size}")
    u64 = uu.astype(np.float64)
    v64 = vv.astype(np.float64)
    nu = float(np.linalg.norm(u64))
    nv = float(np.linalg.norm(v64))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine distance undefined for zero-norm vectors")
    d = 1.0 - float(u64 @ v64) / (nu * nv)
    return min(max(d, 0.0), 2.0)


class _Namespace:
    """Mutable record set for one namespace, with a lazy scan matrix."""

    def __init__(self, dim: int):
        self.dim = dim
        self.ids: list[str] = []
        self.metas: list[RecordMeta] = []
        self.rows: list[np.ndarray] = []
        self.index: dict[str, int] = {}
        self._matrix: np.ndarray | None = None  # float64 (n, dim)
        self._norms: np.ndarray | None = None
        self._id_arr: np.ndarray | None = None

    def put(self, meta: RecordMeta, vec: np.ndarray) -> None:
        pos = self.index.get(meta.id)
        if pos is None:
            self.index[meta.id] = len(self.rows)
            self.ids.append(meta.id)
            self.metas.append(meta)
            self.rows.append(vec)
        else:
            self.metas[pos] = meta
            self.rows[pos] = vec
        self._matrix = None

    def scan_arrays(self):
        if self._matrix is None and self.rows:
            self._matrix = np.stack(self.rows).astype(np.float64)
            self._norms = np.linalg.norm(self._matrix, axis=1)
            self._id_arr = np.array(self.ids)
        return self._matrix, self._norms, self._id_arr


class Collection:
    """Labeled set of (meta, vector) records partitioned by namespace."""

    def __init__(self, root: Path, name: str, label: Label, dim: int, generation: int = 0):
        self.root = Path(root)
        self.name = name
        self.label = label
        self.dim = dim
        self.generation = generation
        self._spaces: dict[str, _Namespace] = {}
        self._lock = threading.RLock()

    # -- mutation ----------------------------------------------------------

    def upsert(self, namespace: str, meta: RecordMeta, vector) -> None:
        """Insert or replace one record; the same (namespace, id) replaces."""
        self.upsert_many(namespace, [(meta, vector)])

    def upsert_many(self, namespace: str, records: Iterable[tuple[RecordMeta, "np.ndarray"]]) -> None:
        if not _NAME_RE.match(namespace or ""):
            raise ValidationError(f"bad namespace {namespace!r}")
        with self._lock:
            space = self._spaces.get(namespace)
            if space is None:
                space = self._spaces[namespace] = _Namespace(self.dim)
            for meta, vector in records:
                v = ensure_not_zero(as_vector(vector, dim=self.dim))
                if meta.namespace != namespace or meta.label is not self.label:
                    meta = dataclasses.replace(meta, namespace=namespace, label=self.label)
                space.put(meta, v)
                self.generation += 1

    # -- queries -----------------------------------------------------------

    def query_top_k(self, namespace: str, query, k: int) -> list[Neighbor]:
        """The k records nearest to the query, ascending by distance.

        Exact: identical to an exhaustive scan, ties broken by ascending
        id. An empty or unknown namespace yields an empty list.
        """
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = ensure_not_zero(as_vector(query, dim=self.dim))
        with self._lock:
            space = self._spaces.get(namespace)
            if space is None or not space.rows:
                return []
            matrix, norms, id_arr = space.scan_arrays()
            metas = list(space.metas)

        q64 = q.astype(np.float64)
        qn = np.linalg.norm(q64)
        dist = 1.0 - (matrix @ q64) / (norms * qn)
        np.clip(dist, 0.0, 2.0, out=dist)
        order = np.lexsort((id_arr, dist))[:k]
        return [Neighbor(id=id_arr[i], distance=float(dist[i]), source_name=metas[i].source_name) for i in order]

    def nearest_distance(self, namespace: str, query) -> tuple[float, str]:
        """Minimum cosine distance to the namespace, with the winner's id."""
        hits = self.query_top_k(namespace, query, k=1)
        if not hits:
            raise NotDeterminableError(
                f"collection {self.name!r} has no records in namespace {namespace!r}"
            )
        return hits[0].distance, hits[0].id

    # -- introspection -------------------------------------------------------

    @property
    def namespaces(self) -> list[str]:
        with self._lock:
            return sorted(self._spaces)

    def count(self, namespace: str | None = None) -> int:
        with self._lock:
            if namespace is not None:
                space = self._spaces.get(namespace)
                return len(space.rows) if space else 0
            return sum(len(s.rows) for s in self._spaces.values())

    def contains(self, namespace: str, record_id: str) -> bool:
        with self._lock:
            space = self._spaces.get(namespace)
            return bool(space and record_id in space.index)

    def get(self, namespace: str, record_id: str) -> tuple[RecordMeta, np.ndarray] | None:
        with self._lock:
            space = self._spaces.get(namespace)
            if not space or record_id not in space.index:
                return None
            pos = space.index[record_id]
            return space.metas[pos], space.rows[pos].copy()

    def records(self, namespace: str) -> list[tuple[RecordMeta, np.ndarray]]:
        with self._lock:
            space = self._spaces.get(namespace)
            if not space:
                return []
            return [(m, r.copy()) for m, r in zip(space.metas, space.rows)]

    # -- persistence ---------------------------------------------------------

    @property
    def directory(self) -> Path:
        return self.root / self.name

    def save(self) -> None:
        """Persist the manifest and every namespace atomically (tmp + rename)."""
        with self._lock:
            cdir = self.directory
            cdir.mkdir(parents=True, exist_ok=True)
            for ns, space in self._spaces.items():
                tmp = cdir / f".{ns}.emb.tmp"
                write_embedding_file(list(zip(space.metas, space.rows)), tmp, dim=self.dim)
                os.replace(tmp, cdir / f"{ns}.emb")
                os.replace(str(tmp) + ".meta", str(cdir / f"{ns}.emb") + ".meta")
            manifest = {
                "name": self.name,
                "label": self.label.value,
                "dim": self.dim,
                "namespaces": sorted(self._spaces),
                "generation": self.generation,
            }
            tmp = cdir / (MANIFEST_NAME + ".tmp")
            tmp.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, cdir / MANIFEST_NAME)


class Store:
    """Directory of named collections."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def create_collection(self, name: str, label: Label, dim: int) -> Collection:
        if not _NAME_RE.match(name or ""):
            raise ValidationError(f"bad collection name {name!r}")
        if dim < 1:
            raise ValidationError(f"dim must be >= 1, got {dim}")
        if (self.root / name / MANIFEST_NAME).exists():
            raise ValidationError(f"collection {name!r} already exists")
        col = Collection(self.root, name, label, dim)
        col.save()
        return col

    def open_collection(self, name: str) -> Collection:
        mpath = self.root / name / MANIFEST_NAME
        if not mpath.exists():
            raise ValidationError(f"no such collection {name!r} under {self.root}")
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        col = Collection(
            self.root,
            manifest["name"],
            Label.from_string(manifest["label"]),
            int(manifest["dim"]),
            generation=int(manifest.get("generation", 0)),
        )
        for ns in manifest.get("namespaces", []):
            records = read_embedding_file(self.root / name / f"{ns}.emb")
            space = _Namespace(col.dim)
            for meta, vec in records:
                if vec.size != col.dim:
                    raise ValidationError(
                        f"{name}/{ns}: vector dim {vec.size} does not match collection dim {col.dim}"
                    )
                space.put(meta, vec)
            col._spaces[ns] = space
        return col

    def has_collection(self, name: str) -> bool:
        return (self.root / name / MANIFEST_NAME).exists()

    def list_collections(self) -> list[dict]:
        out = []
        if not self.root.exists():
            return out
        for mpath in sorted(self.root.glob(f"*/{MANIFEST_NAME}")):
            out.append(json.loads(mpath.read_text(encoding="utf-8")))
        return out
