"""Framework modes and the engine shared by the CLI and the HTTP service.

Three modes tie the subsystems together:

  hash_only    exact digest membership in the two ledgers; no similarities
  vector_only  nearest-distance verdict from the two collections
  hybrid       vector_only verdict plus a ledger verifiability flag

The hybrid verifiability check hashes the query embedding itself and looks
it up in both ledgers; when the ledger that contains it disagrees with the
vector verdict, the response carries a conflict flag instead of silently
picking a side.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import classifier, ledger as ledger_mod
from .errors import ValidationError
from .interchange import Label, read_embedding_file
from .ledger import EmbedHash, HashVerdict, Ledger, classify_by_hash, embed_hash, verify_chain
from .vecstore import Collection, Store

log = logging.getLogger(__name__)

DEFAULT_NAMESPACE = "train"
LEDGER_DIR = "ledgers"


class FrameworkMode(Enum):
    HASH_ONLY = "hash_only"
    VECTOR_ONLY = "vector_only"
    HYBRID = "hybrid"


@dataclass
class ClassifyResponse:
    """Wire-level classification answer; field presence depends on mode."""

    prediction: str  # "ai" | "human" | "undetermined"
    mode: FrameworkMode
    human_similarity: float | None = None
    ai_similarity: float | None = None
    nearest_ai_id: str | None = None
    nearest_human_id: str | None = None
    verified: bool | None = None
    conflict: bool = False

    def to_dict(self) -> dict:
        out: dict = {"prediction": self.prediction, "mode": self.mode.value}
        if self.mode is not FrameworkMode.HASH_ONLY:
            out["human_similarity"] = self.human_similarity
            out["ai_similarity"] = self.ai_similarity
            out["nearest_ai_id"] = self.nearest_ai_id
            out["nearest_human_id"] = self.nearest_human_id
        if self.mode is not FrameworkMode.VECTOR_ONLY:
            out["verified"] = self.verified
        if self.conflict:
            out["conflict"] = True
        return out


class Engine:
    """Stores, ledgers, and the classification flows rooted at one data dir."""

    def __init__(
        self,
        root: str | Path,
        mode: FrameworkMode = FrameworkMode.HYBRID,
        namespace: str = DEFAULT_NAMESPACE,
        gas_seed: int | None = None,
        ai_collection: str = "ai",
        human_collection: str = "human",
    ):
        self.root = Path(root)
        self.mode = mode
        self.namespace = namespace
        self.gas_seed = gas_seed
        self.ai_collection = ai_collection
        self.human_collection = human_collection
        self.store = Store(self.root)
        self._collections: dict[str, Collection] = {}
        self._ledgers: dict[str, Ledger] = {}
        self._lock = threading.Lock()

    # -- resources -----------------------------------------------------------

    def collection(self, name: str) -> Collection:
        with self._lock:
            if name not in self._collections:
                self._collections[name] = self.store.open_collection(name)
            return self._collections[name]

    def ledger_path(self, label: Label) -> Path:
        return self.root / LEDGER_DIR / f"{label.value}.lgr"

    def ledger(self, label: Label, create: bool = False) -> Ledger:
        key = label.value
        with self._lock:
            if key not in self._ledgers:
                path = self.ledger_path(label)
                if path.exists():
                    self._ledgers[key] = Ledger.open(path, gas_seed=self.gas_seed)
                elif create:
                    self._ledgers[key] = Ledger.create(path, key, gas_seed=self.gas_seed)
                else:
                    raise ValidationError(f"no ledger for label {key!r} at {path}")
            return self._ledgers[key]

    # -- ingestion -------------------------------------------------------------

    def ingest(self, embedding_file: str | Path, collection: str, namespace: str | None = None) -> int:
        """Upsert a whole interchange file; hash into the matching ledger
        unless running vector-only. Returns the number of records ingested."""
        namespace = namespace or self.namespace
        records = read_embedding_file(embedding_file)
        if not records:
            return 0
        if self.store.has_collection(collection):
            col = self.collection(collection)
            if col.dim != records[0][1].size:
                raise ValidationError(
                    f"file dim {records[0][1].size} does not match collection {collection!r} dim {col.dim}"
                )
        else:
            labels = {meta.label for meta, _ in records}
            if len(labels) != 1:
                raise ValidationError(
                    f"cannot create collection {collection!r}: file mixes labels {sorted(l.value for l in labels)}"
                )
            col = self.store.create_collection(collection, labels.pop(), records[0][1].size)
            with self._lock:
                self._collections[collection] = col
        replaced = sum(1 for meta, _ in records if col.contains(namespace, meta.id))
        col.upsert_many(namespace, records)
        col.save()
        if replaced:
            log.warning("ingest replaced %d existing records in %s/%s", replaced, collection, namespace)
        if self.mode is not FrameworkMode.VECTOR_ONLY:
            led = self.ledger(col.label, create=True)
            for _, vec in records:
                led.store_hash(embed_hash(vec))
        return len(records)

    # -- classification ----------------------------------------------------------

    def classify_vector(self, vector, namespace: str | None = None, source_name: str = "") -> ClassifyResponse:
        namespace = namespace or self.namespace
        if self.mode is FrameworkMode.HASH_ONLY:
            return self._classify_hash_only(vector)
        rec = classifier.classify(
            vector,
            self.collection(self.ai_collection),
            self.collection(self.human_collection),
            namespace,
            source_name=source_name,
        )
        resp = ClassifyResponse(
            prediction=rec.predicted_label.value,
            mode=self.mode,
            human_similarity=rec.human_similarity,
            ai_similarity=rec.ai_similarity,
            nearest_ai_id=rec.nearest_ai_id,
            nearest_human_id=rec.nearest_human_id,
        )
        if self.mode is FrameworkMode.HYBRID:
            h = embed_hash(vector)
            in_ai = self.ledger(Label.AI, create=True).hash_exists(h)
            in_human = self.ledger(Label.HUMAN, create=True).hash_exists(h)
            resp.verified = in_ai or in_human
            if resp.verified:
                hash_label = Label.AI if in_ai else Label.HUMAN
                resp.conflict = hash_label is not rec.predicted_label
        return resp

    def _classify_hash_only(self, vector) -> ClassifyResponse:
        h = embed_hash(vector)
        verdict = classify_by_hash(
            h, self.ledger(Label.AI, create=True), self.ledger(Label.HUMAN, create=True)
        )
        return ClassifyResponse(
            prediction=verdict.value,
            mode=FrameworkMode.HASH_ONLY,
            verified=verdict is not HashVerdict.UNDETERMINED,
        )

    def classify_record(
        self, vector, source_name: str = "", true_label: Label | None = None
    ) -> tuple[ClassifyResponse, "classifier.PredictionRecord | None"]:
        """Classify one input; also return the report row when similarities
        exist (hash-only mode carries none)."""
        resp = self.classify_vector(vector, source_name=source_name)
        if self.mode is FrameworkMode.HASH_ONLY:
            return resp, None
        rec = classifier.PredictionRecord(
            source_name=source_name,
            true_label=true_label,
            human_similarity=resp.human_similarity,
            ai_similarity=resp.ai_similarity,
            predicted_label=Label(resp.prediction),
            nearest_ai_id=resp.nearest_ai_id,
            nearest_human_id=resp.nearest_human_id,
            verified_on_ledger=resp.verified,
        )
        return resp, rec

    # -- health ---------------------------------------------------------------

    def health(self) -> dict:
        collections = {}
        for manifest in self.store.list_collections():
            name = manifest["name"]
            col = self.collection(name)
            collections[name] = {
                "label": col.label.value,
                "dim": col.dim,
                "generation": col.generation,
                "counts": {ns: col.count(ns) for ns in col.namespaces},
            }
        ledgers = {}
        all_valid = True
        ledger_dir = self.root / LEDGER_DIR
        if ledger_dir.exists():
            for path in sorted(ledger_dir.glob("*.lgr")):
                verdict = verify_chain(path)
                all_valid &= verdict.ok
                ledgers[path.stem] = {
                    "chain": "valid" if verdict.ok else "corrupt",
                    "entries": _entry_count(path),
                }
        return {
            "status": "ok" if all_valid else "degraded",
            "mode": self.mode.value,
            "chain_status": "valid" if all_valid else "corrupt",
            "collections": collections,
            "ledgers": ledgers,
        }


def _entry_count(path: Path) -> int:
    try:
        _, entries = ledger_mod._read_ledger_file(path)
        return len(entries)
    except ValidationError:
        return -1


def vector_from_json_obj(obj: dict) -> tuple[np.ndarray, str]:
    """Parse the wire format {dim, components[, source_name]}."""
    if not isinstance(obj, dict) or "dim" not in obj or "components" not in obj:
        raise ValidationError("body must be an object with 'dim' and 'components'")
    comps = obj["components"]
    if not isinstance(comps, list):
        raise ValidationError("'components' must be a list of numbers")
    if not isinstance(obj["dim"], int) or obj["dim"] != len(comps):
        raise ValidationError(f"declared dim {obj['dim']!r} does not match {len(comps)} components")
    vec = np.asarray(comps, dtype=np.float32)
    if not np.all(np.isfinite(vec)):
        raise ValidationError("components contain non-finite values")
    return vec, str(obj.get("source_name", ""))
