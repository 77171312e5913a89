"""Tamper-evident hash registry and the storage gas-cost model.

Each registry ("ledger") is an append-only binary log of 256-bit embedding
digests. Every entry carries a chain value

    chain = SHA256(prev_chain || digest || index_u64le || timestamp_u64le)

so any byte flipped anywhere in the entry region is caught by
``verify_chain`` at or before the flipped entry. Entry 0 chains from 32
zero bytes.

File layout (little-endian):

    magic "LGR1" | version u16 | name_len u16 | name utf-8
    entries: index u64 | digest 32B | prev_chain 32B | chain 32B | timestamp u64

Gas costs are modeled, not measured: uint256 stores draw from a triangular
distribution calibrated to a target mean, string stores cost a constant.
"""
from __future__ import annotations

import hashlib
import logging
import struct
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LedgerCorruptError, ValidationError
from .interchange import as_vector, ensure_not_zero

log = logging.getLogger(__name__)

LEDGER_MAGIC = b"LGR1"
LEDGER_VERSION = 1
_ENTRY = struct.Struct("<Q32s32s32sQ")  # index, digest, prev_chain, chain, timestamp
ZERO32 = b"\x00" * 32

# Default gas model, calibrated to storing one 256-bit word per transaction.
DEFAULT_UINT_MIN = 21_528
DEFAULT_UINT_MEAN = 36_207
DEFAULT_UINT_MAX = 51_228
DEFAULT_STRING_COST = 97_667
DEFAULT_EXISTS_COST = 2_600  # one cold storage slot read


@dataclass(frozen=True)
class EmbedHash:
    """256-bit digest of a canonically serialized embedding."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValidationError(f"digest must be 32 bytes, got {len(self.digest)}")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, s: str) -> "EmbedHash":
        return cls(bytes.fromhex(s))


def embed_hash(vector) -> EmbedHash:
    """SHA-256 over the canonical serialization: dim u32 LE, then f32 LE components.

    Canonical means the exact stored 32-bit payload bytes, so two vectors
    with equal values always hash identically regardless of provenance.
    """
    v = ensure_not_zero(as_vector(vector))
    payload = struct.pack("<I", v.size) + v.astype("<f4", copy=False).tobytes()
    return EmbedHash(hashlib.sha256(payload).digest())


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    digest: EmbedHash
    prev_chain: bytes
    chain: bytes
    timestamp: int

    def pack(self) -> bytes:
        return _ENTRY.pack(self.index, self.digest.digest, self.prev_chain, self.chain, self.timestamp)


def _chain_value(prev_chain: bytes, digest: bytes, index: int, timestamp: int) -> bytes:
    h = hashlib.sha256()
    h.update(prev_chain)
    h.update(digest)
    h.update(struct.pack("<Q", index))
    h.update(struct.pack("<Q", timestamp))
    return h.digest()


@dataclass(frozen=True)
class GasModel:
    """Calibration of the simulated storage costs (gas units)."""

    uint_store_mean: int = DEFAULT_UINT_MEAN
    uint_store_min: int = DEFAULT_UINT_MIN
    uint_store_max: int = DEFAULT_UINT_MAX
    string_store_cost: int = DEFAULT_STRING_COST
    exists_check_cost: int = DEFAULT_EXISTS_COST

    def __post_init__(self):
        if min(self.uint_store_mean, self.uint_store_min, self.uint_store_max,
               self.string_store_cost, self.exists_check_cost) <= 0:
            raise ValidationError("gas model values must be positive")
        if not (self.uint_store_min <= self.uint_store_mean <= self.uint_store_max):
            raise ValidationError("gas model requires min <= mean <= max")

    @property
    def uint_store_mode(self) -> float:
        # Triangular mode solving (min + mode + max) / 3 == mean.
        m = 3.0 * self.uint_store_mean - self.uint_store_min - self.uint_store_max
        return float(min(max(m, self.uint_store_min), self.uint_store_max))


@dataclass(frozen=True)
class ChainVerdict:
    ok: bool
    first_bad_index: int | None = None
    reason: str | None = None


class HashVerdict(Enum):
    AI = "ai"
    HUMAN = "human"
    UNDETERMINED = "undetermined"


class Ledger:
    """Append-only digest log with set-membership lookups.

    One writer per ledger; reads (``hash_exists``) hit the in-memory
    membership index and never touch the file.
    """

    def __init__(self, path: Path, name: str, entries: list[LedgerEntry],
                 gas_model: GasModel, gas_seed: int | None):
        self.path = Path(path)
        self.name = name
        self.entries = entries
        self.gas_model = gas_model
        self._members = {e.digest for e in entries}
        self._rng = np.random.default_rng(gas_seed)

    @classmethod
    def create(cls, path: str | Path, name: str,
               gas_model: GasModel | None = None, gas_seed: int | None = None) -> "Ledger":
        path = Path(path)
        if path.exists():
            raise ValidationError(f"ledger file {path} already exists")
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(_pack_header(name))
        return cls(path, name, [], gas_model or GasModel(), gas_seed)

    @classmethod
    def open(cls, path: str | Path,
             gas_model: GasModel | None = None, gas_seed: int | None = None) -> "Ledger":
        """Open for append; fails closed if the chain does not verify."""
        path = Path(path)
        verdict = verify_chain(path)
        if not verdict.ok:
            raise LedgerCorruptError(
                f"{path}: {verdict.reason or 'chain mismatch'}"
                + (f" at entry {verdict.first_bad_index}" if verdict.first_bad_index is not None else "")
            )
        name, entries = _read_ledger_file(path)
        return cls(path, name, entries, gas_model or GasModel(), gas_seed)

    def __len__(self) -> int:
        return len(self.entries)

    def hash_exists(self, h: EmbedHash) -> bool:
        return h in self._members

    def store_hash(self, h: EmbedHash) -> tuple[bool, int]:
        """Append a digest if absent. Returns (stored, simulated gas).

        A duplicate store is idempotent set semantics: nothing is appended
        and only the membership check is charged.
        """
        if h in self._members:
            return False, self.gas_model.exists_check_cost
        prev = self.entries[-1].chain if self.entries else ZERO32
        index = len(self.entries)
        ts = int(time.time())
        entry = LedgerEntry(
            index=index,
            digest=h,
            prev_chain=prev,
            chain=_chain_value(prev, h.digest, index, ts),
            timestamp=ts,
        )
        with open(self.path, "ab") as f:
            f.write(entry.pack())
        self.entries.append(entry)
        self._members.add(h)
        gas = int(round(self._rng.triangular(
            self.gas_model.uint_store_min, self.gas_model.uint_store_mode, self.gas_model.uint_store_max
        )))
        return True, gas

    def verify(self) -> ChainVerdict:
        return verify_chain(self.path)


def _pack_header(name: str) -> bytes:
    raw = name.encode("utf-8")
    return LEDGER_MAGIC + struct.pack("<HH", LEDGER_VERSION, len(raw)) + raw


def _parse_header(raw: bytes) -> tuple[str, int]:
    """Returns (name, offset of first entry). Raises ValidationError."""
    if len(raw) < 8 or raw[:4] != LEDGER_MAGIC:
        raise ValidationError("bad ledger magic")
    version, name_len = struct.unpack_from("<HH", raw, 4)
    if version != LEDGER_VERSION:
        raise ValidationError(f"unsupported ledger version {version}")
    if len(raw) < 8 + name_len:
        raise ValidationError("truncated ledger header")
    return raw[8:8 + name_len].decode("utf-8"), 8 + name_len


def verify_chain(path: str | Path) -> ChainVerdict:
    """Recompute every chain value on disk.

    Structural damage (truncation mid-entry, header rot) and any byte-level
    mutation of an entry both yield ok=False with the first bad index.
    """
    raw = Path(path).read_bytes()
    try:
        _, offset = _parse_header(raw)
    except ValidationError as e:
        return ChainVerdict(ok=False, first_bad_index=None, reason=str(e))

    body = raw[offset:]
    if len(body) % _ENTRY.size != 0:
        bad = len(body) // _ENTRY.size
        return ChainVerdict(ok=False, first_bad_index=bad, reason="truncated entry")

    prev = ZERO32
    for i in range(len(body) // _ENTRY.size):
        index, digest, prev_chain, chain, ts = _ENTRY.unpack_from(body, i * _ENTRY.size)
        if index != i:
            return ChainVerdict(ok=False, first_bad_index=i, reason="non-contiguous index")
        if prev_chain != prev:
            return ChainVerdict(ok=False, first_bad_index=i, reason="broken chain linkage")
        if _chain_value(prev_chain, digest, index, ts) != chain:
            return ChainVerdict(ok=False, first_bad_index=i, reason="chain value mismatch")
        prev = chain
    return ChainVerdict(ok=True)


def _read_ledger_file(path: Path) -> tuple[str, list[LedgerEntry]]:
    raw = path.read_bytes()
    name, offset = _parse_header(raw)
    body = raw[offset:]
    entries = []
    for i in range(len(body) // _ENTRY.size):
        index, digest, prev_chain, chain, ts = _ENTRY.unpack_from(body, i * _ENTRY.size)
        entries.append(LedgerEntry(index, EmbedHash(digest), prev_chain, chain, ts))
    return name, entries


def classify_by_hash(h: EmbedHash, ai_ledger: Ledger, human_ledger: Ledger) -> HashVerdict:
    """Exact-membership classification: AI, HUMAN, or UNDETERMINED.

    Membership in both ledgers resolves to AI with a logged warning rather
    than guessing silently.
    """
    in_ai = ai_ledger.hash_exists(h)
    in_human = human_ledger.hash_exists(h)
    if in_ai and in_human:
        log.warning("digest %s present in both ledgers; resolving to AI", h.hex)
        return HashVerdict.AI
    if in_ai:
        return HashVerdict.AI
    if in_human:
        return HashVerdict.HUMAN
    return HashVerdict.UNDETERMINED


@dataclass(frozen=True)
class GasSummary:
    count: int
    mean: float
    median: float
    minimum: int
    maximum: int


def simulate_gas(mode: str, n: int, model: GasModel | None = None,
                 seed: int | None = None) -> tuple[np.ndarray, GasSummary]:
    """Simulate n store transactions in "uint256" or "string" mode.

    uint256 draws from the calibrated triangular distribution; string mode
    is the constant per-transaction cost. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    model = model or GasModel()
    if mode == "uint256":
        rng = np.random.default_rng(seed)
        values = np.rint(rng.triangular(
            model.uint_store_min, model.uint_store_mode, model.uint_store_max, size=n
        )).astype(np.int64)
    elif mode == "string":
        values = np.full(n, model.string_store_cost, dtype=np.int64)
    else:
        raise ValidationError(f"unknown gas mode {mode!r}, expected 'uint256' or 'string'")
    summary = GasSummary(
        count=n,
        mean=float(values.mean()),
        median=float(np.median(values)),
        minimum=int(values.min()),
        maximum=int(values.max()),
    )
    return values, summary


def format_gas_table(summary: GasSummary) -> str:
    """Five-row statistic table as delimited text."""
    rows = [
        ("count", str(summary.count)),
        ("mean", f"{summary.mean:.2f}"),
        ("median", f"{summary.median:.2f}"),
        ("min", str(summary.minimum)),
        ("max", str(summary.maximum)),
    ]
    return "statistic,gas\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"
