"""Deterministic image perturbations and the nearest-match robustness benchmark.

Images are uint8 arrays, (H, W) grayscale or (H, W, 3) RGB. Every
perturbation is a pure function of (pixels, spec): same seed, same output,
bit for bit. Randomized kinds (patches) place their squares uniformly over
the valid top-left coordinates; per-image seeds are split off one master
seed with a counter so corpus runs are reproducible yet independent.

Match accuracy is the percentage of perturbed images whose nearest
neighbor among the original embeddings is their own source image.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import ceil
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ValidationError
from .interchange import Label, RecordMeta, area_resize, toy_embed
from .vecstore import Collection

WHITE = 255
DEFAULT_SINGLE_PATCH = 128
DEFAULT_MULTI_PATCH_SIZE = 64
DEFAULT_MULTI_PATCH_RANGE = (3, 5)
DEFAULT_RESIZE_TARGET = 128
BLUR_LEVELS = (20, 40, 60, 80)

# 100% blur intensity maps to sigma 10px on a 512px image, scaled by size.
BLUR_SIGMA_AT_FULL = 10.0
BLUR_REFERENCE_SIZE = 512.0


class PerturbationKind(Enum):
    SINGLE_PATCH = "single_patch"
    MULTI_PATCH = "multi_patch"
    RESIZE = "resize"
    BLUR = "blur"


@dataclass(frozen=True)
class PerturbationSpec:
    """One image modification; only the fields relevant to its kind are set."""

    kind: PerturbationKind
    patch_size: int | None = None
    patch_count_range: tuple[int, int] | None = None
    target_size: int | None = None
    intensity_percent: int | None = None
    seed: int | None = None

    def __post_init__(self):
        k = self.kind
        want = {
            PerturbationKind.SINGLE_PATCH: ("patch_size", "seed"),
            PerturbationKind.MULTI_PATCH: ("patch_size", "patch_count_range", "seed"),
            PerturbationKind.RESIZE: ("target_size",),
            PerturbationKind.BLUR: ("intensity_percent",),
        }[k]
        for field in ("patch_size", "patch_count_range", "target_size", "intensity_percent", "seed"):
            have = getattr(self, field) is not None
            if have != (field in want):
                raise ValidationError(f"{k.value} spec must set exactly {want}, got {field}={getattr(self, field)!r}")
        if self.patch_size is not None and self.patch_size < 1:
            raise ValidationError("patch size must be >= 1")
        if self.patch_count_range is not None:
            lo, hi = self.patch_count_range
            if not (1 <= lo <= hi):
                raise ValidationError(f"bad patch count range {self.patch_count_range}")
        if self.target_size is not None and self.target_size < 1:
            raise ValidationError("target size must be >= 1")
        if self.intensity_percent is not None and not (0 <= self.intensity_percent <= 100):
            raise ValidationError("blur intensity must be in [0, 100]")

    @classmethod
    def single_patch(cls, size: int = DEFAULT_SINGLE_PATCH, seed: int = 0) -> "PerturbationSpec":
        return cls(PerturbationKind.SINGLE_PATCH, patch_size=size, seed=seed)

    @classmethod
    def multi_patch(cls, count_range: tuple[int, int] = DEFAULT_MULTI_PATCH_RANGE,
                    patch_size: int = DEFAULT_MULTI_PATCH_SIZE, seed: int = 0) -> "PerturbationSpec":
        return cls(PerturbationKind.MULTI_PATCH, patch_size=patch_size,
                   patch_count_range=tuple(count_range), seed=seed)

    @classmethod
    def resize(cls, target: int = DEFAULT_RESIZE_TARGET) -> "PerturbationSpec":
        return cls(PerturbationKind.RESIZE, target_size=target)

    @classmethod
    def blur(cls, intensity_percent: int) -> "PerturbationSpec":
        return cls(PerturbationKind.BLUR, intensity_percent=intensity_percent)

    @classmethod
    def identity(cls) -> "PerturbationSpec":
        return cls.blur(0)

    @property
    def name(self) -> str:
        if self.kind is PerturbationKind.BLUR:
            return "identity" if self.intensity_percent == 0 else f"blur{self.intensity_percent}"
        return self.kind.value


def derive_seed(*keys: int) -> int:
    """Counter-based seed split: stable 64-bit seed from integer keys."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1, np.uint64)[0])


def _check_image(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img)
    if a.dtype != np.uint8 or a.ndim not in (2, 3) or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError("expected a uint8 raster image with positive size")
    return a


def apply_single_patch(img: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Overlay one pure-white size x size square at a seeded uniform position."""
    a = _check_image(img)
    h, w = a.shape[:2]
    if size < 1 or size > min(h, w):
        raise ValidationError(f"patch size {size} does not fit a {w}x{h} image")
    rng = np.random.default_rng(seed)
    out = a.copy()
    _paint_patch(out, rng, size)
    return out


def apply_multi_patch(img: np.ndarray, count_range: tuple[int, int],
                      patch_size: int, seed: int) -> np.ndarray:
    """Overlay k white squares, k drawn uniformly from count_range; overlaps allowed."""
    a = _check_image(img)
    h, w = a.shape[:2]
    if patch_size < 1 or patch_size > min(h, w):
        raise ValidationError(f"patch size {patch_size} does not fit a {w}x{h} image")
    lo, hi = count_range
    if not (1 <= lo <= hi):
        raise ValidationError(f"bad patch count range {count_range}")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(lo, hi + 1))
    out = a.copy()
    for _ in range(k):
        _paint_patch(out, rng, patch_size)
    return out


def _paint_patch(out: np.ndarray, rng: np.random.Generator, size: int) -> None:
    h, w = out.shape[:2]
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    out[top:top + size, left:left + size] = WHITE


def apply_resize(img: np.ndarray, target: int) -> np.ndarray:
    """Downsample (or resample) to target x target by exact area averaging."""
    a = _check_image(img)
    resized = area_resize(a, target, target)
    return np.clip(np.rint(resized), 0, 255).astype(np.uint8)


def blur_sigma(intensity_percent: float, height: int, width: int) -> float:
    return (intensity_percent / 100.0) * BLUR_SIGMA_AT_FULL * min(height, width) / BLUR_REFERENCE_SIZE


def apply_blur(img: np.ndarray, intensity_percent: int) -> np.ndarray:
    """Gaussian blur; sigma scales linearly with intensity, radius = ceil(3 sigma).

    Edges are clamped (nearest replication). Intensity 0 is the identity.
    """
    a = _check_image(img)
    if not (0 <= intensity_percent <= 100):
        raise ValidationError("blur intensity must be in [0, 100]")
    if intensity_percent == 0:
        return a.copy()
    h, w = a.shape[:2]
    sigma = blur_sigma(intensity_percent, h, w)
    radius = ceil(3.0 * sigma)
    sig = (sigma, sigma) + (0.0,) * (a.ndim - 2)
    rad = (radius, radius) + (0,) * (a.ndim - 2)
    blurred = gaussian_filter(a.astype(np.float64), sigma=sig, radius=rad, mode="nearest")
    return np.clip(np.rint(blurred), 0, 255).astype(np.uint8)


def apply(img: np.ndarray, spec: PerturbationSpec, seed: int | None = None) -> np.ndarray:
    """Apply a spec; an explicit seed (per-image split) overrides the spec's."""
    if spec.kind is PerturbationKind.SINGLE_PATCH:
        return apply_single_patch(img, spec.patch_size, spec.seed if seed is None else seed)
    if spec.kind is PerturbationKind.MULTI_PATCH:
        return apply_multi_patch(img, spec.patch_count_range, spec.patch_size,
                                 spec.seed if seed is None else seed)
    if spec.kind is PerturbationKind.RESIZE:
        return apply_resize(img, spec.target_size)
    return apply_blur(img, spec.intensity_percent)


def default_perturbations(master_seed: int = 0) -> list[PerturbationSpec]:
    """The benchmark grid: identity, patches, resize, then the blur sweep."""
    return [
        PerturbationSpec.identity(),
        PerturbationSpec.single_patch(seed=derive_seed(master_seed, 1)),
        PerturbationSpec.multi_patch(seed=derive_seed(master_seed, 2)),
        PerturbationSpec.resize(),
        *(PerturbationSpec.blur(p) for p in BLUR_LEVELS),
    ]


# --- benchmark ------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    modified_id: str
    nearest_original_id: str
    distance: float
    correct: bool


@dataclass(frozen=True)
class BenchmarkRow:
    perturbation: str
    total: int
    correct: int
    accuracy_percent: float


def run_robustness_benchmark(
    originals: Collection,
    modified: Sequence[tuple[RecordMeta, np.ndarray]],
    namespace: str = "originals",
) -> tuple[list[MatchResult], float]:
    """Nearest-match each modified embedding against the originals.

    A match is correct iff the nearest original is the record named by the
    modified record's source_name. Accuracy is exactly
    100 * correct / total.
    """
    if not modified:
        raise ValidationError("no modified records to benchmark")
    results = []
    n_correct = 0
    for meta, vec in modified:
        source = meta.source_name
        if not originals.contains(namespace, source):
            raise ValidationError(f"modified record {meta.id!r} names unknown source {source!r}")
        distance, nearest = originals.nearest_distance(namespace, vec)
        correct = nearest == source
        n_correct += correct
        results.append(MatchResult(meta.id, nearest, distance, correct))
    return results, 100.0 * n_correct / len(modified)


def benchmark_corpus(
    images: Mapping[str, np.ndarray],
    specs: Sequence[PerturbationSpec],
    label: Label = Label.AI,
) -> tuple[list[BenchmarkRow], dict[str, list[MatchResult]]]:
    """Toy-embed a corpus, perturb it per spec, and score every grid row.

    Per-image seeds derive from each spec's seed and the image's position
    in sorted-id order, so two runs of the same corpus are bit-identical.
    """
    if not images:
        raise ValidationError("empty image corpus")
    names = sorted(images)
    originals = Collection(Path("."), "bench-originals", label, dim=256)
    originals.upsert_many(
        "originals",
        [
            (RecordMeta(id=n, source_name=n, label=label, namespace="originals"), toy_embed(images[n]))
            for n in names
        ],
    )
    rows = []
    details: dict[str, list[MatchResult]] = {}
    for spec in specs:
        modified = []
        for i, n in enumerate(names):
            seed = derive_seed(spec.seed, i) if spec.seed is not None else None
            out = apply(images[n], spec, seed=seed)
            meta = RecordMeta(id=f"{n}#{spec.name}", source_name=n, label=label, namespace=spec.name)
            modified.append((meta, toy_embed(out)))
        results, accuracy = run_robustness_benchmark(originals, modified)
        rows.append(BenchmarkRow(spec.name, len(results), sum(r.correct for r in results), accuracy))
        details[spec.name] = results
    return rows, details


def format_benchmark_grid(rows: Sequence[BenchmarkRow]) -> str:
    lines = ["perturbation,total,correct,accuracy_percent"]
    lines += [f"{r.perturbation},{r.total},{r.correct},{r.accuracy_percent:.2f}" for r in rows]
    return "\n".join(lines) + "\n"


def format_benchmark_detail(details: Mapping[str, Sequence[MatchResult]]) -> str:
    lines = ["modified_id,nearest_original_id,distance,correct"]
    for name in details:
        for r in details[name]:
            lines.append(f"{r.modified_id},{r.nearest_original_id},{r.distance:.6f},{str(r.correct).lower()}")
    return "\n".join(lines) + "\n"
