"""Directory-to-interchange export pipeline."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backbones import REGISTRY, load_backbone
from .writer import write_interchange

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tif", ".tiff"}


@dataclass
class ProviderConfig:
    backbone: str
    device: str = "cpu"
    batch_size: int = 8
    pretrained: bool = True
    seed: int | None = None
    label: str = "ai"
    namespace: str = "train"

    def __post_init__(self):
        if self.backbone not in REGISTRY:
            raise ValueError(f"unknown backbone {self.backbone!r}; choose from {sorted(REGISTRY)}")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.label not in ("ai", "human"):
            raise ValueError(f"label must be 'ai' or 'human', got {self.label!r}")


def export_embeddings(image_dir: str | Path, config: ProviderConfig, out_path: str | Path) -> int:
    """Embed every decodable image under image_dir into one interchange file.

    Vectors land in sorted-filename order with ids = filenames. Undecodable
    files are skipped with a warning and excluded from the count.
    """
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ValueError(f"{image_dir} is not a directory")

    candidates = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    names, images = [], []
    for path in candidates:
        try:
            with Image.open(path) as im:
                images.append(im.convert("RGB"))
            names.append(path.name)
        except Exception as e:
            log.warning("skipping undecodable image %s: %s", path, e)

    info = REGISTRY[config.backbone]
    if not names:
        write_interchange(out_path, [], np.zeros((0, info.dim), np.float32),
                          config.label, config.namespace)
        return 0

    backbone = load_backbone(config.backbone, device=config.device,
                             pretrained=config.pretrained, seed=config.seed)
    chunks = [
        backbone.embed(images[i:i + config.batch_size])
        for i in range(0, len(images), config.batch_size)
    ]
    vectors = np.concatenate(chunks, axis=0)
    write_interchange(out_path, names, vectors, config.label, config.namespace,
                      extra={"preprocess": type(backbone.processor).__name__})
    return len(names)
