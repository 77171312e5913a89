"""The five supported vision backbones and their embedding heads.

Each backbone exposes one published embedding dimension and a mean-pooling
head over its final hidden states: transformer families average across all
tokens, the CNN family averages across spatial positions, and CLIP applies
its (linear) visual projection after pooling so the exported width matches
its published 512.

Backbones load pretrained weights by default. `pretrained=False` builds
the same architecture at its published size with seeded random weights,
which keeps conformance tests hermetic when no model hub is reachable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch


@dataclass(frozen=True)
class BackboneInfo:
    key: str
    model_id: str
    dim: int


REGISTRY: dict[str, BackboneInfo] = {
    "clip": BackboneInfo("clip", "openai/clip-vit-base-patch32", 512),
    "vit": BackboneInfo("vit", "google/vit-base-patch16-224-in21k", 768),
    "dinov2": BackboneInfo("dinov2", "facebook/dinov2-base", 768),
    "resnet50": BackboneInfo("resnet50", "microsoft/resnet-50", 2048),
    "aimv2": BackboneInfo("aimv2", "apple/aimv2-large-patch14-224", 1024),
}


class LoadedBackbone:
    """A ready-to-run (processor, model, pooling head) triple."""

    def __init__(self, info: BackboneInfo, processor, model, pool: Callable, device: torch.device):
        self.info = info
        self.processor = processor
        self.model = model.to(device).eval()
        self._pool = pool
        self.device = device

    @torch.no_grad()
    def embed(self, images: list) -> np.ndarray:
        """Mean-pooled float32 embeddings, shape (len(images), dim)."""
        inputs = self.processor(images=images, return_tensors="pt").to(self.device)
        outputs = self.model(**inputs)
        pooled = self._pool(self.model, outputs)
        vecs = pooled.cpu().to(torch.float32).numpy()
        if vecs.shape[1] != self.info.dim:
            raise RuntimeError(
                f"{self.info.key} produced dim {vecs.shape[1]}, expected {self.info.dim}"
            )
        return vecs


def _pool_tokens(model, outputs):
    return outputs.last_hidden_state.mean(dim=1)


def _pool_clip(model, outputs):
    return model.visual_projection(outputs.last_hidden_state.mean(dim=1))


def _pool_spatial(model, outputs):
    return outputs.last_hidden_state.mean(dim=(2, 3))


def resolve_device(preference: str) -> torch.device:
    if preference == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    return torch.device(preference)


def load_backbone(
    name: str,
    device: str = "cpu",
    pretrained: bool = True,
    seed: int | None = None,
) -> LoadedBackbone:
    from transformers import (
        Aimv2VisionConfig,
        Aimv2VisionModel,
        AutoImageProcessor,
        BitImageProcessor,
        CLIPImageProcessor,
        CLIPVisionConfig,
        CLIPVisionModelWithProjection,
        ConvNextImageProcessor,
        Dinov2Config,
        Dinov2Model,
        ResNetConfig,
        ResNetModel,
        ViTConfig,
        ViTImageProcessor,
        ViTModel,
    )

    families = {
        "clip": (CLIPVisionModelWithProjection, CLIPVisionConfig, CLIPImageProcessor, _pool_clip),
        "vit": (ViTModel, ViTConfig, ViTImageProcessor, _pool_tokens),
        "dinov2": (Dinov2Model, Dinov2Config, BitImageProcessor, _pool_tokens),
        "resnet50": (ResNetModel, ResNetConfig, ConvNextImageProcessor, _pool_spatial),
        "aimv2": (Aimv2VisionModel, Aimv2VisionConfig, CLIPImageProcessor, _pool_tokens),
    }
    if name not in families:
        raise ValueError(f"unknown backbone {name!r}; choose from {sorted(families)}")
    info = REGISTRY[name]
    model_cls, config_cls, processor_cls, pool = families[name]

    if pretrained:
        try:
            model = model_cls.from_pretrained(info.model_id)
            processor = AutoImageProcessor.from_pretrained(info.model_id)
        except Exception as e:
            raise RuntimeError(f"failed to load pretrained {info.model_id}: {e}") from e
    else:
        if seed is not None:
            torch.manual_seed(seed)
        model = model_cls(config_cls())
        processor = processor_cls()

    return LoadedBackbone(info, processor, model, pool, resolve_device(device))
