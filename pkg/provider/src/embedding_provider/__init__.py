"""Offline vision-backbone embedding exporter."""

from .backbones import REGISTRY, BackboneInfo, load_backbone
from .export import ProviderConfig, export_embeddings
from .writer import write_interchange

__version__ = "0.1.0"

__all__ = [
    "REGISTRY",
    "BackboneInfo",
    "ProviderConfig",
    "export_embeddings",
    "load_backbone",
    "write_interchange",
]
