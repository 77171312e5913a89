"""Image provenance engine.

Classifies embeddings as AI-generated or human-made by exact
nearest-neighbor cosine similarity over labeled collections, verifies
results against a tamper-evident 256-bit hash ledger, and benchmarks
embedding robustness under deterministic image perturbations.
"""

from .classifier import (
    ConfusionMatrix,
    MetricsSummary,
    PredictionRecord,
    classify,
    classify_scores,
    evaluate,
    write_report,
)
from .errors import LedgerCorruptError, NotDeterminableError, ProvenanceError, ValidationError
from .interchange import (
    Label,
    RecordMeta,
    as_vector,
    read_embedding_file,
    toy_embed,
    write_embedding_file,
)
from .ledger import (
    EmbedHash,
    GasModel,
    HashVerdict,
    Ledger,
    classify_by_hash,
    embed_hash,
    simulate_gas,
    verify_chain,
)
from .perturb import (
    MatchResult,
    PerturbationKind,
    PerturbationSpec,
    apply_blur,
    apply_multi_patch,
    apply_resize,
    apply_single_patch,
    run_robustness_benchmark,
)
from .pipeline import ClassifyResponse, Engine, FrameworkMode
from .vecstore import Collection, Neighbor, Store, cosine_distance

__version__ = "0.1.0"

__all__ = [
    "ClassifyResponse",
    "Collection",
    "ConfusionMatrix",
    "EmbedHash",
    "Engine",
    "FrameworkMode",
    "GasModel",
    "HashVerdict",
    "Label",
    "Ledger",
    "LedgerCorruptError",
    "MatchResult",
    "MetricsSummary",
    "Neighbor",
    "NotDeterminableError",
    "PerturbationKind",
    "PerturbationSpec",
    "PredictionRecord",
    "ProvenanceError",
    "RecordMeta",
    "Store",
    "ValidationError",
    "apply_blur",
    "apply_multi_patch",
    "apply_resize",
    "apply_single_patch",
    "as_vector",
    "classify",
    "classify_by_hash",
    "classify_scores",
    "cosine_distance",
    "embed_hash",
    "evaluate",
    "read_embedding_file",
    "run_robustness_benchmark",
    "simulate_gas",
    "toy_embed",
    "verify_chain",
    "write_embedding_file",
    "write_report",
]
