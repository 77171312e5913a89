"""Nearest-distance classification over the two labeled collections.

A query is called AI-generated iff its minimum cosine distance to the AI
collection is <= its minimum distance to the human collection (ties go to
AI). Reports convert distance to similarity as ``1 - distance`` at the
boundary; the engine itself is distance-native.

Report CSVs serialize labels as "real" (human) and "fake" (AI).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ValidationError
from .interchange import Label, as_vector, ensure_not_zero
from .vecstore import Collection

REPORT_HEADER = ["filename", "true_label", "human_similarity", "ai_similarity", "predicted_label", "verified"]

_REPORT_LABEL = {Label.HUMAN: "real", Label.AI: "fake"}
_PARSE_LABEL = {"real": Label.HUMAN, "fake": Label.AI}


@dataclass
class PredictionRecord:
    """One classified input, similarity scores plus verdict."""

    source_name: str
    true_label: Label | None
    human_similarity: float
    ai_similarity: float
    predicted_label: Label
    nearest_ai_id: str
    nearest_human_id: str
    verified_on_ledger: bool | None = None


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with AI ("fake") as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsSummary:
    """Precision/recall/accuracy; a zero denominator yields None, never 0."""

    precision: float | None
    recall: float | None
    accuracy: float | None

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "MetricsSummary":
        return cls(
            precision=cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else None,
            recall=cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else None,
            accuracy=(cm.tp + cm.tn) / cm.total if cm.total else None,
        )


def classify_scores(human_similarity: float, ai_similarity: float) -> Label:
    """Decision rule in similarity space: AI iff ai >= human."""
    return Label.AI if ai_similarity >= human_similarity else Label.HUMAN


def classify(
    query,
    ai: Collection,
    human: Collection,
    namespace: str,
    source_name: str = "",
    true_label: Label | None = None,
) -> PredictionRecord:
    """Classify one embedding against the AI and human collections.

    Raises NotDeterminableError if either namespace is empty; an
    unanswerable query is an error state, not a verdict.
    """
    q = ensure_not_zero(as_vector(query))
    d_ai, ai_id = ai.nearest_distance(namespace, q)
    d_human, human_id = human.nearest_distance(namespace, q)
    ai_sim = 1.0 - d_ai
    human_sim = 1.0 - d_human
    return PredictionRecord(
        source_name=source_name,
        true_label=true_label,
        human_similarity=human_sim,
        ai_similarity=ai_sim,
        predicted_label=classify_scores(human_sim, ai_sim),
        nearest_ai_id=ai_id,
        nearest_human_id=human_id,
    )


def evaluate(
    test_ai: Sequence,
    test_human: Sequence,
    ai: Collection,
    human: Collection,
    namespace: str = "train",
) -> tuple[ConfusionMatrix, MetricsSummary]:
    """Classify both test sets and tally with AI as the positive class."""
    if len(test_ai) == 0 and len(test_human) == 0:
        raise ValidationError("both test sets are empty")
    tp = fn = fp = tn = 0
    for vec in test_ai:
        rec = classify(vec, ai, human, namespace)
        if rec.predicted_label is Label.AI:
            tp += 1
        else:
            fn += 1
    for vec in test_human:
        rec = classify(vec, ai, human, namespace)
        if rec.predicted_label is Label.AI:
            fp += 1
        else:
            tn += 1
    cm = ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)
    return cm, MetricsSummary.from_confusion(cm)


def write_report(records: Sequence[PredictionRecord], path: str | Path) -> None:
    """Write the prediction CSV: one row per record, similarities at 4 dp."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in records:
            w.writerow(
                [
                    r.source_name,
                    _REPORT_LABEL[r.true_label] if r.true_label is not None else "",
                    f"{r.human_similarity:.4f}",
                    f"{r.ai_similarity:.4f}",
                    _REPORT_LABEL[r.predicted_label],
                    "" if r.verified_on_ledger is None else str(r.verified_on_ledger).lower(),
                ]
            )


def read_report(path: str | Path) -> list[dict]:
    """Parse a report CSV back into dicts (inverse of write_report fields)."""
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != REPORT_HEADER:
            raise ValidationError(f"unexpected report header {reader.fieldnames}")
        return list(reader)


def parse_report_label(s: str) -> Label | None:
    if s == "":
        return None
    if s not in _PARSE_LABEL:
        raise ValidationError(f"unknown report label {s!r}")
    return _PARSE_LABEL[s]
