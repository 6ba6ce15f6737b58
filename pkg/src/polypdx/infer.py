"""Slide-level inference: patch tallies and the hierarchical diagnosis rule.

A slide is first summarized by counting each patch toward its argmax
label. The diagnosis rule then works in two stages: the adenomatous
branch wins when adenomatous patches are at least as numerous as serrated
ones, and within a branch the rarer subtype (TVA, SSA) is called only
when its fraction of all tissue patches strictly exceeds a threshold.
The published operating point is 30% for villous tissue and 1.5% for
sessile serrated patches; both thresholds are recalibratable by grid
search (see ``calibrate``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .classify import PatchPrediction
from .display import percent
from .errors import NoTissue
from .labels import DIAGNOSES, LABEL_ORDER, Diagnosis, PolypLabel

DEFAULT_VILLOUS_THRESHOLD = 0.30
DEFAULT_SSA_THRESHOLD = 0.015


@dataclass(frozen=True)
class ThresholdConfig:
    """Decision thresholds for the hierarchical rule.

    ``confidence_floor`` drops patches whose top probability falls below
    it before counting; the default of 0 counts every patch.
    """

    villous_threshold: float = DEFAULT_VILLOUS_THRESHOLD
    ssa_threshold: float = DEFAULT_SSA_THRESHOLD
    confidence_floor: float = 0.0

    def __post_init__(self) -> None:
        for name in ("villous_threshold", "ssa_threshold", "confidence_floor"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def to_json_dict(self) -> dict:
        return {
            "villous_threshold": self.villous_threshold,
            "ssa_threshold": self.ssa_threshold,
            "confidence_floor": self.confidence_floor,
        }

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "ThresholdConfig":
        return cls(**{k: float(record[k]) for k in
                      ("villous_threshold", "ssa_threshold", "confidence_floor") if k in record})


@dataclass(frozen=True)
class SlideSummary:
    """Per-label patch counts for one slide."""

    counts: Mapping[PolypLabel, int]
    slide_id: str | None = None

    def __post_init__(self) -> None:
        full = {label: int(self.counts.get(label, 0)) for label in LABEL_ORDER}
        if any(v < 0 for v in full.values()):
            raise ValueError(f"counts must be non-negative, got {full}")
        object.__setattr__(self, "counts", full)

    @property
    def tissue_total(self) -> int:
        """Number of polyp-tissue patches (NORM excluded)."""
        return sum(self.counts[label] for label in DIAGNOSES)

    @property
    def fractions(self) -> dict[Diagnosis, float] | None:
        """Per-diagnosis share of tissue patches; None when no tissue."""
        total = self.tissue_total
        if total == 0:
            return None
        return {d: self.counts[d] / total for d in DIAGNOSES}

    def to_json_dict(self) -> dict:
        fractions = self.fractions
        return {
            "slide_id": self.slide_id,
            "counts": {label.value: self.counts[label] for label in LABEL_ORDER},
            "tissue_total": self.tissue_total,
            "fractions": None if fractions is None else
                         {d.value: fractions[d] for d in DIAGNOSES},
        }

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "SlideSummary":
        counts = {PolypLabel(k): int(v) for k, v in record["counts"].items()}
        return cls(counts=counts, slide_id=record.get("slide_id"))


def summarize(preds: Iterable[PatchPrediction], thr: ThresholdConfig,
              slide_id: str | None = None) -> SlideSummary:
    """Count each prediction toward its argmax label.

    Argmax ties break in the fixed label order TA, TVA, HP, SSA, NORM.
    Predictions with a top probability below the confidence floor are
    dropped. An empty input yields an all-zero summary.
    """
    counts = {label: 0 for label in LABEL_ORDER}
    for pred in preds:
        if pred.max_prob >= thr.confidence_floor:
            counts[pred.argmax_label] += 1
    return SlideSummary(counts=counts, slide_id=slide_id)


def diagnose_counts(ta: float, tva: float, hp: float, ssa: float,
                    thr: ThresholdConfig) -> Diagnosis:
    """Hierarchical rule over raw per-class tallies (ints or weights).

    Equal adenomatous and serrated totals resolve to the adenomatous
    branch. Subtype fractions use all four tallies as the denominator and
    must strictly exceed their threshold.
    """
    total = ta + tva + hp + ssa
    if total <= 0:
        raise NoTissue("cannot diagnose a slide with no tissue patches")
    if ta + tva >= hp + ssa:
        return Diagnosis.TVA if tva / total > thr.villous_threshold else Diagnosis.TA
    return Diagnosis.SSA if ssa / total > thr.ssa_threshold else Diagnosis.HP


def diagnose(summary: SlideSummary, thr: ThresholdConfig) -> Diagnosis:
    """Apply the hierarchical rule to a slide summary."""
    c = summary.counts
    return diagnose_counts(c[PolypLabel.TA], c[PolypLabel.TVA],
                           c[PolypLabel.HP], c[PolypLabel.SSA], thr)


def percentage_area_row(summary: SlideSummary) -> dict[Diagnosis, float]:
    """Tissue shares as one-decimal percentages, for tabular output."""
    fractions = summary.fractions
    if fractions is None:
        raise NoTissue(f"slide {summary.slide_id!r} has no tissue patches")
    return {d: percent(fractions[d]) for d in DIAGNOSES}


def diagnosis_record(summary: SlideSummary, diagnosis: Diagnosis,
                     thr: ThresholdConfig) -> dict:
    """JSON-ready record combining a summary with its diagnosis."""
    record = summary.to_json_dict()
    record["diagnosis"] = diagnosis.value
    record["thresholds"] = thr.to_json_dict()
    return record
