"""Threshold recovery by exhaustive grid search over labeled slides.

The objective is the unweighted mean of the four one-vs-rest per-class
accuracies of the hierarchical rule. Every (villous, ssa) grid point is
scored; ties resolve to the smallest villous threshold, then the smallest
ssa threshold. The default grid steps place the published operating
point (0.30, 0.015) exactly on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyDataset, NoTissue
from .infer import SlideSummary, ThresholdConfig, diagnose
from .labels import DIAGNOSES, Diagnosis, PolypLabel


@dataclass(frozen=True)
class GridSpec:
    """Inclusive threshold ranges and step sizes for the search."""

    villous_min: float = 0.0
    villous_max: float = 1.0
    villous_step: float = 0.005
    ssa_min: float = 0.0
    ssa_max: float = 0.10
    ssa_step: float = 0.001

    def __post_init__(self) -> None:
        for axis in ("villous", "ssa"):
            lo = getattr(self, f"{axis}_min")
            hi = getattr(self, f"{axis}_max")
            step = getattr(self, f"{axis}_step")
            if step <= 0:
                raise ValueError(f"{axis}_step must be positive, got {step}")
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{axis} range [{lo}, {hi}] must be non-empty within [0, 1]")

    @staticmethod
    def _values(lo: float, hi: float, step: float) -> np.ndarray:
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(n), 9)

    def villous_values(self) -> np.ndarray:
        return self._values(self.villous_min, self.villous_max, self.villous_step)

    def ssa_values(self) -> np.ndarray:
        return self._values(self.ssa_min, self.ssa_max, self.ssa_step)


@dataclass(frozen=True)
class LabeledSummary:
    """A slide summary paired with its gold-standard diagnosis."""

    summary: SlideSummary
    gold: Diagnosis

    def to_json_dict(self) -> dict:
        record = self.summary.to_json_dict()
        record["gold"] = self.gold.value
        return record

    @classmethod
    def from_json_dict(cls, record: Mapping) -> "LabeledSummary":
        return cls(summary=SlideSummary.from_json_dict(record),
                   gold=Diagnosis(record["gold"]))


def mean_class_accuracy(pred: Sequence[Diagnosis], gold: Sequence[Diagnosis]) -> float:
    """Unweighted mean of the four one-vs-rest accuracies."""
    pred_arr = np.asarray([p.value for p in pred])
    gold_arr = np.asarray([g.value for g in gold])
    accs = [
        float(((pred_arr == d.value) == (gold_arr == d.value)).mean())
        for d in DIAGNOSES
    ]
    return float(np.mean(accs))


def grid_search(data: Sequence[LabeledSummary],
                grid: GridSpec = GridSpec()) -> tuple[ThresholdConfig, float]:
    """Find the grid point maximizing mean per-class accuracy.

    Returns the winning thresholds (confidence floor left at 0) and their
    score. Ties break to the lexicographically smallest (villous, ssa)
    pair. The result does not depend on dataset order.
    """
    if not data:
        raise EmptyDataset("grid_search requires at least one labeled summary")

    counts = np.array([
        [item.summary.counts[label] for label in
         (PolypLabel.TA, PolypLabel.TVA, PolypLabel.HP, PolypLabel.SSA)]
        for item in data
    ], dtype=np.int64)
    totals = counts.sum(axis=1)
    if np.any(totals == 0):
        bad = data[int(np.argmin(totals))].summary.slide_id
        raise NoTissue(f"labeled summary {bad!r} has no tissue patches")
    gold = np.array([DIAGNOSES.index(item.gold) for item in data])

    adeno = counts[:, 0] + counts[:, 1] >= counts[:, 2] + counts[:, 3]
    frac_tva = counts[:, 1] / totals
    frac_ssa = counts[:, 3] / totals

    v_values = grid.villous_values()
    s_values = grid.ssa_values()
    ta, tva, hp, ssa = range(len(DIAGNOSES))  # codes follow DIAGNOSES order

    # Predictions on adenomatous-branch slides depend only on the villous
    # threshold and serrated-branch ones only on the ssa threshold, so each
    # grid point's summed per-class correct count splits into a villous
    # part A[i] and an ssa part S[j]; the full matrix A[i]+S[j] still
    # scores every joint grid point exactly.
    gold_a, frac_a = gold[adeno], frac_tva[adeno]
    gold_s, frac_s = gold[~adeno], frac_ssa[~adeno]

    pred_a = np.where(frac_a[np.newaxis, :] > v_values[:, np.newaxis], tva, ta)
    pred_s = np.where(frac_s[np.newaxis, :] > s_values[:, np.newaxis], ssa, hp)

    def correct_counts(pred: np.ndarray, gold_part: np.ndarray) -> np.ndarray:
        per_class = [
            ((pred == d) == (gold_part == d)[np.newaxis, :]).sum(axis=1)
            for d in range(len(DIAGNOSES))
        ]
        return np.sum(per_class, axis=0)

    score_matrix = (correct_counts(pred_a, gold_a)[:, np.newaxis]
                    + correct_counts(pred_s, gold_s)[np.newaxis, :])
    best_flat = int(np.argmax(score_matrix))  # first max in row-major order
    best_v = float(v_values[best_flat // len(s_values)])
    best_s = float(s_values[best_flat % len(s_values)])

    thresholds = ThresholdConfig(villous_threshold=best_v, ssa_threshold=best_s)
    best_score = mean_class_accuracy(
        [diagnose(item.summary, thresholds) for item in data],
        [item.gold for item in data])
    return thresholds, best_score
