"""Evaluation statistics: gold standards, diagnostic metrics, agreement.

Conventions match the published analysis this pipeline reproduces:

* per-class metrics are one-vs-rest over the four diagnoses, with
  sensitivity TP/(TP+FN), specificity TN/(TN+FP), accuracy (TP+TN)/n;
* the headline "mean accuracy" is the unweighted mean of the four
  per-class accuracies;
* confidence intervals are Wald normal approximations p +/- 1.96*SE;
* proportion comparisons use the pooled two-proportion z test, two-tailed;
* inter-rater agreement is multi-class Cohen's kappa, averaged over the
  ten pairs of a five-rater panel with a normal-approximation CI.

Metrics whose denominator is zero are reported as absent (None), never 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .display import percent
from .errors import BadProportion, LengthMismatch, WrongArity, WrongPanelSize
from .labels import DIAGNOSES, Diagnosis

Z_95 = 1.96
PANEL_SIZE = 5

_STD_NORMAL = NormalDist()


def majority_vote(votes: Sequence[Diagnosis]) -> Diagnosis | None:
    """Gold-standard label from a five-rater panel.

    Returns the diagnosis with at least three votes, or None when the top
    count is two (an unresolvable 2-2-1 split).
    """
    if len(votes) != PANEL_SIZE:
        raise WrongPanelSize(f"expected {PANEL_SIZE} votes, got {len(votes)}")
    tally: dict[Diagnosis, int] = {}
    for vote in votes:
        tally[Diagnosis(vote)] = tally.get(Diagnosis(vote), 0) + 1
    winner, top = max(tally.items(), key=lambda item: item[1])
    return winner if top >= 3 else None


def _check_paired(pred: Sequence, gold: Sequence) -> tuple[list[Diagnosis], list[Diagnosis]]:
    if len(pred) != len(gold):
        raise LengthMismatch(f"pred has {len(pred)} labels but gold has {len(gold)}")
    if len(pred) == 0:
        raise LengthMismatch("label sequences must be non-empty")
    return [Diagnosis(v) for v in pred], [Diagnosis(v) for v in gold]


@dataclass(frozen=True)
class ClassMetrics:
    """One-vs-rest counts and rates for a single diagnosis."""

    label: Diagnosis
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def sensitivity(self) -> float | None:
        positives = self.tp + self.fn
        return self.tp / positives if positives else None

    @property
    def specificity(self) -> float | None:
        negatives = self.tn + self.fp
        return self.tn / negatives if negatives else None

    def to_json_dict(self) -> dict:
        return {
            "label": self.label.value,
            "tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
        }


def per_class_metrics(pred: Sequence[Diagnosis], gold: Sequence[Diagnosis],
                      label: Diagnosis) -> ClassMetrics:
    """One-vs-rest metrics for ``label`` on paired label sequences."""
    pred, gold = _check_paired(pred, gold)
    label = Diagnosis(label)
    tp = sum(1 for p, g in zip(pred, gold) if p == label and g == label)
    fn = sum(1 for p, g in zip(pred, gold) if p != label and g == label)
    fp = sum(1 for p, g in zip(pred, gold) if p == label and g != label)
    tn = len(pred) - tp - fn - fp
    return ClassMetrics(label=label, tp=tp, fn=fn, fp=fp, tn=tn)


def mean_accuracy(per_class: Sequence[ClassMetrics]) -> float:
    """Unweighted mean of the four per-class accuracies."""
    if len(per_class) != len(DIAGNOSES):
        raise WrongArity(f"expected {len(DIAGNOSES)} per-class entries, got {len(per_class)}")
    return sum(m.accuracy for m in per_class) / len(per_class)


def _check_proportion(p: float, n: int) -> None:
    if not 0.0 <= p <= 1.0:
        raise BadProportion(f"proportion must be in [0, 1], got {p}")
    if n < 1:
        raise BadProportion(f"sample size must be >= 1, got {n}")


def wald_ci(p: float, n: int) -> tuple[float, float]:
    """95% Wald interval p +/- 1.96*sqrt(p*(1-p)/n), clamped to [0, 1]."""
    _check_proportion(p, n)
    half_width = Z_95 * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half_width), min(1.0, p + half_width)


def two_proportion_test(p1: float, n1: int, p2: float, n2: int) -> float:
    """Two-tailed p-value of the pooled two-proportion z test."""
    _check_proportion(p1, n1)
    _check_proportion(p2, n2)
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 1.0
    z = (p1 - p2) / se
    return 2.0 * _STD_NORMAL.cdf(-abs(z))


def cohens_kappa(a: Sequence[Diagnosis], b: Sequence[Diagnosis]) -> float:
    """Chance-corrected agreement between two raters.

    kappa = (p_o - p_e) / (1 - p_e) with expected agreement from the
    product of the raters' marginal distributions. When both raters are
    constant on the same category (p_e = 1), agreement is perfect and 1
    is returned.
    """
    a, b = _check_paired(a, b)
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    expected = sum(
        (sum(1 for x in a if x == d) / n) * (sum(1 for y in b if y == d) / n)
        for d in DIAGNOSES
    )
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class KappaStat:
    """Pairwise kappas for a rater panel with their mean and 95% CI."""

    pairwise: Mapping[tuple[int, int], float]
    mean: float
    ci_low: float
    ci_high: float

    def to_json_dict(self) -> dict:
        return {
            "pairwise": {f"{i}-{j}": k for (i, j), k in sorted(self.pairwise.items())},
            "mean": self.mean,
            "ci": [self.ci_low, self.ci_high],
        }


@dataclass(frozen=True)
class RaterPanel:
    """Per-slide diagnoses from five raters, plus optional local calls."""

    slide_ids: tuple[str, ...]
    rater_dx: tuple[tuple[Diagnosis, ...], ...]  # one 5-tuple per slide
    local_dx: tuple[Diagnosis, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.rater_dx) != len(self.slide_ids):
            raise LengthMismatch(
                f"{len(self.slide_ids)} slide ids but {len(self.rater_dx)} vote rows")
        for slide_id, votes in zip(self.slide_ids, self.rater_dx):
            if len(votes) != PANEL_SIZE:
                raise WrongPanelSize(
                    f"slide {slide_id!r} has {len(votes)} rater votes, expected {PANEL_SIZE}")
        if self.local_dx is not None and len(self.local_dx) != len(self.slide_ids):
            raise LengthMismatch("local_dx length does not match slide_ids")

    def rater_column(self, k: int) -> list[Diagnosis]:
        return [votes[k] for votes in self.rater_dx]

    def gold_standard(self) -> list[Diagnosis | None]:
        return [majority_vote(votes) for votes in self.rater_dx]


def panel_kappa(panel: RaterPanel) -> KappaStat:
    """Average pairwise kappa over the ten rater pairs of a panel.

    The CI is mean +/- 1.96 * sd / sqrt(10), with the sample standard
    deviation taken over the ten pairwise values.
    """
    if len(panel.slide_ids) < 2:
        raise LengthMismatch("panel kappa needs at least two slides")
    pairwise = {
        (i, j): cohens_kappa(panel.rater_column(i), panel.rater_column(j))
        for i, j in combinations(range(PANEL_SIZE), 2)
    }
    values = np.array(list(pairwise.values()))
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    half_width = Z_95 * sd / math.sqrt(len(values))
    return KappaStat(pairwise=pairwise, mean=mean,
                     ci_low=mean - half_width, ci_high=mean + half_width)


@dataclass(frozen=True)
class ConfusionMatrix:
    """4x4 counts with gold labels on rows and predictions on columns."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def row_percentages(self) -> dict[Diagnosis, dict[Diagnosis, float] | None]:
        """Rows as one-decimal percentages; empty gold rows are absent."""
        out: dict[Diagnosis, dict[Diagnosis, float] | None] = {}
        for i, gold_label in enumerate(DIAGNOSES):
            row_total = int(self.counts[i].sum())
            if row_total == 0:
                out[gold_label] = None
            else:
                out[gold_label] = {
                    pred_label: percent(self.counts[i, j] / row_total)
                    for j, pred_label in enumerate(DIAGNOSES)
                }
        return out

    def to_json_dict(self) -> dict:
        percents = self.row_percentages()
        return {
            "labels": [d.value for d in DIAGNOSES],
            "counts": self.counts.tolist(),
            "row_percentages": {
                g.value: None if row is None else {p.value: v for p, v in row.items()}
                for g, row in percents.items()
            },
        }


def confusion_matrix(pred: Sequence[Diagnosis], gold: Sequence[Diagnosis]) -> ConfusionMatrix:
    """Tally gold-vs-predicted counts over the four diagnoses."""
    pred, gold = _check_paired(pred, gold)
    index = {d: i for i, d in enumerate(DIAGNOSES)}
    counts = np.zeros((len(DIAGNOSES), len(DIAGNOSES)), dtype=np.int64)
    for p, g in zip(pred, gold):
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(counts=counts)


def _mean_or_none(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def comparison_block(pred: Sequence[Diagnosis], gold: Sequence[Diagnosis]) -> dict:
    """Per-class and mean metrics with CIs for one comparator vs gold."""
    per_class = [per_class_metrics(pred, gold, d) for d in DIAGNOSES]
    n = len(gold)
    mean_acc = mean_accuracy(per_class)
    mean_sens = _mean_or_none([m.sensitivity for m in per_class])
    mean_spec = _mean_or_none([m.specificity for m in per_class])
    per_class_json = []
    for m in per_class:
        record = m.to_json_dict()
        record["accuracy_ci"] = list(wald_ci(m.accuracy, n))
        per_class_json.append(record)
    return {
        "n": n,
        "per_class": per_class_json,
        "mean": {
            "accuracy": mean_acc,
            "accuracy_ci": list(wald_ci(mean_acc, n)),
            "accuracy_percent": percent(mean_acc),
            "sensitivity": mean_sens,
            "specificity": mean_spec,
        },
        "confusion_matrix": confusion_matrix(pred, gold).to_json_dict(),
    }


def proportion_test_block(block_a: dict, block_b: dict) -> dict:
    """Two-tailed p-values comparing the mean rows of two comparators."""
    out = {}
    for key in ("accuracy", "sensitivity", "specificity"):
        pa, pb = block_a["mean"][key], block_b["mean"][key]
        if pa is None or pb is None:
            out[key] = None
        else:
            out[key] = two_proportion_test(pa, block_a["n"], pb, block_b["n"])
    return out


def evaluation_report(model_dx: Mapping[str, Diagnosis], panel: RaterPanel) -> dict:
    """Full evaluation of model (and local) diagnoses against panel gold.

    Slides with an unresolved majority vote are excluded from the metric
    computations and listed in the report. Model entries are matched to
    panel slides by slide id.
    """
    gold_by_slide = dict(zip(panel.slide_ids, panel.gold_standard()))
    excluded = [sid for sid, g in gold_by_slide.items() if g is None]
    missing = [sid for sid in panel.slide_ids if sid not in model_dx]

    evaluated = [sid for sid in panel.slide_ids
                 if gold_by_slide[sid] is not None and sid in model_dx]
    gold = [gold_by_slide[sid] for sid in evaluated]
    model = [Diagnosis(model_dx[sid]) for sid in evaluated]

    report: dict = {
        "n_evaluated": len(evaluated),
        "excluded_slides": excluded,
        "missing_predictions": missing,
        "kappa": panel_kappa(panel).to_json_dict(),
        "model": comparison_block(model, gold) if evaluated else None,
    }
    if panel.local_dx is not None:
        local_by_slide = dict(zip(panel.slide_ids, panel.local_dx))
        local = [Diagnosis(local_by_slide[sid]) for sid in evaluated]
        report["local"] = comparison_block(local, gold) if evaluated else None
        if evaluated:
            report["model_vs_local_p"] = proportion_test_block(report["model"], report["local"])
    return report
