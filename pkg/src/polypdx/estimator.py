"""scikit-learn estimator wrapping the hierarchical diagnosis rule.

This adapter lets the slide-level algorithm compose with the wider
ecosystem (pipelines, cross-validation, cloning). Feature rows are the
per-class tissue-patch tallies produced by ``infer.summarize``; fitting
with a grid runs the same exhaustive calibration as
``calibrate.grid_search``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .calibrate import GridSpec, LabeledSummary, grid_search, mean_class_accuracy
from .infer import SlideSummary, ThresholdConfig, diagnose_counts
from .labels import Diagnosis, PolypLabel
from .validation import FEATURE_LABELS, check_count_matrix, check_diagnosis_array


class HierarchicalPolypClassifier(ClassifierMixin, BaseEstimator):
    """Slide-level polyp classifier over per-class patch tallies.

    Parameters
    ----------
    villous_threshold : float, default=0.30
        Tissue fraction of TVA patches above which an adenomatous slide
        is called TVA rather than TA (strict inequality).
    ssa_threshold : float, default=0.015
        Tissue fraction of SSA patches above which a serrated slide is
        called SSA rather than HP (strict inequality).
    grid : GridSpec or None, default=None
        When given, ``fit`` recalibrates both thresholds by exhaustive
        grid search on the training data; when None, ``fit`` freezes the
        constructor thresholds.

    Attributes
    ----------
    villous_threshold_ : float
        Threshold in effect after fitting.
    ssa_threshold_ : float
        Threshold in effect after fitting.
    best_score_ : float
        Mean per-class accuracy on the fit data (only when y was given).
    classes_ : ndarray of shape (4,)
        The four diagnosis labels.

    Examples
    --------
    >>> X = [[95, 5, 0, 0], [40, 60, 0, 0]]
    >>> clf = HierarchicalPolypClassifier()
    >>> clf.fit(X, ["TA", "TVA"]).predict(X).tolist()
    ['TA', 'TVA']
    """

    def __init__(self, villous_threshold: float = 0.30, ssa_threshold: float = 0.015,
                 grid: GridSpec | None = None) -> None:
        self.villous_threshold = villous_threshold
        self.ssa_threshold = ssa_threshold
        self.grid = grid

    def fit(self, X, y=None) -> "HierarchicalPolypClassifier":
        """Validate the data and set (or calibrate) the thresholds.

        y is required when ``grid`` is set, optional otherwise.
        """
        X = check_count_matrix(X)
        if y is not None:
            y = check_diagnosis_array(y, length=X.shape[0])
        if self.grid is not None:
            if y is None:
                raise ValueError("grid calibration requires y")
            if not np.allclose(X, np.rint(X)):
                raise ValueError("grid calibration requires integer patch counts")
            data = [
                LabeledSummary(summary=_row_summary(row), gold=Diagnosis(label))
                for row, label in zip(X, y)
            ]
            thresholds, score = grid_search(data, self.grid)
            self.villous_threshold_ = thresholds.villous_threshold
            self.ssa_threshold_ = thresholds.ssa_threshold
            self.best_score_ = score
        else:
            ThresholdConfig(self.villous_threshold, self.ssa_threshold)  # range check
            self.villous_threshold_ = self.villous_threshold
            self.ssa_threshold_ = self.ssa_threshold
            if y is not None:
                self.best_score_ = self.score(X, y)
        self.classes_ = np.asarray(sorted(FEATURE_LABELS), dtype=object)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        """Diagnose each row, returning label strings."""
        check_is_fitted(self, "villous_threshold_")
        X = check_count_matrix(X)
        thresholds = self.thresholds_
        return np.asarray(
            [diagnose_counts(ta, tva, hp, ssa, thresholds).value
             for ta, tva, hp, ssa in X],
            dtype=object)

    def score(self, X, y, sample_weight=None) -> float:
        """Mean per-class accuracy, the headline metric for this task.

        Note this differs from scikit-learn's default plain accuracy.
        """
        y = check_diagnosis_array(y)
        pred = self.predict(X)
        return mean_class_accuracy([Diagnosis(p) for p in pred], [Diagnosis(g) for g in y])

    @property
    def thresholds_(self) -> ThresholdConfig:
        check_is_fitted(self, "villous_threshold_")
        return ThresholdConfig(villous_threshold=self.villous_threshold_,
                               ssa_threshold=self.ssa_threshold_)


def _row_summary(row: np.ndarray) -> SlideSummary:
    counts = {
        PolypLabel.TA: int(row[0]),
        PolypLabel.TVA: int(row[1]),
        PolypLabel.HP: int(row[2]),
        PolypLabel.SSA: int(row[3]),
    }
    return SlideSummary(counts=counts)
