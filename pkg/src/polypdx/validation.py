"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import NoTissue
from .labels import DIAGNOSES, Diagnosis

# Feature column order expected by the estimator.
FEATURE_LABELS = tuple(d.value for d in DIAGNOSES)


def check_count_matrix(X, require_tissue: bool = True) -> np.ndarray:
    """Validate an (n_slides, 4) matrix of per-class patch tallies.

    Columns follow ``FEATURE_LABELS`` (TA, TVA, HP, SSA); entries may be
    raw counts or fractions but must be finite and non-negative. Rows
    that sum to zero have no tissue to diagnose.
    """
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != len(FEATURE_LABELS):
        raise ValueError(
            f"expected {len(FEATURE_LABELS)} columns ordered {FEATURE_LABELS}, got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("patch tallies must be non-negative")
    if require_tissue and np.any(X.sum(axis=1) <= 0):
        row = int(np.argmin(X.sum(axis=1)))
        raise NoTissue(f"row {row} has no tissue patches (all-zero tallies)")
    return X


def check_diagnosis_array(y, length: int | None = None) -> np.ndarray:
    """Validate a vector of diagnosis labels, returned as strings."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"expected a 1-d label vector, got shape {y.shape}")
    if length is not None and y.shape[0] != length:
        raise ValueError(f"X has {length} rows but y has {y.shape[0]} labels")
    values = np.asarray([str(v) for v in y], dtype=object)
    valid = {d.value for d in Diagnosis}
    bad = [v for v in values if v not in valid]
    if bad:
        raise ValueError(f"unknown diagnosis labels {sorted(set(bad))}; expected {sorted(valid)}")
    return values
