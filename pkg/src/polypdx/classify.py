"""Patch classification: backend contract, synthetic oracle, ensembling.

A backend maps one square RGB patch to a probability vector over the five
patch labels, ordered per ``labels.LABEL_ORDER``. ``predict`` wraps any
backend with input/output contract checks; ``classify_slide`` runs a
backend over every tissue window of a slide with deterministic output
regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import BackendFailure, BadPatchShape, EmptyEnsemble
from .labels import LABEL_COLORS, LABEL_ORDER, PolypLabel
from .wsi import (
    PatchWindow,
    SlideRaster,
    TilingConfig,
    grid_shape,
    iter_window_rows,
    tissue_fraction,
)

PROB_SUM_TOL = 1e-6

_REFERENCE_COLOR_MATRIX = np.array(
    [LABEL_COLORS[label] for label in LABEL_ORDER], dtype=np.float64)


@runtime_checkable
class PatchBackend(Protocol):
    """Anything that turns patch pixels into five class probabilities."""

    def predict_probs(self, patch: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class PatchPrediction:
    """One window's coordinates plus its class probability vector."""

    window: PatchWindow
    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def argmax_label(self) -> PolypLabel:
        return LABEL_ORDER[int(np.argmax(self.probs))]

    @property
    def max_prob(self) -> float:
        return float(self.probs.max())

    def to_json_dict(self) -> dict:
        return {
            "x": self.window.x,
            "y": self.window.y,
            "side_px": self.window.side_px,
            "probs": {label.value: float(p) for label, p in zip(LABEL_ORDER, self.probs)},
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> "PatchPrediction":
        window = PatchWindow(x=record["x"], y=record["y"], side_px=record["side_px"])
        probs = np.array([record["probs"][label.value] for label in LABEL_ORDER])
        return cls(window, probs)


def check_patch(patch: np.ndarray, side_px: int | None = None) -> np.ndarray:
    """Validate a square RGB uint8 patch, optionally of an exact side."""
    patch = np.asarray(patch)
    if patch.ndim != 3 or patch.shape[2] != 3 or patch.shape[0] != patch.shape[1]:
        raise BadPatchShape(f"expected a square (S, S, 3) patch, got shape {patch.shape}")
    if patch.dtype != np.uint8:
        raise BadPatchShape(f"expected uint8 pixels, got {patch.dtype}")
    if side_px is not None and patch.shape[0] != side_px:
        raise BadPatchShape(f"expected side {side_px}, got {patch.shape[0]}")
    return patch


def check_prob_vector(probs: np.ndarray, origin: str = "backend") -> np.ndarray:
    """Validate arity, range, and normalization of a backend output."""
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if probs.shape != (len(LABEL_ORDER),):
        raise BackendFailure(f"{origin} returned {probs.size} values, expected {len(LABEL_ORDER)}")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or np.any(probs > 1):
        raise BackendFailure(f"{origin} returned probabilities outside [0, 1]: {probs}")
    if abs(float(probs.sum()) - 1.0) > PROB_SUM_TOL:
        raise BackendFailure(f"{origin} probabilities sum to {probs.sum()!r}, expected 1")
    return probs


class SyntheticColorOracle:
    """Deterministic test backend keyed on the reference palette.

    The mean patch color is matched to the nearest reference color in RGB
    Euclidean distance (ties break in label order); the winner gets 0.9
    probability mass and every other label 0.025.
    """

    winner_mass = 0.9

    def predict_probs(self, patch: np.ndarray) -> np.ndarray:
        mean_color = np.asarray(patch, dtype=np.float64).reshape(-1, 3).mean(axis=0)
        distances = np.linalg.norm(_REFERENCE_COLOR_MATRIX - mean_color, axis=1)
        winner = int(np.argmin(distances))
        loser_mass = (1.0 - self.winner_mass) / (len(LABEL_ORDER) - 1)
        probs = np.full(len(LABEL_ORDER), loser_mass)
        probs[winner] = self.winner_mass
        return probs


def predict(backend: PatchBackend, patch: np.ndarray,
            side_px: int | None = None) -> np.ndarray:
    """Run one backend on one patch with full contract checking."""
    patch = check_patch(patch, side_px)
    try:
        probs = backend.predict_probs(patch)
    except BackendFailure:
        raise
    except Exception as exc:
        raise BackendFailure(f"backend {type(backend).__name__} failed: {exc}") from exc
    return check_prob_vector(probs, origin=type(backend).__name__)


def ensemble_predict(backends: Sequence[PatchBackend], patch: np.ndarray,
                     side_px: int | None = None) -> np.ndarray:
    """Mean of the member probability vectors, renormalized."""
    if not backends:
        raise EmptyEnsemble("ensemble_predict requires at least one backend")
    stacked = np.stack([predict(b, patch, side_px) for b in backends])
    mean = stacked.mean(axis=0)
    return mean / mean.sum()


class EnsembleBackend:
    """Backend averaging a fixed list of member backends."""

    def __init__(self, backends: Sequence[PatchBackend]) -> None:
        if not backends:
            raise EmptyEnsemble("an ensemble needs at least one member backend")
        self.backends = tuple(backends)

    def predict_probs(self, patch: np.ndarray) -> np.ndarray:
        return ensemble_predict(self.backends, patch)


def _worker_backend(backend: PatchBackend) -> PatchBackend:
    # Backends that cannot be shared across workers expose for_worker();
    # everything else (the oracle, ONNX sessions) is safe to share.
    fork = getattr(backend, "for_worker", None)
    return fork() if callable(fork) else backend


def classify_slide(slide: SlideRaster, cfg: TilingConfig, backend: PatchBackend,
                   workers: int = 1) -> list[PatchPrediction]:
    """Classify every tissue window of a slide.

    Non-tissue windows are skipped. The result is sorted by (y, x) and is
    byte-identical for any worker count; batching and scheduling are
    internal details with no observable effect.
    """

    def run_rows(row_range: range) -> list[PatchPrediction]:
        worker = _worker_backend(backend)
        out = []
        for window, pixels in iter_window_rows(slide, cfg, row_range):
            if tissue_fraction(pixels, cfg) >= cfg.min_tissue_fraction:
                out.append(PatchPrediction(window, predict(worker, pixels, cfg.side_px)))
        return out

    _, rows = grid_shape(slide.width_px, slide.height_px, cfg.side_px, cfg.stride_px)
    workers = max(1, min(workers, rows))
    if workers == 1:
        predictions = run_rows(range(rows))
    else:
        bounds = np.linspace(0, rows, workers + 1, dtype=int)
        bands = [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a != b]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_rows, bands))
        predictions = [pred for chunk in chunks for pred in chunk]
    predictions.sort(key=lambda p: (p.window.y, p.window.x))
    return predictions
