"""Neural patch backend loading networks in ONNX interchange format.

Input contract: a 1x3xSxS float32 tensor, RGB channel order, pixel values
scaled to [0, 1] and then normalized per channel with mean/std constants
read from the model's sidecar JSON (``<model>.json`` next to the file).
Output contract: five logits, softmaxed here. Models should be exported
at opset 17; executing them requires the optional ``onnxruntime`` extra.

Sidecar JSON fields::

    {
      "mean": [0.485, 0.456, 0.406],   # required, RGB, [0, 1] scale
      "std":  [0.229, 0.224, 0.225],   # required, RGB, all > 0
      "input_name": "input"            # optional, defaults to the model's
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import BackendFailure

N_CLASSES = 5


def _default_session_factory(model_path: Path):
    try:
        import onnxruntime
    except ImportError as exc:
        raise BackendFailure(
            "onnxruntime is not installed; install the 'onnx' extra to use neural backends"
        ) from exc
    try:
        return onnxruntime.InferenceSession(str(model_path), providers=["CPUExecutionProvider"])
    except Exception as exc:
        raise BackendFailure(f"could not load ONNX model {model_path}: {exc}") from exc


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def load_sidecar(model_path: Path) -> dict:
    sidecar_path = model_path.with_suffix(".json")
    if not sidecar_path.exists():
        raise BackendFailure(f"missing sidecar {sidecar_path} for model {model_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BackendFailure(f"invalid sidecar JSON {sidecar_path}: {exc}") from exc
    for key in ("mean", "std"):
        values = sidecar.get(key)
        if not isinstance(values, list) or len(values) != 3:
            raise BackendFailure(f"sidecar {sidecar_path} needs a 3-element {key!r} list")
    if any(s <= 0 for s in sidecar["std"]):
        raise BackendFailure(f"sidecar {sidecar_path} std values must be positive")
    return sidecar


class OnnxBackend:
    """Classify patches with a serialized network.

    ``session_factory`` exists so tests can exercise the tensor contract
    without onnxruntime; production code never passes it.
    """

    def __init__(self, model_path: str | Path,
                 session_factory: Callable[[Path], object] | None = None) -> None:
        self.model_path = Path(model_path)
        sidecar = load_sidecar(self.model_path)
        self._mean = np.asarray(sidecar["mean"], dtype=np.float32).reshape(3, 1, 1)
        self._std = np.asarray(sidecar["std"], dtype=np.float32).reshape(3, 1, 1)
        factory = session_factory or _default_session_factory
        self._session = factory(self.model_path)
        self._input_name = sidecar.get("input_name") or self._model_input_name()

    def _model_input_name(self) -> str:
        try:
            inputs = self._session.get_inputs()
            return inputs[0].name
        except Exception as exc:
            raise BackendFailure(f"could not read input name from {self.model_path}: {exc}") from exc

    def preprocess(self, patch: np.ndarray) -> np.ndarray:
        """uint8 HWC patch -> normalized 1x3xSxS float32 tensor."""
        chw = np.asarray(patch, dtype=np.float32).transpose(2, 0, 1) / 255.0
        return ((chw - self._mean) / self._std)[np.newaxis]

    def predict_probs(self, patch: np.ndarray) -> np.ndarray:
        tensor = self.preprocess(patch)
        try:
            outputs = self._session.run(None, {self._input_name: tensor})
        except Exception as exc:
            raise BackendFailure(f"inference failed for {self.model_path}: {exc}") from exc
        logits = np.asarray(outputs[0], dtype=np.float64).reshape(-1)
        if logits.size != N_CLASSES:
            raise BackendFailure(
                f"model {self.model_path} produced {logits.size} outputs, expected {N_CLASSES}")
        return softmax(logits)
