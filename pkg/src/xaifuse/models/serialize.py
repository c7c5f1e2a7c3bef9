"""JSON persistence for fitted models.

The encoder walks each model's attribute dict, tagging numpy arrays and
nested model objects; floats survive the round trip exactly because JSON
uses shortest-repr encoding. A format version in the envelope guards
against loading files written by an incompatible release.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .boosting import AdaBoost, GradientBoosting, _BinaryBooster
from .forest import RandomForest
from .knn import KnnClassifier
from .linear import LogisticRegression
from .mlp import MlpClassifier
from .svm import SvmRbf, _BinarySvm
from .tree import DecisionTree

FORMAT_VERSION = 1

_CLASSES = {
    cls.__name__: cls
    for cls in (
        DecisionTree,
        RandomForest,
        KnnClassifier,
        LogisticRegression,
        MlpClassifier,
        SvmRbf,
        AdaBoost,
        GradientBoosting,
        _BinarySvm,
        _BinaryBooster,
    )
}


def _encode(value):
    if isinstance(value, np.ndarray):
        return {
            "__nd__": True,
            "dtype": str(value.dtype),
            "shape": list(value.shape),
            "data": value.ravel().tolist(),
        }
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if type(value).__name__ in _CLASSES and type(value) is _CLASSES[type(value).__name__]:
        return {
            "__obj__": type(value).__name__,
            "state": {k: _encode(v) for k, v in vars(value).items()},
        }
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise TypeError(f"cannot serialize value of type {type(value).__name__}")


def _decode(value):
    if isinstance(value, dict):
        if value.get("__nd__"):
            arr = np.array(value["data"], dtype=value["dtype"])
            return arr.reshape(value["shape"])
        if "__obj__" in value:
            cls = _CLASSES[value["__obj__"]]
            obj = cls.__new__(cls)
            obj.__dict__.update({k: _decode(v) for k, v in value["state"].items()})
            return obj
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def save_model(model, path: str | Path) -> None:
    name = type(model).__name__
    if name not in _CLASSES:
        raise TypeError(f"unknown model type: {name}")
    envelope = {"format_version": FORMAT_VERSION, "model": _encode(model)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(envelope), encoding="utf-8")


def load_model(path: str | Path):
    envelope = json.loads(Path(path).read_text(encoding="utf-8"))
    version = envelope.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(
            f"model file format {version!r} not supported (expected {FORMAT_VERSION})"
        )
    return _decode(envelope["model"])
