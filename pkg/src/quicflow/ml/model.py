"""Training entry point, trained-model container, confusion counts and JSON
persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DegenerateDataset, DimensionMismatch, NonFinite
from ..flowcore import TrafficClass
from .forest import RandomForest
from .knn import KNNClassifier
from .nn import NeuralNet
from .specs import (ForestSpec, KNNSpec, ModelSpec, NeuralNetSpec, SVCSpec,
                    spec_from_dict, spec_to_dict)
from .svc import SVC

MODEL_FORMAT = "quicflow-model"
MODEL_VERSION = 1


class MajorityClassifier:
    """Fallback used when every feature column has been removed."""

    def __init__(self, label: int = 0):
        self.label = label

    def fit(self, X, y, n_classes, rng=None):
        counts = np.bincount(y, minlength=n_classes)
        self.label = int(np.argmax(counts))
        return self

    def predict(self, X) -> np.ndarray:
        return np.full(len(X), self.label, dtype=np.int64)

    def get_params(self) -> dict:
        return {"label": self.label}

    @classmethod
    def from_params(cls, params):
        return cls(params["label"])


_ESTIMATORS = {
    "knn": KNNClassifier,
    "rf": RandomForest,
    "nn": NeuralNet,
    "svc": SVC,
    "majority": MajorityClassifier,
}


def _build(spec: ModelSpec):
    if isinstance(spec, KNNSpec):
        return KNNClassifier(spec.k)
    if isinstance(spec, ForestSpec):
        return RandomForest(spec.n_trees, spec.max_depth, spec.max_leaves,
                            spec.features_per_split, spec.bootstrap)
    if isinstance(spec, NeuralNetSpec):
        return NeuralNet(spec.hidden_layers, spec.epochs, spec.learning_rate, spec.batch_size)
    if isinstance(spec, SVCSpec):
        return SVC(spec.kernel, spec.gamma, spec.c, spec.max_iter, spec.tol)
    raise TypeError(f"not a model spec: {spec!r}")


@dataclass
class TrainedModel:
    spec: ModelSpec
    estimator: object
    n_features: int
    seed: Optional[int] = None
    # pipeline context needed to featurise new data the same way
    meta: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return "majority" if isinstance(self.estimator, MajorityClassifier) else self.spec.family

    def predict_indices(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.estimator.predict(X)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def train(spec: ModelSpec, X, y, seed: Optional[int] = 0, meta: Optional[dict] = None) -> TrainedModel:
    """Fit one classifier.  ``y`` holds TrafficClass indices."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be (n_samples, n_features) matching y")
    if not np.all(np.isfinite(X)):
        raise NonFinite("training data contains NaN or infinite values")
    if np.unique(y).size < 2:
        raise DegenerateDataset("training data holds a single class")
    if len(y) < 4:
        raise DegenerateDataset("need at least 4 training samples")
    n_classes = max(len(TrafficClass), int(y.max()) + 1)
    rng = np.random.default_rng(seed)
    estimator = MajorityClassifier() if X.shape[1] == 0 else _build(spec)
    estimator.fit(X, y, n_classes, rng)
    return TrainedModel(spec, estimator, X.shape[1], seed, dict(meta or {}))


def predict(model: TrainedModel, sample) -> TrafficClass:
    idx = model.predict_indices(np.asarray(sample, dtype=float).reshape(1, -1))[0]
    return list(TrafficClass)[int(idx)]


def predict_many(model: TrainedModel, X) -> np.ndarray:
    return model.predict_indices(X)


def confusion_from_predictions(pred, truth, positive) -> ConfusionCounts:
    positive = TrafficClass.parse(positive).index if not isinstance(positive, (int, np.integer)) else int(positive)
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pos_pred, pos_true = pred == positive, truth == positive
    return ConfusionCounts(
        tp=int(np.count_nonzero(pos_pred & pos_true)),
        tn=int(np.count_nonzero(~pos_pred & ~pos_true)),
        fp=int(np.count_nonzero(pos_pred & ~pos_true)),
        fn=int(np.count_nonzero(~pos_pred & pos_true)),
    )


def confusion(model: TrainedModel, X, y, positive) -> ConfusionCounts:
    """Binary confusion counts treating ``positive`` as the positive class;
    every other class counts as negative."""
    return confusion_from_predictions(model.predict_indices(X), y, positive)


# ----------------------------------------------------------------- storage

def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": spec_to_dict(model.spec),
        "estimator": model.family,
        "n_features": model.n_features,
        "seed": model.seed,
        "meta": model.meta,
        "params": model.estimator.get_params(),
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a quicflow model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    estimator = _ESTIMATORS[doc["estimator"]].from_params(doc["params"])
    return TrainedModel(spec_from_dict(doc["spec"]), estimator, doc["n_features"],
                        doc.get("seed"), doc.get("meta", {}))


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
