"""The five fraud detection classifiers behind one train/predict surface."""
from __future__ import annotations

import json

import numpy as np

from ..data import Dataset, Transaction
from ..errors import InputError, ParameterError, TrainingError
from .base import (
    CONTROL_KINDS,
    THRESHOLD,
    ClassifierSpec,
    Kind,
    Penalty,
    Prediction,
    Standardizer,
    TrainedModel,
    as_matrix,
)
from .bayes import GaussianNBModel, gaussian_density
from .forest import ForestModel, Tree, grow_tree
from .knn import KNNModel
from .linear import LinearModel, fit_linear, objective, smooth_loss

_MODELS = {
    Kind.LOG: LinearModel,
    Kind.SVC: LinearModel,
    Kind.RF: ForestModel,
    Kind.GNB: GaussianNBModel,
    Kind.KNN: KNNModel,
}

__all__ = [
    "CONTROL_KINDS",
    "ClassifierSpec",
    "ForestModel",
    "GaussianNBModel",
    "KNNModel",
    "Kind",
    "LinearModel",
    "Penalty",
    "Prediction",
    "Standardizer",
    "THRESHOLD",
    "TrainedModel",
    "Tree",
    "fit_linear",
    "gaussian_density",
    "grow_tree",
    "model_from_dict",
    "model_from_json",
    "model_to_json",
    "objective",
    "predict",
    "predict_batch",
    "predict_scores",
    "smooth_loss",
    "train",
]


def train(spec: ClassifierSpec, sample) -> TrainedModel:
    """Fit the classifier described by ``spec`` on a Sample or Dataset."""
    data = getattr(sample, "records", sample)
    if not isinstance(data, Dataset):
        data = Dataset.from_records(data)
    y = data.label
    if y.all() or not y.any():
        raise TrainingError(f"training sample for {spec.label} contains a single class")
    return _MODELS[spec.kind].fit(spec, data.features, y)


def predict_scores(model: TrainedModel, records) -> np.ndarray:
    return np.clip(model.scores(as_matrix(records)), 0.0, 1.0)


def predict(model: TrainedModel, record: Transaction) -> Prediction:
    return Prediction(float(predict_scores(model, [record])[0]))


def predict_batch(model: TrainedModel, records) -> list[Prediction]:
    return [Prediction(float(s)) for s in predict_scores(model, records)]


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format") != "fraudbench-model":
        raise InputError("not a fraudbench model document")
    if doc.get("version") != 1:
        raise ParameterError(f"unsupported model format version {doc.get('version')!r}")
    spec = ClassifierSpec(**doc["spec"])
    return _MODELS[spec.kind]._from_params(spec, doc["params"])


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))
