"""From-scratch classifiers: KNN, random forest, neural network and SVC."""

from .forest import DecisionTree, RandomForest, best_split, gini
from .knn import KNNClassifier
from .model import (ConfusionCounts, MajorityClassifier, TrainedModel, confusion,
                    confusion_from_predictions, load_model, model_from_dict,
                    model_to_dict, predict, predict_many, save_model, train)
from .nn import NeuralNet, loss_and_grads
from .specs import (ForestSpec, KNNSpec, ModelSpec, NeuralNetSpec, SVCSpec,
                    default_grid, parse_spec, spec_from_dict, spec_label,
                    spec_to_dict)
from .svc import SVC

__all__ = [
    "ConfusionCounts", "DecisionTree", "ForestSpec", "KNNClassifier", "KNNSpec",
    "MajorityClassifier", "ModelSpec", "NeuralNet", "NeuralNetSpec", "RandomForest",
    "SVC", "SVCSpec", "TrainedModel", "best_split", "confusion",
    "confusion_from_predictions", "default_grid", "gini", "load_model",
    "loss_and_grads", "model_from_dict", "model_to_dict", "parse_spec", "predict",
    "predict_many", "save_model", "spec_from_dict", "spec_label", "spec_to_dict", "train",
]
