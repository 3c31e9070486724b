from .features import FeatureConfig, FeatureModel, fit_features, tokenize, unigrams
from .model import (ClassifierModel, TrainConfig, TrainReport, evaluate,
                    load_model, loss_and_grad, predict, save_model, train)
from .predio import bulk_predict, export_predictions, import_predictions

__all__ = [
    "FeatureConfig", "FeatureModel", "fit_features", "tokenize", "unigrams",
    "ClassifierModel", "TrainConfig", "TrainReport", "train", "predict",
    "evaluate", "save_model", "load_model", "loss_and_grad",
    "bulk_predict", "export_predictions", "import_predictions",
]
