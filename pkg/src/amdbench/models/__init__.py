"""Model zoo behind a uniform train/predict contract."""

from .classical import KNN, KernelSVM, LinearSVM, RandomForest, SingleClassError
from .neural import (
    AEClassifier,
    AttentionMLP,
    CNNClassifier,
    GNNClassifier,
    LSTMClassifier,
    MultimodalMLP,
    NeuralModel,
    ShapeMismatchError,
    SubstituteMLP,
)
from .spec import (
    AEClassifierSpec,
    AttentionMLPSpec,
    CNNSpec,
    GNNSpec,
    KNNSpec,
    KernelSVMSpec,
    LSTMSpec,
    LinearSVMSpec,
    ModelSpec,
    MultimodalMLPSpec,
    RandomForestSpec,
    SubstituteMLPSpec,
    TrainConfig,
)
from .train import (
    NotApplicableError,
    build_model,
    finite_difference_check,
    fit,
    load_checkpoint,
    predict_labels,
    predict_scores,
    save_checkpoint,
    write_training_log,
)

__all__ = [
    "AEClassifier",
    "AEClassifierSpec",
    "AttentionMLP",
    "AttentionMLPSpec",
    "CNNClassifier",
    "CNNSpec",
    "GNNClassifier",
    "GNNSpec",
    "KNN",
    "KNNSpec",
    "KernelSVM",
    "KernelSVMSpec",
    "LSTMClassifier",
    "LSTMSpec",
    "LinearSVM",
    "LinearSVMSpec",
    "ModelSpec",
    "MultimodalMLP",
    "MultimodalMLPSpec",
    "NeuralModel",
    "NotApplicableError",
    "RandomForest",
    "RandomForestSpec",
    "ShapeMismatchError",
    "SingleClassError",
    "SubstituteMLP",
    "SubstituteMLPSpec",
    "TrainConfig",
    "build_model",
    "finite_difference_check",
    "fit",
    "load_checkpoint",
    "predict_labels",
    "predict_scores",
    "save_checkpoint",
    "write_training_log",
]
