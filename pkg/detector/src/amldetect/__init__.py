"""Detection harness for simulator-exported feature matrices."""

__version__ = "0.1.0"

from .configs import MODEL_NAMES, build_models
from .harness import MetricsRow, load_matrix, train_eval
from .importance import feature_importance

__all__ = [
    "MODEL_NAMES",
    "MetricsRow",
    "build_models",
    "feature_importance",
    "load_matrix",
    "train_eval",
]
