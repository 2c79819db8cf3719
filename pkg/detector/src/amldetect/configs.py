"""The nine model configurations under evaluation.

Hyperparameters are fixed (no search).  The gradient-boosted
"XGBoost" row runs on sklearn's histogram gradient booster with the
same values mapped onto its parameter names, since the xgboost wheel
is unavailable in this environment.  Distance- and gradient-based
models sit behind a standard scaler; tree models take raw features.
"""

from __future__ import annotations

from sklearn.ensemble import (
    GradientBoostingClassifier,
    HistGradientBoostingClassifier,
    RandomForestClassifier,
)
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeClassifier

MODEL_NAMES = [
    "KNN",
    "Random Forest",
    "Multilayer Perceptron",
    "Logistic Regression",
    "XGBoost",
    "Decision Tree",
    "Gradient Boost Classifier",
    "Naive Bayes",
    "Ensemble Voting Classifier",
]


def _scaled(model) -> Pipeline:
    return Pipeline([("scale", StandardScaler()), ("model", model)])


def build_models(random_state: int = 0) -> dict[str, object]:
    """Instantiate the eight base configurations (the ensemble is built
    from their fitted forms at evaluation time)."""
    return {
        "KNN": _scaled(
            KNeighborsClassifier(n_neighbors=7, weights="distance", p=1)
        ),
        "Random Forest": RandomForestClassifier(
            n_estimators=182,
            max_depth=31,
            min_samples_split=0.0033588450686818346,
            random_state=random_state,
        ),
        "Multilayer Perceptron": _scaled(
            MLPClassifier(
                activation="relu",
                learning_rate="adaptive",
                max_iter=84,
                alpha=0.0006892440801331624,
                early_stopping=False,
                solver="adam",
                random_state=random_state,
            )
        ),
        "Logistic Regression": _scaled(
            LogisticRegression(
                penalty="l2",
                C=58.54836598598276,
                intercept_scaling=0.026056129911108616,
                max_iter=1000,
                random_state=random_state,
            )
        ),
        # xgboost stand-in: histogram gradient boosting with the same
        # learning rate, round count, regularization and column fraction
        "XGBoost": HistGradientBoostingClassifier(
            learning_rate=0.030426797451043132,
            max_iter=157,
            l2_regularization=0.01887034997773913,
            max_features=0.6285193612006074,
            random_state=random_state,
        ),
        "Decision Tree": DecisionTreeClassifier(
            max_depth=94,
            min_samples_split=3,
            criterion="gini",
            random_state=random_state,
        ),
        "Gradient Boost Classifier": GradientBoostingClassifier(
            n_estimators=63, random_state=random_state
        ),
        "Naive Bayes": GaussianNB(var_smoothing=0.001),
    }
