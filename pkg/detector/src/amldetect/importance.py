"""Feature importance via three measures, rank-averaged into one list.

Measures: information gain (mutual information with the label), feature
shuffling (permutation importance of the strongest base model), and
feature performance (accuracy of a depth-limited tree on each feature
alone).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from sklearn.feature_selection import mutual_info_classif
from sklearn.inspection import permutation_importance
from sklearn.model_selection import train_test_split
from sklearn.tree import DecisionTreeClassifier


def _subsample(X, y, cap, seed):
    if len(y) <= cap:
        return X, y
    idx = np.random.default_rng(seed).permutation(len(y))[:cap]
    return X[idx], y[idx]


def information_gain(X, y, seed=0, cap=20000) -> np.ndarray:
    Xs, ys = _subsample(X, y, cap, seed)
    return mutual_info_classif(Xs, ys, random_state=seed)


def shuffling_importance(model, X, y, seed=0, cap=8000, n_repeats=3) -> np.ndarray:
    Xs, ys = _subsample(X, y, cap, seed)
    result = permutation_importance(
        model, Xs, ys, n_repeats=n_repeats, random_state=seed, scoring="accuracy"
    )
    return result.importances_mean


def single_feature_performance(X, y, seed=0, cap=12000) -> np.ndarray:
    """Balanced-class accuracy of a shallow tree per lone feature."""
    Xs, ys = _subsample(X, y, cap, seed)
    X_tr, X_te, y_tr, y_te = train_test_split(
        Xs, ys, test_size=0.3, stratify=ys, random_state=seed
    )
    scores = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        tree = DecisionTreeClassifier(max_depth=3, random_state=seed)
        tree.fit(X_tr[:, j : j + 1], y_tr)
        scores[j] = tree.score(X_te[:, j : j + 1], y_te)
    return scores


def feature_importance(
    model,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str],
    out_dir: str | Path | None = None,
    seed: int = 0,
) -> pd.DataFrame:
    """Three importance scores per feature plus the rank-average ensemble.

    Returns a frame sorted by ensemble rank (best first); optionally
    writes importance.csv and a bar plot of the top features.
    """
    gain = information_gain(X, y, seed)
    shuffle = shuffling_importance(model, X, y, seed)
    single = single_feature_performance(X, y, seed)
    frame = pd.DataFrame(
        {
            "feature": feature_names,
            "information_gain": gain,
            "feature_shuffling": shuffle,
            "feature_performance": single,
        }
    )
    for col in ("information_gain", "feature_shuffling", "feature_performance"):
        frame[f"{col}_rank"] = frame[col].rank(ascending=False, method="average")
    frame["ensemble_rank"] = frame[
        ["information_gain_rank", "feature_shuffling_rank", "feature_performance_rank"]
    ].mean(axis=1)
    frame = frame.sort_values("ensemble_rank").reset_index(drop=True)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out / "importance.csv", index=False)
        top = frame.head(25)[::-1]
        fig, ax = plt.subplots(figsize=(8, 9))
        ax.barh(top["feature"], 1.0 / top["ensemble_rank"])
        ax.set_xlabel("ensemble importance (1 / mean rank)")
        ax.set_title("Top features across three importance measures")
        fig.tight_layout()
        fig.savefig(out / "importance.png", dpi=120)
        plt.close(fig)
    return frame
