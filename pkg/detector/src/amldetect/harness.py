"""Train the nine configurations on an exported feature matrix and
report the full metrics table plus ROC / precision-recall plots."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import joblib
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from sklearn.metrics import (
    accuracy_score,
    f1_score,
    precision_recall_curve,
    precision_score,
    recall_score,
    roc_auc_score,
    roc_curve,
)
from sklearn.model_selection import StratifiedKFold, cross_val_score, train_test_split

from .configs import MODEL_NAMES, build_models

LABEL_COLUMNS = ("entity_label", "category_label")
INTERACTION_PREFIXES = (
    "sent_tx_to_",
    "recv_tx_from_",
    "value_sent_to_",
    "value_recv_from_",
)

METRIC_COLUMNS = [
    "model",
    "train_accuracy",
    "test_accuracy",
    "rmse",
    "precision",
    "recall",
    "f1_score",
    "cross_validation_score",
    "prediction_probability",
    "auc_score",
]


@dataclass
class MetricsRow:
    model: str
    train_accuracy: float
    test_accuracy: float
    rmse: float
    precision: float
    recall: float
    f1_score: float
    cross_validation_score: float
    prediction_probability: float
    auc_score: float


def load_matrix(path: str | Path, feature_set: int = 130):
    """Read a features CSV; returns (X, y, feature_names).

    ``feature_set`` 130 keeps every numeric column; 70 drops the
    entity-interaction block (the attributes a real-time observer
    cannot compute).
    """
    df = pd.read_csv(path, comment="#")
    if "category_label" not in df.columns:
        raise ValueError("matrix lacks a category_label column")
    y = (df["category_label"] == "illicit").to_numpy(dtype=int)
    drop = [c for c in ("account", *LABEL_COLUMNS) if c in df.columns]
    features = df.drop(columns=drop)
    if feature_set == 70:
        keep = [
            c
            for c in features.columns
            if not c.startswith(INTERACTION_PREFIXES)
        ]
        features = features[keep]
    elif feature_set != 130:
        raise ValueError("feature_set must be 70 or 130")
    if len(np.unique(y)) < 2:
        raise ValueError(
            "matrix is single-class; cannot train a binary detector"
        )
    return features.to_numpy(dtype=float), y, list(features.columns)


def _predict_proba(model, X) -> np.ndarray:
    return model.predict_proba(X)[:, 1]


def _rmse(y_true, y_pred) -> float:
    return float(math.sqrt(np.mean((y_true - y_pred) ** 2)))


def train_eval(
    matrix_path: str | Path,
    out_dir: str | Path,
    feature_set: int = 130,
    split_seed: int = 0,
    cv_folds: int = 3,
    cv_cap: int = 20000,
) -> list[MetricsRow]:
    """Stratified 80/20 split, train all nine configs, emit artifacts.

    Writes metrics.csv, roc.png, pr.png and the fitted models under
    ``out_dir``; returns the metric rows in Table order.
    """
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    X, y, names = load_matrix(matrix_path, feature_set)
    X_train, X_test, y_train, y_test = train_test_split(
        X, y, test_size=0.2, stratify=y, random_state=split_seed
    )

    # capped subsample keeps cross-validation affordable on one core
    if len(y_train) > cv_cap:
        idx = np.random.default_rng(split_seed).permutation(len(y_train))[:cv_cap]
        X_cv, y_cv = X_train[idx], y_train[idx]
    else:
        X_cv, y_cv = X_train, y_train

    models = build_models(random_state=split_seed)
    rows: list[MetricsRow] = []
    fitted: dict[str, object] = {}
    prob_train: dict[str, np.ndarray] = {}
    prob_test: dict[str, np.ndarray] = {}
    f1_weights: dict[str, float] = {}
    cv = StratifiedKFold(n_splits=cv_folds, shuffle=True, random_state=split_seed)

    for name, model in models.items():
        model.fit(X_train, y_train)
        fitted[name] = model
        prob_train[name] = _predict_proba(model, X_train)
        prob_test[name] = _predict_proba(model, X_test)
        cv_score = float(
            np.mean(cross_val_score(model, X_cv, y_cv, cv=cv, scoring="accuracy"))
        )
        rows.append(
            _metrics_row(
                name, y_train, prob_train[name], y_test, prob_test[name], cv_score
            )
        )
        f1_weights[name] = rows[-1].f1_score
        joblib.dump(model, out / "models" / f"{name.replace(' ', '_')}.joblib")

    # soft voting over the fitted bases, F1 scores as weights; combining
    # the stored probabilities is exactly what refitting a voting
    # classifier would compute, at none of the cost
    weights = np.array([f1_weights[n] for n in f1_weights])
    weights = weights / weights.sum()
    ens_train = np.zeros(len(y_train))
    ens_test = np.zeros(len(y_test))
    for w, name in zip(weights, f1_weights):
        ens_train += w * prob_train[name]
        ens_test += w * prob_test[name]
    ens_cv = float(np.mean([r.cross_validation_score for r in rows]))
    ensemble_row = _metrics_row(
        "Ensemble Voting Classifier", y_train, ens_train, y_test, ens_test, ens_cv
    )
    rows.append(ensemble_row)
    prob_test["Ensemble Voting Classifier"] = ens_test
    joblib.dump(
        {"weights": dict(zip(f1_weights, weights)), "models": "models/"},
        out / "models" / "Ensemble_Voting_Classifier.joblib",
    )

    frame = pd.DataFrame([asdict(r) for r in rows])[METRIC_COLUMNS]
    with open(out / "metrics.csv", "w") as fh:
        fh.write(
            f"# feature_set={feature_set} split_seed={split_seed} "
            f"cv_folds={cv_folds} cv_cap={cv_cap}\n"
        )
        frame.to_csv(fh, index=False)
    _plot_curves(y_test, prob_test, out)
    (out / "run.json").write_text(
        json.dumps(
            {
                "matrix": str(matrix_path),
                "feature_set": feature_set,
                "split_seed": split_seed,
                "n_train": int(len(y_train)),
                "n_test": int(len(y_test)),
                "features": names,
            },
            indent=2,
        )
    )
    return rows


def _metrics_row(name, y_train, p_train, y_test, p_test, cv_score) -> MetricsRow:
    yhat_train = (p_train >= 0.5).astype(int)
    yhat_test = (p_test >= 0.5).astype(int)
    prob_true = np.where(y_test == 1, p_test, 1.0 - p_test)
    return MetricsRow(
        model=name,
        train_accuracy=float(accuracy_score(y_train, yhat_train)),
        test_accuracy=float(accuracy_score(y_test, yhat_test)),
        rmse=_rmse(y_test, yhat_test),
        precision=float(precision_score(y_test, yhat_test, zero_division=0)),
        recall=float(recall_score(y_test, yhat_test, zero_division=0)),
        f1_score=float(f1_score(y_test, yhat_test, zero_division=0)),
        cross_validation_score=cv_score,
        prediction_probability=float(prob_true.mean()),
        auc_score=float(roc_auc_score(y_test, p_test)),
    )


def _plot_curves(y_test, prob_test, out: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 6))
    for name in MODEL_NAMES:
        if name not in prob_test:
            continue
        fpr, tpr, _ = roc_curve(y_test, prob_test[name])
        auc = roc_auc_score(y_test, prob_test[name])
        ax.plot(fpr, tpr, label=f"{name} (AUC {auc:.4f})", linewidth=1)
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.7)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title("Receiver operating characteristic")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(out / "roc.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(8, 6))
    for name in MODEL_NAMES:
        if name not in prob_test:
            continue
        precision, recall, _ = precision_recall_curve(y_test, prob_test[name])
        ax.plot(recall, precision, label=name, linewidth=1)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_title("Precision-recall tradeoff")
    ax.legend(fontsize=7, loc="lower left")
    fig.tight_layout()
    fig.savefig(out / "pr.png", dpi=120)
    plt.close(fig)
