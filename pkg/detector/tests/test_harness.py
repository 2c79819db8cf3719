import numpy as np
import pandas as pd
import pytest

from amldetect.configs import MODEL_NAMES, build_models
from amldetect.harness import METRIC_COLUMNS, load_matrix, train_eval
from conftest import synthetic_matrix


def test_all_nine_configs_instantiate():
    models = build_models()
    assert len(models) == 8  # ensemble is assembled from the fitted bases
    assert set(models) | {"Ensemble Voting Classifier"} == set(MODEL_NAMES)


def test_load_matrix_feature_sets(separable_matrix):
    path, X, y, names = separable_matrix
    X130, y130, names130 = load_matrix(path, 130)
    assert X130.shape == (600, 130)
    assert len(names130) == 130
    X70, y70, names70 = load_matrix(path, 70)
    assert X70.shape == (600, 70)
    assert not any(n.startswith("sent_tx_to_") for n in names70)
    np.testing.assert_array_equal(y130, y70)


def test_load_matrix_rejects_single_class(tmp_path):
    path = tmp_path / "degenerate.csv"
    synthetic_matrix(path, n=100, single_class=True)
    with pytest.raises(ValueError, match="single-class"):
        load_matrix(path)


def test_load_matrix_rejects_missing_labels(tmp_path):
    path = tmp_path / "nolabel.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="category_label"):
        load_matrix(path)


def test_train_eval_on_separable_toy(separable_matrix, tmp_path):
    path, X, y, names = separable_matrix
    out = tmp_path / "run"
    rows = train_eval(path, out, feature_set=130, split_seed=0)
    assert [r.model for r in rows] == MODEL_NAMES
    by_name = {r.model: r for r in rows}
    # a linearly separated toy is free lunch for KNN
    assert by_name["KNN"].test_accuracy == 1.0
    for row in rows:
        assert 0 <= row.test_accuracy <= 1
        assert 0 <= row.auc_score <= 1
        assert row.rmse >= 0
    # artifacts
    assert (out / "metrics.csv").exists()
    assert (out / "roc.png").exists()
    assert (out / "pr.png").exists()
    models = list((out / "models").glob("*.joblib"))
    assert len(models) == 9
    frame = pd.read_csv(out / "metrics.csv", comment="#")
    assert list(frame.columns) == METRIC_COLUMNS
    assert len(frame) == 9


def test_rmse_matches_misclassification_rate(separable_matrix, tmp_path):
    path, *_ = separable_matrix
    rows = train_eval(path, tmp_path / "r", feature_set=70, split_seed=3)
    for row in rows:
        assert row.rmse == pytest.approx((1 - row.test_accuracy) ** 0.5, abs=1e-9)


def test_train_eval_deterministic(separable_matrix, tmp_path):
    path, *_ = separable_matrix
    a = train_eval(path, tmp_path / "a", feature_set=130, split_seed=7)
    b = train_eval(path, tmp_path / "b", feature_set=130, split_seed=7)
    assert a == b
