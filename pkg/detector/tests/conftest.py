import csv

import numpy as np
import pytest

FEATURE_COUNT = 130
INTERACTION_PREFIXES = (
    "sent_tx_to_",
    "recv_tx_from_",
    "value_sent_to_",
    "value_recv_from_",
)

KINDS = [
    "Licit", "Exchange", "DecentralizedExchange", "NestedExchange", "Escrow",
    "Mixer", "Mule", "Funds", "Business", "CryptoLending", "ServiceAddress",
    "NestedServiceAddress", "InterimAddress", "SingleUse", "OuterLayer",
]


def feature_names():
    realtime = [f"rt_feature_{i:02d}" for i in range(70)]
    interaction = []
    for kind in KINDS:
        for m in ("sent_tx_to", "recv_tx_from", "value_sent_to", "value_recv_from"):
            interaction.append(f"{m}_{kind}")
    return realtime + interaction


def synthetic_matrix(path, n=600, separation=6.0, seed=0, single_class=False):
    """Two Gaussian blobs in 130 dimensions, linearly separable when
    ``separation`` is large."""
    rng = np.random.default_rng(seed)
    names = feature_names()
    half = n // 2
    licit = rng.normal(0.0, 1.0, size=(half, FEATURE_COUNT))
    illicit = rng.normal(separation, 1.0, size=(n - half, FEATURE_COUNT))
    X = np.vstack([licit, illicit])
    y = np.array(["licit"] * half + ["illicit"] * (n - half))
    if single_class:
        y[:] = "illicit"
    order = rng.permutation(n)
    X, y = X[order], y[order]
    with open(path, "w", newline="") as fh:
        fh.write("# feature_manifest_sha256=test\n")
        writer = csv.writer(fh)
        writer.writerow(["account"] + names + ["entity_label", "category_label"])
        for i in range(n):
            writer.writerow(
                [f"acct{i}"]
                + [repr(float(v)) for v in X[i]]
                + ["Mixer" if y[i] == "illicit" else "Licit", y[i]]
            )
    return X, (y == "illicit").astype(int), names


@pytest.fixture
def separable_matrix(tmp_path):
    path = tmp_path / "separable.csv"
    X, y, names = synthetic_matrix(path, n=600, separation=6.0, seed=1)
    return path, X, y, names
