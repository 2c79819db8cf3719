import csv
import hashlib
import json
from pathlib import Path

import pytest

from utxosim.cli import main
from utxosim.dataio import (
    TX_COLUMNS,
    read_accounts,
    read_transactions,
    write_dataset,
)
from utxosim.entitysim import QuickGenConfig, quickgen

SCHEMAS = Path(__file__).parent.parent / "schemas"


@pytest.fixture(scope="module")
def dataset():
    return quickgen(QuickGenConfig(entity="licit", count=60, seed=13))


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_write_dataset_files(dataset, tmp_path):
    written = write_dataset(dataset, tmp_path, schema_digest="x")
    assert set(written) == {
        "transactions.csv",
        "transactions.jsonl",
        "accounts.csv",
        "manifest.json",
    }
    with open(written["transactions.csv"]) as fh:
        header = fh.readline().strip().split(",")
    assert header == TX_COLUMNS
    rows = list(csv.DictReader(open(written["transactions.csv"])))
    assert len(rows) == len(dataset.records)
    manifest = json.loads(written["manifest.json"].read_text())
    assert manifest["counts"]["transactions"] == len(dataset.records)
    assert manifest["counts"]["accounts_active"] == len(dataset.active_accounts())


def test_round_trip_csv_and_jsonl(dataset, tmp_path):
    write_dataset(dataset, tmp_path)
    for name in ("transactions.csv", "transactions.jsonl"):
        records = read_transactions(tmp_path / name)
        assert records == dataset.records


def test_accounts_round_trip(dataset, tmp_path):
    write_dataset(dataset, tmp_path)
    accounts = read_accounts(tmp_path / "accounts.csv")
    assert set(accounts) == set(dataset.ledger.accounts)
    for aid, acct in accounts.items():
        assert acct.kind is dataset.ledger.accounts[aid].kind


def test_manifest_counts_match_rescan(dataset, tmp_path):
    write_dataset(dataset, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    records = read_transactions(tmp_path / "transactions.csv")
    active = set()
    for rec in records:
        active.update(rec.inputs)
        active.update(rec.outputs)
    assert manifest["counts"]["transactions"] == len(records)
    assert manifest["counts"]["accounts_active"] == len(active)


def test_write_deterministic(tmp_path):
    digests = []
    for run in ("a", "b"):
        ds = quickgen(QuickGenConfig(entity="licit", count=60, seed=13))
        out = tmp_path / run
        write_dataset(ds, out, schema_digest="x")
        digests.append(
            tuple(
                digest(out / n)
                for n in ("transactions.csv", "transactions.jsonl", "accounts.csv", "manifest.json")
            )
        )
    assert digests[0] == digests[1]


# --- CLI ---------------------------------------------------------------


def test_cli_validate_ok(capsys):
    assert main(["validate", "--schema", str(SCHEMAS / "figure2.csv")]) == 0
    assert "3 rows" in capsys.readouterr().out


def test_cli_validate_bad_schema(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "sender,receiver,quantity,timestamp\n"
        "Interim 1,Mixer 1,10,2020-03-17\n"
        "Licit 1,Interim 1,10,2020-03-20\n"
    )
    assert main(["validate", "--schema", str(bad)]) == 1
    assert "row 1" in capsys.readouterr().err


def test_cli_simulate_figure2(tmp_path):
    rc = main(
        [
            "simulate",
            "--schema",
            str(SCHEMAS / "figure2.csv"),
            "--seed",
            "7",
            "--out",
            str(tmp_path),
            "--scale",
            "0.1",
            "--emit-plan",
        ]
    )
    assert rc == 0
    assert (tmp_path / "transactions.csv").exists()
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert len(plan["steps"]) == 3


def test_cli_quickgen_and_features_and_stats(tmp_path, capsys):
    out = tmp_path / "ds"
    assert (
        main(
            ["quickgen", "--entity", "licit", "--count", "50", "--seed", "3", "--out", str(out)]
        )
        == 0
    )
    feat = tmp_path / "features.csv"
    assert (
        main(["features", "--dataset", str(out), "--out", str(feat), "--augment"])
        == 0
    )
    first = feat.read_text().splitlines()
    assert first[0].startswith("# feature_manifest_sha256=")
    assert first[1].split(",")[1] == "sent_value_min"
    assert (feat.parent / "features.csv.manifest.json").exists()
    assert main(["stats", "--dataset", str(out)]) == 0
    assert "entity distribution" in capsys.readouterr().out


def test_cli_features_augment_bounds(tmp_path):
    out = tmp_path / "ds"
    main(["quickgen", "--entity", "licit", "--count", "40", "--seed", "5", "--out", str(out)])
    plain = tmp_path / "plain.csv"
    boosted = tmp_path / "boosted.csv"
    main(["features", "--dataset", str(out), "--out", str(plain)])
    main(["features", "--dataset", str(out), "--out", str(boosted), "--augment", "--seed", "1"])

    def matrix(path):
        with open(path) as fh:
            fh.readline()
            rows = list(csv.reader(fh))
        return rows[0], [[float(x) for x in r[1:-2]] for r in rows[1:]]

    _, base = matrix(plain)
    _, aug = matrix(boosted)
    for brow, arow in zip(base, aug):
        for b, a in zip(brow, arow):
            if b > 0:
                assert b * 1.12 * 0.9 - 1e-9 <= a <= b * 1.12 * 1.1 + 1e-9


def test_cli_sim_seed_env(tmp_path, monkeypatch):
    outs = []
    for name in ("a", "b"):
        monkeypatch.setenv("SIM_SEED", "99")
        out = tmp_path / name
        main(["quickgen", "--entity", "licit", "--count", "30", "--out", str(out)])
        outs.append(digest(out / "transactions.csv"))
    assert outs[0] == outs[1]


def test_cli_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])  # missing required flags
    assert exc.value.code == 2


def test_cli_unknown_entity_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["quickgen", "--entity", "bank", "--count", "1", "--out", "/tmp/x"])
    assert exc.value.code == 2
