"""Dataset serialization and run manifests.

Transactions carry exactly the seven attributes (hash, inputs, outputs,
in_values, out_values, timestamp, fee).  CSV cells holding lists are
JSON arrays; timestamps are ISO-8601 UTC.  All writes go through a
temp-file rename so partial files never appear under the final name.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import LabelConfig, DEFAULT_LABELS, SimConfig
from .features import assign_label
from .generators import Dataset
from .ledger import Account, EntityKind, TransactionRecord

TX_COLUMNS = ["hash", "inputs", "outputs", "in_values", "out_values", "timestamp", "fee"]
ACCOUNT_COLUMNS = ["id", "kind", "instance", "category"]


def iso(ts: int) -> str:
    return (
        datetime.fromtimestamp(int(ts), tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


def from_iso(text: str) -> int:
    return int(datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp())


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    seed: int
    schema_digest: str
    config_digest: str
    tool_version: str
    transactions: int
    accounts_created: int
    accounts_active: int
    per_entity: dict[str, int]

    def to_jsonable(self) -> dict:
        return {
            "seed": self.seed,
            "schema_digest": self.schema_digest,
            "config_digest": self.config_digest,
            "tool_version": self.tool_version,
            "counts": {
                "transactions": self.transactions,
                "accounts_created": self.accounts_created,
                "accounts_active": self.accounts_active,
                "per_entity": self.per_entity,
            },
        }


def _record_row(rec: TransactionRecord) -> list[str]:
    return [
        rec.hash,
        json.dumps(list(rec.inputs)),
        json.dumps(list(rec.outputs)),
        json.dumps(list(rec.in_values)),
        json.dumps(list(rec.out_values)),
        iso(rec.timestamp),
        repr(rec.fee),
    ]


def _atomic_write(path: Path, write_fn) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        write_fn(fh)
    tmp.replace(path)


def write_dataset(
    dataset: Dataset,
    out_dir: str | Path,
    formats: tuple[str, ...] = ("csv", "jsonl"),
    schema_digest: str = "",
    config: SimConfig | None = None,
    labels: LabelConfig = DEFAULT_LABELS,
    trace: bool = False,
) -> dict[str, Path]:
    """Write transactions, accounts, manifest (and optionally the trace)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ledger = dataset.ledger
    written: dict[str, Path] = {}

    if "csv" in formats:
        path = out / "transactions.csv"

        def write_csv(fh):
            writer = csv.writer(fh)
            writer.writerow(TX_COLUMNS)
            for rec in ledger.log:
                writer.writerow(_record_row(rec))

        _atomic_write(path, write_csv)
        written["transactions.csv"] = path
    if "jsonl" in formats:
        path = out / "transactions.jsonl"

        def write_jsonl(fh):
            for rec in ledger.log:
                fh.write(
                    json.dumps(
                        {
                            "hash": rec.hash,
                            "inputs": list(rec.inputs),
                            "outputs": list(rec.outputs),
                            "in_values": list(rec.in_values),
                            "out_values": list(rec.out_values),
                            "timestamp": iso(rec.timestamp),
                            "fee": rec.fee,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

        _atomic_write(path, write_jsonl)
        written["transactions.jsonl"] = path

    accounts_path = out / "accounts.csv"

    def write_accounts(fh):
        writer = csv.writer(fh)
        writer.writerow(ACCOUNT_COLUMNS)
        for aid, acct in ledger.accounts.items():
            writer.writerow(
                [aid, acct.kind.value, acct.instance, assign_label(acct, labels)]
            )

    _atomic_write(accounts_path, write_accounts)
    written["accounts.csv"] = accounts_path

    if trace:
        trace_path = out / "trace.jsonl"

        def write_trace(fh):
            for entry in dataset.trace:
                fh.write(json.dumps(entry.to_jsonable(), sort_keys=True) + "\n")

        _atomic_write(trace_path, write_trace)
        written["trace.jsonl"] = trace_path

    active = dataset.active_accounts()
    per_entity: dict[str, int] = {}
    for aid in active:
        kind = ledger.accounts[aid].kind.value
        per_entity[kind] = per_entity.get(kind, 0) + 1
    manifest = RunManifest(
        seed=ledger.seed,
        schema_digest=schema_digest,
        config_digest=(config or SimConfig()).digest(),
        tool_version=__version__,
        transactions=len(ledger.log),
        accounts_created=len(ledger.accounts),
        accounts_active=len(active),
        per_entity=dict(sorted(per_entity.items())),
    )
    manifest_path = out / "manifest.json"
    _atomic_write(
        manifest_path,
        lambda fh: fh.write(
            json.dumps(manifest.to_jsonable(), indent=2, sort_keys=True) + "\n"
        ),
    )
    written["manifest.json"] = manifest_path
    return written


def read_transactions(path: str | Path) -> list[TransactionRecord]:
    """Read a transactions file (CSV or JSONL, by suffix)."""
    path = Path(path)
    records = []
    if path.suffix == ".jsonl":
        with open(path) as fh:
            for line in fh:
                raw = json.loads(line)
                records.append(
                    TransactionRecord(
                        hash=raw["hash"],
                        inputs=tuple(raw["inputs"]),
                        outputs=tuple(raw["outputs"]),
                        in_values=tuple(float(v) for v in raw["in_values"]),
                        out_values=tuple(float(v) for v in raw["out_values"]),
                        timestamp=from_iso(raw["timestamp"]),
                        fee=float(raw["fee"]),
                    )
                )
        return records
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            records.append(
                TransactionRecord(
                    hash=raw["hash"],
                    inputs=tuple(json.loads(raw["inputs"])),
                    outputs=tuple(json.loads(raw["outputs"])),
                    in_values=tuple(float(v) for v in json.loads(raw["in_values"])),
                    out_values=tuple(
                        float(v) for v in json.loads(raw["out_values"])
                    ),
                    timestamp=from_iso(raw["timestamp"]),
                    fee=float(raw["fee"]),
                )
            )
    return records


def read_accounts(path: str | Path) -> dict[str, Account]:
    """Rebuild account shells (kind, instance, category) from a dataset."""
    accounts: dict[str, Account] = {}
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            acct = Account(
                id=raw["id"],
                kind=EntityKind(raw["kind"]),
                instance=int(raw["instance"]),
                provenance=raw["category"],
            )
            accounts[acct.id] = acct
    return accounts


def replay_balances(
    records: list[TransactionRecord], accounts: dict[str, Account]
) -> None:
    """Fill account UTXO sets by replaying the log.

    Boundary (outer-layer) accounts spend genesis endowments that are
    not part of the log; those spends are skipped, so their replayed
    balance only reflects in-log credits.
    """
    for rec in records:
        for aid, v in zip(rec.inputs, rec.in_values):
            try:
                accounts[aid].utxos.remove(v)
            except ValueError:
                pass
        for aid, v in zip(rec.outputs, rec.out_values):
            accounts[aid].utxos.append(v)
