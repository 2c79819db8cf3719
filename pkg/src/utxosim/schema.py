"""Parse and validate transaction schemas (CSV or JSON).

A schema row names a sender entity, a receiver entity, how many
transactions to generate between them, and the latest preferred
timestamp.  An optional fifth column sets the minimum input count.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import SchemaError
from .ledger import EntityKind

logger = logging.getLogger(__name__)

CSV_HEADER = ["sender", "receiver", "quantity", "timestamp", "min_inputs"]

# Accepted entity names (lowercased, spaces collapsed) -> kind.
_KIND_ALIASES: dict[str, EntityKind] = {
    "licit": EntityKind.LICIT,
    "exchange": EntityKind.EXCHANGE,
    "decentralized exchange": EntityKind.DECENTRALIZED_EXCHANGE,
    "dex": EntityKind.DECENTRALIZED_EXCHANGE,
    "nested exchange": EntityKind.NESTED_EXCHANGE,
    "escrow": EntityKind.ESCROW,
    "mixer": EntityKind.MIXER,
    "mule": EntityKind.MULE,
    "funds": EntityKind.FUNDS,
    "business": EntityKind.BUSINESS,
    "crypto lending": EntityKind.CRYPTO_LENDING,
    "service address": EntityKind.SERVICE_ADDRESS,
    "service add": EntityKind.SERVICE_ADDRESS,
    "nested service address": EntityKind.NESTED_SERVICE_ADDRESS,
    "nested service add": EntityKind.NESTED_SERVICE_ADDRESS,
    "interim address": EntityKind.INTERIM_ADDRESS,
    "interim": EntityKind.INTERIM_ADDRESS,
    "single use": EntityKind.SINGLE_USE,
    "single-use": EntityKind.SINGLE_USE,
    "sgl": EntityKind.SINGLE_USE,
}

# Canonical CamelCase names parse too ("ServiceAddress 2"), keeping
# parse(serialize(rows)) an identity.  Outer-layer accounts are internal
# and deliberately not addressable from a schema.
for _kind in EntityKind:
    if _kind is not EntityKind.OUTER_LAYER:
        _KIND_ALIASES.setdefault(_kind.value.lower(), _kind)


@dataclass(frozen=True, order=True)
class EntitySpec:
    kind: EntityKind
    instance: int

    def __str__(self) -> str:
        return f"{self.kind.value} {self.instance}"


@dataclass(frozen=True)
class SchemaRow:
    sender: EntitySpec
    receiver: EntitySpec
    quantity: int
    latest_ts: int
    min_inputs: int = 1


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def parse_entity_spec(text: str) -> EntitySpec:
    """Parse strings like ``"Exchange 1"`` or ``"service add 2"``."""
    cleaned = re.sub(r"[\s_]+", " ", text.strip())
    m = re.fullmatch(r"(.*?)[\s-]*(\d+)?", cleaned)
    name = m.group(1).strip().lower() if m else cleaned.lower()
    kind = _KIND_ALIASES.get(name)
    if kind is None:
        raise SchemaError(f"unknown entity kind {name!r} in {text!r}")
    if m and m.group(2):
        instance = int(m.group(2))
        if instance < 1:
            raise SchemaError(f"instance must be positive in {text!r}")
    else:
        logger.warning("entity %r has no instance number, defaulting to 1", text)
        instance = 1
    return EntitySpec(kind=kind, instance=instance)


def parse_timestamp(text: str) -> int:
    """ISO-8601 dates/instants or dd/mm/yy[yy]; returns epoch seconds UTC."""
    raw = text.strip()
    m = re.fullmatch(r"(\d{1,2})/(\d{1,2})/(\d{2}|\d{4})", raw)
    if m:
        day, month, year = (int(g) for g in m.groups())
        if year < 100:
            year += 2000
        dt = datetime(year, month, day, tzinfo=timezone.utc)
        return int(dt.timestamp())
    try:
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(f"unparseable timestamp {raw!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _row_from_fields(
    sender: str, receiver: str, quantity: str, ts: str, min_inputs: str | None
) -> SchemaRow:
    qty = int(str(quantity).strip())
    if qty < 1:
        raise SchemaError(f"quantity must be >= 1, got {quantity!r}")
    mini = 1
    if min_inputs is not None and str(min_inputs).strip():
        mini = int(str(min_inputs).strip())
        if mini < 1:
            raise SchemaError(f"min_inputs must be >= 1, got {min_inputs!r}")
    return SchemaRow(
        sender=parse_entity_spec(str(sender)),
        receiver=parse_entity_spec(str(receiver)),
        quantity=qty,
        latest_ts=parse_timestamp(str(ts)),
        min_inputs=mini,
    )


def parse_schema(path: str | Path, fmt: str | None = None) -> list[SchemaRow]:
    """Load a schema file; format inferred from the suffix unless given."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    rows: list[SchemaRow] = []
    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise SchemaError(f"{path}: empty schema file")
            missing = [c for c in CSV_HEADER[:4] if c not in reader.fieldnames]
            if missing:
                raise SchemaError(f"{path}: missing columns {missing}")
            for lineno, raw in enumerate(reader, start=1):
                try:
                    rows.append(
                        _row_from_fields(
                            raw["sender"],
                            raw["receiver"],
                            raw["quantity"],
                            raw["timestamp"],
                            raw.get("min_inputs"),
                        )
                    )
                except (SchemaError, ValueError, KeyError) as exc:
                    raise SchemaError(f"{path}: row {lineno}: {exc}") from None
    elif fmt == "json":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise SchemaError(f"{path}: expected a JSON array of rows")
        for lineno, raw in enumerate(data, start=1):
            try:
                rows.append(
                    _row_from_fields(
                        raw["sender"],
                        raw["receiver"],
                        raw["quantity"],
                        raw["timestamp"],
                        raw.get("min_inputs"),
                    )
                )
            except (SchemaError, ValueError, KeyError) as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from None
    else:
        raise SchemaError(f"unknown schema format {fmt!r}")
    if not rows:
        raise SchemaError(f"{path}: schema has no rows")
    return rows


def serialize_schema(rows: list[SchemaRow], path: str | Path) -> None:
    """Write rows back out (CSV or JSON by suffix); inverse of parse."""
    path = Path(path)
    payload = [
        {
            "sender": str(r.sender),
            "receiver": str(r.receiver),
            "quantity": r.quantity,
            "timestamp": datetime.fromtimestamp(r.latest_ts, tz=timezone.utc)
            .isoformat()
            .replace("+00:00", "Z"),
            "min_inputs": r.min_inputs,
        }
        for r in rows
    ]
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
            writer.writeheader()
            writer.writerows(payload)


def validate_schema(rows: list[SchemaRow], sgl_uses_per_tx: int = 2) -> ValidationReport:
    """Static checks: funding order, single-use budgets, timestamp order.

    Pools that never receive anywhere in the schema are boundary-funded
    before the run starts, so only pools with a later inbound row can be
    caught sending while unfunded.
    """
    report = ValidationReport()
    receives_somewhere = {r.receiver for r in rows}
    funded: set[EntitySpec] = set()
    last_ts_seen: dict[EntitySpec, int] = {}
    for idx, row in enumerate(rows, start=1):
        for spec in (row.sender, row.receiver):
            prev = last_ts_seen.get(spec)
            if prev is not None and row.latest_ts < prev:
                report.warnings.append(
                    f"row {idx}: timestamp precedes an earlier row involving"
                    f" {spec}; the sampling window may collapse"
                )
            last_ts_seen[spec] = max(row.latest_ts, prev or row.latest_ts)

        sender = row.sender
        outer_eligible = sender not in receives_somewhere and sender.kind not in (
            EntityKind.SINGLE_USE,
            EntityKind.ESCROW,
        )
        if sender.kind is EntityKind.ESCROW:
            if sender not in funded:
                report.errors.append(
                    f"row {idx}: escrow {sender} settles before any deposit row"
                )
        elif sender not in funded and not outer_eligible:
            report.errors.append(
                f"row {idx}: sender {sender} is unfunded (no prior inbound row"
                " and no outer-layer eligibility)"
            )
        if sender.kind is EntityKind.SINGLE_USE and row.min_inputs > sgl_uses_per_tx:
            report.errors.append(
                f"row {idx}: single-use sender {sender} needs min_inputs"
                f" {row.min_inputs} > sizing budget of {sgl_uses_per_tx} per tx"
            )
        funded.add(row.receiver)
        if outer_eligible:
            funded.add(sender)
    return report
