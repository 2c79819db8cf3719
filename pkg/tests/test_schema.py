import json

import pytest

from utxosim.errors import SchemaError
from utxosim.ledger import EntityKind
from utxosim.schema import (
    EntitySpec,
    SchemaRow,
    parse_entity_spec,
    parse_schema,
    parse_timestamp,
    serialize_schema,
    validate_schema,
)

T0 = "2020-03-17"


def row(sender, receiver, quantity=10, ts=T0, mini=None):
    return {
        "sender": sender,
        "receiver": receiver,
        "quantity": quantity,
        "timestamp": ts,
        **({"min_inputs": mini} if mini else {}),
    }


def write_csv(path, rows):
    cols = ["sender", "receiver", "quantity", "timestamp", "min_inputs"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(
            ",".join(str(r.get(c, "")) for c in cols)
        )
    path.write_text("\n".join(lines) + "\n")


# --- entity spec parsing ----------------------------------------------------


def test_parse_exchange():
    assert parse_entity_spec("Exchange 1") == EntitySpec(EntityKind.EXCHANGE, 1)


def test_parse_service_add_alias():
    assert parse_entity_spec("service add 2") == EntitySpec(
        EntityKind.SERVICE_ADDRESS, 2
    )


def test_parse_unknown_kind():
    with pytest.raises(SchemaError, match="launderer"):
        parse_entity_spec("Launderer 1")


def test_parse_missing_instance_defaults():
    assert parse_entity_spec("Mixer") == EntitySpec(EntityKind.MIXER, 1)


def test_parse_outer_layer_rejected():
    with pytest.raises(SchemaError):
        parse_entity_spec("OuterLayer 1")


def test_parse_dd_mm_yy():
    assert parse_timestamp("17/03/20") == parse_timestamp("2020-03-17")


# --- file parsing --------------------------------------------------------


def test_parse_figure2_style_csv(tmp_path):
    p = tmp_path / "s.csv"
    write_csv(
        p,
        [
            row("Exchange 1", "Service address 1", 1200, "17/03/20"),
            row("service add 1", "service add 2", 2000, "20/03/20"),
            row("service add 2", "Mixer 1", 500, "22/03/20"),
        ],
    )
    rows = parse_schema(p)
    assert len(rows) == 3
    assert rows[0] == SchemaRow(
        sender=EntitySpec(EntityKind.EXCHANGE, 1),
        receiver=EntitySpec(EntityKind.SERVICE_ADDRESS, 1),
        quantity=1200,
        latest_ts=parse_timestamp("2020-03-17"),
    )


def test_json_equivalent_to_csv(tmp_path):
    csv_p, json_p = tmp_path / "s.csv", tmp_path / "s.json"
    write_csv(csv_p, [row("Exchange 1", "Service address 1", 1200)])
    json_p.write_text(json.dumps([row("Exchange 1", "Service address 1", 1200)]))
    assert parse_schema(csv_p) == parse_schema(json_p)


def test_quantity_zero_rejected(tmp_path):
    p = tmp_path / "s.csv"
    write_csv(p, [row("Exchange 1", "Licit 1", 0)])
    with pytest.raises(SchemaError, match="row 1"):
        parse_schema(p)


def test_malformed_row_number(tmp_path):
    p = tmp_path / "s.csv"
    write_csv(p, [row("Exchange 1", "Licit 1"), row("Nope 1", "Licit 1")])
    with pytest.raises(SchemaError, match="row 2"):
        parse_schema(p)


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("sender,receiver,quantity,timestamp\n")
    with pytest.raises(SchemaError, match="no rows"):
        parse_schema(p)


def test_round_trip_csv_and_json(tmp_path):
    p = tmp_path / "s.csv"
    write_csv(
        p,
        [
            row("Exchange 1", "Service address 1", 1200, "17/03/20"),
            row("Mule 2", "Interim address 3", 55, "2020-04-01", mini=2),
        ],
    )
    rows = parse_schema(p)
    for suffix in ("csv", "json"):
        out = tmp_path / f"round.{suffix}"
        serialize_schema(rows, out)
        assert parse_schema(out) == rows


# --- validation ----------------------------------------------------------


def rows_of(*tuples):
    return [
        SchemaRow(
            sender=parse_entity_spec(s),
            receiver=parse_entity_spec(r),
            quantity=q,
            latest_ts=parse_timestamp(ts),
            min_inputs=mini,
        )
        for (s, r, q, ts, mini) in tuples
    ]


def test_validate_funded_chain_ok():
    rows = rows_of(
        ("Exchange 1", "Service address 1", 100, "2020-03-17", 1),
        ("Service address 1", "Service address 2", 100, "2020-03-20", 1),
    )
    report = validate_schema(rows)
    assert report.ok and not report.warnings


def test_validate_unfunded_sender_error():
    # interim 1 receives later, so it gets no boundary funding, yet it
    # sends first
    rows = rows_of(
        ("Interim address 1", "Mixer 1", 100, "2020-03-17", 1),
        ("Licit 1", "Interim address 1", 100, "2020-03-20", 1),
    )
    report = validate_schema(rows)
    assert any("unfunded" in e for e in report.errors)


def test_validate_sender_only_pool_is_outer_fundable():
    rows = rows_of(("Interim address 1", "Mixer 1", 100, "2020-03-17", 1),)
    assert validate_schema(rows).ok


def test_validate_escrow_settle_before_deposit():
    rows = rows_of(("Escrow 1", "Business 1", 10, "2020-03-17", 1),)
    report = validate_schema(rows)
    assert any("escrow" in e.lower() for e in report.errors)


def test_validate_single_use_budget():
    rows = rows_of(
        ("Licit 1", "Single use 1", 10, "2020-03-17", 1),
        ("Single use 1", "Licit 2", 10, "2020-03-20", 5),
    )
    report = validate_schema(rows)
    assert any("single-use" in e for e in report.errors)


def test_validate_timestamps_increasing_no_warning():
    rows = rows_of(
        ("Exchange 1", "Service address 1", 10, "2020-03-17", 1),
        ("Service address 1", "Service address 2", 10, "2020-03-20", 1),
        ("Service address 2", "Licit 1", 10, "2020-03-25", 1),
    )
    assert validate_schema(rows).warnings == []


def test_validate_timestamp_regression_warns():
    rows = rows_of(
        ("Exchange 1", "Service address 1", 10, "2020-03-20", 1),
        ("Service address 1", "Service address 2", 10, "2020-03-17", 1),
    )
    assert validate_schema(rows).warnings


def test_validation_pure():
    rows = rows_of(
        ("Exchange 1", "Service address 1", 10, "2020-03-17", 1),
    )
    before = list(rows)
    r1 = validate_schema(rows)
    r2 = validate_schema(rows)
    assert rows == before
    assert r1.errors == r2.errors and r1.warnings == r2.warnings
