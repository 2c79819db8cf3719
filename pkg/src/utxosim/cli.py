"""Command-line surface: schema -> plan -> generation -> features -> export."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_CONFIG, DEFAULT_LABELS, LabelConfig
from .dataio import (
    file_digest,
    read_accounts,
    read_transactions,
    replay_balances,
    write_dataset,
)
from .entitysim import QUICKGEN_ENTITIES, QuickGenConfig, quickgen
from .errors import SimulationError
from .features import augment, compute_feature_matrix, write_feature_csv
from .generators import run_plan
from .ledger import Ledger
from .mapper import compile_plan
from .schema import SchemaRow, parse_schema, validate_schema


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("SIM_SEED")
    return int(env) if env else 0


def _progress(total_holder):
    def report(n):
        if n // 10000 > total_holder[0] // 10000:
            print(f"... {n} transactions", file=sys.stderr)
        total_holder[0] = n

    return report


def _scaled(rows: list[SchemaRow], scale: float) -> list[SchemaRow]:
    if scale == 1.0:
        return rows
    return [
        replace(r, quantity=max(1, round(r.quantity * scale))) for r in rows
    ]


def cmd_validate(args) -> int:
    rows = parse_schema(args.schema, args.format)
    report = validate_schema(rows)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for e in report.errors:
        print(f"error: {e}", file=sys.stderr)
    if not report.ok:
        return 1
    print(f"{len(rows)} rows, no errors")
    return 0


def cmd_simulate(args) -> int:
    rows = parse_schema(args.schema, args.format)
    report = validate_schema(rows)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.ok:
        for e in report.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    rows = _scaled(rows, args.scale)
    seed = _seed(args.seed)
    ledger = Ledger(seed=seed)
    labels = (
        LabelConfig.from_file(args.labels) if args.labels else DEFAULT_LABELS
    )
    plan = compile_plan(rows, ledger, DEFAULT_CONFIG)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.emit_plan:
        (out / "plan.json").write_text(
            json.dumps(plan.to_jsonable(), indent=2, sort_keys=True) + "\n"
        )
    dataset = run_plan(
        plan,
        ledger,
        DEFAULT_CONFIG,
        keep_partial=args.keep_partial,
        progress=_progress([0]),
    )
    for idx, msg in dataset.step_errors:
        print(f"warning: step {idx} failed: {msg}", file=sys.stderr)
    written = write_dataset(
        dataset,
        out,
        formats=tuple(args.formats.split(",")),
        schema_digest=file_digest(args.schema),
        config=DEFAULT_CONFIG,
        labels=labels,
        trace=args.trace,
    )
    print(
        f"{len(dataset.records)} transactions, "
        f"{len(dataset.active_accounts())} active accounts -> {out}"
    )
    return 0 if not dataset.step_errors else 1


def cmd_quickgen(args) -> int:
    cfg = QuickGenConfig(
        entity=args.entity, count=args.count, seed=_seed(args.seed)
    )
    dataset = quickgen(cfg, DEFAULT_CONFIG)
    written = write_dataset(
        dataset,
        args.out,
        formats=tuple(args.formats.split(",")),
        schema_digest=f"quickgen:{args.entity}",
        config=DEFAULT_CONFIG,
        trace=args.trace,
    )
    print(f"{len(dataset.records)} transactions -> {args.out}")
    return 0


def cmd_features(args) -> int:
    dataset_dir = Path(args.dataset)
    tx_path = dataset_dir / "transactions.csv"
    if not tx_path.exists():
        tx_path = dataset_dir / "transactions.jsonl"
    records = read_transactions(tx_path)
    accounts = read_accounts(dataset_dir / "accounts.csv")
    replay_balances(records, accounts)
    ids, matrix, ents, cats = compute_feature_matrix(
        records, accounts, include_inactive=args.include_inactive
    )
    if args.augment:
        matrix = augment(
            matrix, scale=args.scale, noise_frac=args.noise, seed=_seed(args.seed)
        )
    write_feature_csv(args.out, ids, matrix, ents, cats)
    print(f"{matrix.shape[0]} accounts x {matrix.shape[1]} features -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    dataset_dir = Path(args.dataset)
    tx_path = dataset_dir / "transactions.csv"
    if not tx_path.exists():
        tx_path = dataset_dir / "transactions.jsonl"
    records = read_transactions(tx_path)
    accounts = read_accounts(dataset_dir / "accounts.csv")
    active = set()
    for rec in records:
        active.update(rec.inputs)
        active.update(rec.outputs)
    per_kind: dict[str, int] = {}
    for aid in active:
        kind = accounts[aid].kind.value
        per_kind[kind] = per_kind.get(kind, 0) + 1
    total_value = sum(sum(r.out_values) for r in records)
    print(f"transactions: {len(records)}")
    print(f"active accounts: {len(active)} (created: {len(accounts)})")
    print(f"total output value: {total_value:.0f} sats")
    print("entity distribution (active accounts):")
    for kind, count in sorted(per_kind.items(), key=lambda kv: -kv[1]):
        share = 100.0 * count / len(active) if active else 0.0
        print(f"  {kind:<24} {count:>8}  {share:5.1f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utxosim",
        description="UTXO money-laundering transaction simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a schema file")
    p.add_argument("--schema", required=True)
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="generate a dataset from a schema")
    p.add_argument("--schema", required=True)
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply every row quantity by this factor")
    p.add_argument("--formats", default="csv,jsonl")
    p.add_argument("--labels", default=None, help="label-config JSON file")
    p.add_argument("--emit-plan", action="store_true")
    p.add_argument("--keep-partial", action="store_true")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("quickgen", help="schema-free entity simulation")
    p.add_argument("--entity", required=True, choices=QUICKGEN_ENTITIES)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="csv,jsonl")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(fn=cmd_quickgen)

    p = sub.add_parser("features", help="extract the 130-feature matrix")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--scale", type=float, default=1.12)
    p.add_argument("--noise", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--include-inactive", action="store_true")
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("stats", help="entity distribution of a dataset")
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
