"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion.  The full-scale dataset is generated once per session (a few
minutes) and shared between the scale checks.
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from feature_oracle import brute_force_avail_configs, oracle_features
from fixture_ledger import make_fixture
from utxosim.cli import main, _scaled
from utxosim.config import DEFAULT_CONFIG
from utxosim.errors import SimulationError
from utxosim.features import (
    FEATURE_NAMES,
    augment,
    build_views,
    cluster_common_input,
    extract_interaction,
    extract_realtime,
)
from utxosim.generators import GenRequest, TransactionEngine, execute_step, run_plan
from utxosim.ledger import (
    DUST_FLOOR,
    EntityKind,
    Ledger,
    compute_fee,
    compute_max_outputs,
)
from utxosim.mapper import compile_plan, init_outer_layer
from utxosim.schema import parse_schema

SCHEMA = Path(__file__).parent.parent / "schemas" / "e2e_laundering.csv"
EXPECTED = json.loads(
    (Path(__file__).parent / "data" / "feature_fixture_expected.json").read_text()
)


def ok(msg):
    print(f"\nACCEPTANCE PASS: {msg}")


@pytest.fixture(scope="session")
def run_10k():
    rows = _scaled(parse_schema(SCHEMA), 0.05)
    ledger = Ledger(seed=7)
    t0 = time.monotonic()
    plan = compile_plan(rows, ledger, DEFAULT_CONFIG)
    dataset = run_plan(plan, ledger, DEFAULT_CONFIG)
    elapsed = time.monotonic() - t0
    return dataset, elapsed


@pytest.fixture(scope="session")
def run_full():
    rows = parse_schema(SCHEMA)
    ledger = Ledger(seed=7)
    t0 = time.monotonic()
    plan = compile_plan(rows, ledger, DEFAULT_CONFIG)
    dataset = run_plan(plan, ledger, DEFAULT_CONFIG)
    elapsed = time.monotonic() - t0
    return dataset, elapsed


def test_conservation_and_dust_on_10k_run(run_10k):
    dataset, elapsed = run_10k
    records = dataset.records
    assert len(records) >= 10_000
    violations = 0
    for rec in records:
        in_sum = sum(rec.in_values)
        if abs(in_sum - sum(rec.out_values) - rec.fee) > 1e-6 * in_sum:
            violations += 1
        if any(v < DUST_FLOOR - 1e-9 for v in rec.out_values):
            violations += 1
    assert violations == 0
    assert elapsed < 30.0
    ok(
        f"conservation & dust: {len(records)} records, 0 violations, "
        f"generated in {elapsed:.1f}s (< 30s)"
    )


def test_fee_and_output_formulas():
    fee = compute_fee(1, 100000)
    assert abs(fee - 1984.184) <= 1e-9
    assert compute_max_outputs(100000, 1984.184) == 17
    ok("fee equation: compute_fee(1,100000)=1984.184, max outputs 17")


def test_availability_oracle_1000_configs():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        n_accounts = int(rng.integers(1, 8))
        utxo_lists = [
            [float(v) for v in rng.uniform(0, 20000, size=int(rng.integers(0, 7)))]
            for _ in range(n_accounts)
        ]
        ledger = Ledger(seed=1)
        ids = []
        for utxos in utxo_lists:
            (aid,) = ledger.init_accounts(EntityKind.LICIT, 1, 1, endow=[utxos])
            ids.append(aid)
        got = ledger.avail_general(ids)
        expected = [ids[i] for i in brute_force_avail_configs(utxo_lists)]
        assert got == expected
        checked += 1
    ok(f"availability matches brute-force re-implementation on {checked} configs")


def test_single_use_property_global_scan(run_10k):
    dataset, _ = run_10k
    sends, recvs = {}, {}
    accounts = dataset.ledger.accounts
    for rec in dataset.records:
        for aid in set(rec.inputs):
            if accounts[aid].kind is EntityKind.SINGLE_USE:
                sends[aid] = sends.get(aid, 0) + 1
        for aid in set(rec.outputs):
            if accounts[aid].kind is EntityKind.SINGLE_USE:
                recvs[aid] = recvs.get(aid, 0) + 1
    over_send = [a for a, n in sends.items() if n > 1]
    over_recv = [a for a, n in recvs.items() if n > 1]
    assert not over_send and not over_recv
    ok(
        f"single-use: {len(sends)} senders / {len(recvs)} receivers scanned, "
        "none over one use per side"
    )


def test_coinjoin_single_distinct_output_value():
    ledger = Ledger(seed=17)
    engine = TransactionEngine(ledger, DEFAULT_CONFIG)
    senders = ledger.init_accounts(
        EntityKind.LICIT, 1, 10, endow=[[4e5, 3e5, 5e5]] * 10
    )
    receivers = ledger.init_accounts(
        EntityKind.LICIT, 2, 10, endow=[[4.5e5, 3.5e5]] * 10
    )
    recs = engine.gen_coinjoin(
        GenRequest(senders=senders, receivers=receivers, quantity=5, latest_ts=10**6)
    )
    sgl_a = ledger.init_accounts(EntityKind.SINGLE_USE, 3, 12, endow=[[6e5]] * 12)
    sgl_b = ledger.init_accounts(EntityKind.SINGLE_USE, 4, 20)
    recs += engine.gen_single_use(
        "sgl_sgl",
        True,
        GenRequest(senders=sgl_a, receivers=sgl_b, quantity=6, latest_ts=10**6),
    )
    assert recs
    for rec in recs:
        assert len(set(rec.out_values)) == 1
    ok(f"coinjoin: {len(recs)} records, each with exactly one distinct output value")


def test_mixer_script_traces():
    expected = {1: (5, [3]), 2: (5, [3]), 3: (13, [4, 6, 9]), 4: (9, [3, 5, 7])}
    for subclass, (steps, funds_at) in expected.items():
        ledger = Ledger(seed=23)
        engine = TransactionEngine(ledger, DEFAULT_CONFIG)
        senders = ledger.init_accounts(
            EntityKind.INTERIM_ADDRESS, 1, 10, endow=[[2e6, 3e6]] * 10
        )
        receivers = ledger.init_accounts(EntityKind.INTERIM_ADDRESS, 2, 10)
        funds = ledger.init_accounts(EntityKind.FUNDS, 1, 6, endow=[[5e6] * 3] * 6)
        internal = ledger.init_accounts(EntityKind.MIXER, 1, 8, endow=[[2e6] * 2] * 8)
        engine.gen_mixer(
            subclass,
            GenRequest(senders=senders, receivers=receivers, quantity=steps, latest_ts=10**6),
            funds,
            internal,
        )
        entries = [t for t in engine.trace if t.mixer_subclass == subclass]
        assert len(entries) == steps, subclass
        assert [t.mixer_step for t in entries if t.funds_injected] == funds_at
    ok("mixer scripts: invocation counts {5,5,13,9}, funds at {3},{3},{4,6,9},{3,5,7}")


def test_atomic_rollback_20_random_steps():
    rows = _scaled(parse_schema(SCHEMA), 0.04)
    ledger = Ledger(seed=31)
    plan = compile_plan(rows, ledger, DEFAULT_CONFIG)
    engine = TransactionEngine(ledger, DEFAULT_CONFIG)
    init_outer_layer(plan, ledger, DEFAULT_CONFIG)
    rng = np.random.default_rng(5)
    chosen = sorted(rng.choice(len(plan.steps), size=20, replace=False))
    tested = 0

    class Boom(SimulationError):
        pass

    for step in plan.steps:
        engine._step_index = step.index
        if step.index in chosen:
            digest_before = ledger.state_digest()
            fail_at = int(rng.integers(0, 3))
            calls = {"n": 0}

            def hook(si, ti, fail_at=fail_at, calls=calls):
                calls["n"] += 1
                if calls["n"] > fail_at:
                    raise Boom("forced failure")

            engine.fault_hook = hook
            with pytest.raises(SimulationError):
                execute_step(engine, plan, step)
            engine.fault_hook = None
            assert ledger.state_digest() == digest_before, step.index
            tested += 1
        execute_step(engine, plan, step)
    assert tested == 20
    ok("atomic rollback: 20 random fault injections left the ledger digest intact")


def test_scale_full_run(run_full):
    dataset, elapsed = run_full
    n_tx = len(dataset.records)
    n_active = len(dataset.active_accounts())
    assert 200_000 * 0.8 <= n_tx <= 200_000 * 1.2
    assert 120_000 * 0.8 <= n_active <= 120_000 * 1.2
    assert elapsed < 600.0
    ok(
        f"scale: {n_tx} transactions, {n_active} active accounts "
        f"in {elapsed:.0f}s (< 600s)"
    )


def test_determinism_byte_identical(tmp_path_factory):
    digests = []
    for name in ("run_a", "run_b"):
        out = tmp_path_factory.mktemp(name)
        rc = main(
            [
                "simulate",
                "--schema",
                str(SCHEMA),
                "--seed",
                "7",
                "--out",
                str(out),
                "--scale",
                "0.05",
            ]
        )
        assert rc == 0
        rc = main(
            ["features", "--dataset", str(out), "--out", str(out / "features.csv")]
        )
        assert rc == 0
        digests.append(
            tuple(
                hashlib.sha256((out / n).read_bytes()).hexdigest()
                for n in (
                    "transactions.csv",
                    "transactions.jsonl",
                    "accounts.csv",
                    "features.csv",
                )
            )
        )
    assert digests[0] == digests[1]
    ok("determinism: identical seed/schema give byte-identical files and matrices")


def test_feature_oracle_exact():
    ledger, names = make_fixture()
    assert len(ledger.log) <= 10
    clusters = cluster_common_input(ledger.log)
    views = build_views(ledger.log, ledger.accounts)
    kind_of = {aid: a.kind for aid, a in ledger.accounts.items()}
    compared = 0
    for label, aid in names.items():
        got = extract_realtime(views[aid], clusters) + extract_interaction(
            views[aid], kind_of
        )
        fresh = oracle_features(aid, ledger.log, ledger.accounts)
        for name, value in zip(FEATURE_NAMES, got):
            assert value == EXPECTED[label][name], (label, name)
            assert fresh[name] == EXPECTED[label][name], (label, name)
            compared += 1
    assert compared == 130 * len(names)
    ok(
        f"feature oracle: {compared} values across {len(names)} accounts "
        "match the frozen hand-computed oracle exactly"
    )


def test_augmentation_bounds_100k():
    rng = np.random.default_rng(77)
    values = rng.uniform(1.0, 1e6, size=100_000)
    out = augment(values, scale=1.12, noise_frac=0.10, seed=3)
    lo = values * 1.12 * 0.9
    hi = values * 1.12 * 1.1
    assert np.all(out >= lo - 1e-9) and np.all(out <= hi + 1e-9)
    ok("augmentation: 100000 values inside [v*1.12*0.9, v*1.12*1.1]")
