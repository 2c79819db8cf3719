"""Compile a validated schema into an executable plan.

Discovers unique entities, sizes and creates address pools, plans
boundary (outer-layer) funding for pools that never receive in-schema,
and maps every row onto a generator through an ordered check sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_LABELS, SimConfig
from .errors import CompileError, InsufficientFundsError
from .ledger import EntityKind, Ledger, RandomSplit, compute_fee, compute_max_outputs
from .schema import EntitySpec, SchemaRow

SECONDS_PER_DAY = 86400

# Mixer scripts: per subclass, ordered steps of
# (source pool, destination pool, step kind, funds_injection).
# Symbolic pools: S/R external sender/receiver, F funds reserve,
# G internal general layer, U<n> fresh single-use layers.
MIXER_SCRIPTS: dict[int, list[tuple[str, str, str, bool]]] = {
    1: [
        ("S", "U1", "gen_sgl", False),
        ("U1", "U2", "sgl_sgl", False),
        ("F", "G", "gen_gen", True),
        ("U2", "G", "sgl_gen", False),
        ("G", "R", "regular", False),
    ],
    2: [
        ("S", "U1", "gen_sgl", False),
        ("U1", "U2", "sgl_sgl_cj", False),
        ("F", "U3", "gen_sgl", True),
        ("U2+U3", "U4", "sgl_sgl_cj", False),
        ("U4", "R", "sgl_gen", False),
    ],
    3: [
        ("S", "U1", "gen_sgl", False),
        ("U1", "U2", "sgl_sgl", False),
        ("U2", "U3", "sgl_sgl_cj", False),
        ("F", "U4", "gen_sgl", True),
        ("U3+U4", "U5", "sgl_sgl", False),
        ("F", "U6", "gen_sgl", True),
        ("U5+U6", "U7", "sgl_sgl_cj", False),
        ("U7", "G", "sgl_gen", False),
        ("F", "G", "gen_gen", True),
        ("G", "U8", "gen_sgl", False),
        ("U8", "U9", "sgl_sgl_cj", False),
        ("U9", "U10", "sgl_sgl", False),
        ("U10", "R", "sgl_gen", False),
    ],
    4: [
        ("S", "U1", "gen_sgl_cj", False),
        ("U1", "G", "sgl_gen_cj", False),
        ("F", "G", "gen_gen", True),
        ("G", "G", "coinjoin", False),
        ("F", "U2", "gen_sgl", True),
        ("U2", "G", "sgl_gen_cj", False),
        ("F", "G", "gen_gen", True),
        ("G", "G", "coinjoin", False),
        ("G", "R", "regular", False),
    ],
}

MIXER_FUNDS_STEPS = {
    sub: [i for i, step in enumerate(script, start=1) if step[3]]
    for sub, script in MIXER_SCRIPTS.items()
}


@dataclass
class EntityStats:
    spec: EntitySpec
    occurrences: int = 0
    as_sender: int = 0
    as_receiver: int = 0
    total_quantity: int = 0


@dataclass(frozen=True)
class PlanStep:
    index: int
    generator: str
    sender: EntitySpec
    receiver: EntitySpec
    quantity: int
    latest_ts: int
    min_inputs: int = 1
    cj_variant: bool = False
    side_pattern: tuple[int, int] | None = None
    mixer_subclass: int = 0


@dataclass(frozen=True)
class SeedSpec:
    pool_key: str
    target_utxos: int


@dataclass
class ExecutionPlan:
    pools: dict[EntitySpec, list[str]]
    aux_pools: dict[str, list[str]]
    steps: list[PlanStep]
    seed_specs: list[SeedSpec]
    outer_pool: list[str]
    oldest_ts: int
    seed: int

    def pool_for(self, key: str | EntitySpec) -> list[str]:
        if isinstance(key, EntitySpec):
            return self.pools[key]
        return self.aux_pools[key]

    def to_jsonable(self) -> dict:
        return {
            "seed": self.seed,
            "oldest_ts": self.oldest_ts,
            "pools": {str(k): len(v) for k, v in self.pools.items()},
            "aux_pools": {k: len(v) for k, v in self.aux_pools.items()},
            "outer_pool": len(self.outer_pool),
            "seed_specs": [
                {"pool": s.pool_key, "target_utxos": s.target_utxos}
                for s in self.seed_specs
            ],
            "steps": [
                {
                    "index": s.index,
                    "generator": s.generator,
                    "sender": str(s.sender),
                    "receiver": str(s.receiver),
                    "quantity": s.quantity,
                    "latest_ts": s.latest_ts,
                    "min_inputs": s.min_inputs,
                    "cj_variant": s.cj_variant,
                    "side_pattern": s.side_pattern,
                    "mixer_subclass": s.mixer_subclass,
                }
                for s in self.steps
            ],
        }


def collect_entities(rows: list[SchemaRow]) -> list[EntityStats]:
    """One stats entry per unique (kind, instance), in appearance order."""
    stats: dict[EntitySpec, EntityStats] = {}
    for row in rows:
        seen_in_row: set[EntitySpec] = set()
        for spec, is_sender in ((row.sender, True), (row.receiver, False)):
            st = stats.setdefault(spec, EntityStats(spec=spec))
            st.occurrences += 1
            if is_sender:
                st.as_sender += 1
            else:
                st.as_receiver += 1
            if spec not in seen_in_row:
                st.total_quantity += row.quantity
                seen_in_row.add(spec)
    return list(stats.values())


def size_pools(
    stats: list[EntityStats], rows: list[SchemaRow], cfg: SimConfig
) -> dict[EntitySpec, int]:
    """Address-pool size per entity.

    General pools scale with transaction volume; single-use pools get one
    address per projected use (two uses per transaction per side).
    """
    sizes: dict[EntitySpec, int] = {}
    for st in stats:
        if st.spec.kind is EntityKind.SINGLE_USE:
            uses = 0
            for row in rows:
                if row.sender == st.spec:
                    uses += row.quantity * cfg.sgl_uses_per_tx
                if row.receiver == st.spec:
                    uses += row.quantity * cfg.sgl_uses_per_tx
            sizes[st.spec] = max(uses, cfg.pool_size_min)
        else:
            sizes[st.spec] = min(
                max(
                    math.ceil(st.total_quantity * cfg.pool_size_frac),
                    cfg.pool_size_min,
                ),
                cfg.pool_size_max,
            )
    return sizes


def _map_generator(
    row: SchemaRow,
    sizes: dict[EntitySpec, int],
    mixer_counters: dict[int, int],
    cfg: SimConfig,
) -> PlanStep:
    """The ordered check sequence deciding which generator serves a row."""
    s, r = row.sender, row.receiver
    sk, rk = s.kind, r.kind
    cj = sizes.get(s, 0) == sizes.get(r, 0)
    common = dict(
        index=0,
        sender=s,
        receiver=r,
        quantity=row.quantity,
        latest_ts=row.latest_ts,
        min_inputs=row.min_inputs,
    )
    if sk is EntityKind.SINGLE_USE and rk is EntityKind.SINGLE_USE:
        return PlanStep(generator="sgl_sgl", cj_variant=cj, **common)
    if sk is EntityKind.SINGLE_USE:
        return PlanStep(generator="sgl_gen", cj_variant=cj, **common)
    if rk is EntityKind.SINGLE_USE:
        return PlanStep(generator="gen_sgl", cj_variant=cj, **common)
    if rk is EntityKind.ESCROW:
        return PlanStep(generator="p2p_leg", **common)
    if sk is EntityKind.ESCROW:
        return PlanStep(generator="escrow_settle", **common)
    if rk is EntityKind.CRYPTO_LENDING:
        return PlanStep(generator="dli", **common)
    if sk is EntityKind.CRYPTO_LENDING:
        return PlanStep(generator="ild", **common)
    if EntityKind.MIXER in (sk, rk):
        instance = s.instance if sk is EntityKind.MIXER else r.instance
        count = mixer_counters.get(instance, 0)
        mixer_counters[instance] = count + 1
        return PlanStep(generator="mixer", mixer_subclass=count % 4 + 1, **common)
    if s == r:
        return PlanStep(generator="inout", **common)
    if sk is rk:
        return PlanStep(generator="gen_gen", side_pattern=cfg.gen_pattern, **common)
    return PlanStep(generator="regular", **common)


def _consumption_estimate(step: PlanStep, cfg: SimConfig) -> int:
    """Projected eligible-UTXO draws from the sender pool for one step."""
    mean_inputs = (step.min_inputs + cfg.input_cap) / 2
    if step.generator == "mixer":
        per_step = max(1, step.quantity // len(MIXER_SCRIPTS[step.mixer_subclass]))
        return math.ceil(per_step * mean_inputs)
    if step.generator == "gen_gen" and step.side_pattern:
        return step.quantity * step.side_pattern[0]
    if step.generator == "p2p_leg":
        return step.quantity * 3
    if step.generator == "coinjoin":
        return step.quantity * 8
    return math.ceil(step.quantity * mean_inputs)


def compile_plan(
    rows: list[SchemaRow], ledger: Ledger, cfg: SimConfig
) -> ExecutionPlan:
    """Create pools and map rows to generator steps.

    Deterministic given (rows, ledger seed): pools are allocated in
    entity appearance order and steps preserve row order.
    """
    if not rows:
        return ExecutionPlan(
            pools={},
            aux_pools={},
            steps=[],
            seed_specs=[],
            outer_pool=[],
            oldest_ts=0,
            seed=ledger.seed,
        )
    stats = collect_entities(rows)
    sizes = size_pools(stats, rows, cfg)
    receives_somewhere = {r.receiver for r in rows}

    mixer_counters: dict[int, int] = {}
    steps = []
    for i, row in enumerate(rows):
        step = _map_generator(row, sizes, mixer_counters, cfg)
        if step.sender.kind is EntityKind.OUTER_LAYER or (
            step.receiver.kind is EntityKind.OUTER_LAYER
        ):
            raise CompileError(f"row {i + 1}: outer-layer entities are internal")
        steps.append(
            PlanStep(**{**step.__dict__, "index": i})
        )

    # Single-use pools inherit the licit/illicit category of the flow
    # that created them: the first row that mentions them alongside a
    # non-single-use counterparty decides.
    provenance: dict[EntitySpec, str] = {}
    for row in rows:
        for spec, other in (
            (row.sender, row.receiver),
            (row.receiver, row.sender),
        ):
            if spec.kind is not EntityKind.SINGLE_USE or spec in provenance:
                continue
            if other.kind is not EntityKind.SINGLE_USE:
                provenance[spec] = (
                    "illicit"
                    if other.kind.value in DEFAULT_LABELS.illicit
                    else "licit"
                )
            elif other in provenance:
                provenance[spec] = provenance[other]
    pools: dict[EntitySpec, list[str]] = {}
    for st in stats:
        pools[st.spec] = ledger.init_accounts(
            st.spec.kind,
            st.spec.instance,
            sizes[st.spec],
            provenance=provenance.get(st.spec, "illicit")
            if st.spec.kind is EntityKind.SINGLE_USE
            else None,
        )

    # Auxiliary pools: mixer internals and reserves, lending investors,
    # a decentralized-exchange fee account per escrow instance.
    aux_pools: dict[str, list[str]] = {}
    aux_targets: dict[str, int] = {}
    for step in steps:
        if step.generator == "mixer":
            inst = (
                step.sender.instance
                if step.sender.kind is EntityKind.MIXER
                else step.receiver.instance
            )
            fkey, gkey = f"mixer_funds:{inst}", f"mixer_internal:{inst}"
            if fkey not in aux_pools:
                aux_pools[fkey] = ledger.init_accounts(
                    EntityKind.FUNDS, 1000 + inst, cfg.pool_size_min
                )
                aux_pools[gkey] = ledger.init_accounts(
                    EntityKind.MIXER, 1000 + inst, cfg.pool_size_min
                )
                aux_targets[fkey] = 0
            script = MIXER_SCRIPTS[step.mixer_subclass]
            per_step = max(1, step.quantity // len(script))
            n_inj = len(MIXER_FUNDS_STEPS[step.mixer_subclass])
            aux_targets[fkey] += math.ceil(
                per_step * n_inj * (1 + cfg.input_cap) / 2
            )
            # the internal layer feeds coinjoins and onward hops
            aux_targets[gkey] = aux_targets.get(gkey, 0) + 12 + (
                8 * per_step if step.mixer_subclass == 4 else 0
            )
        elif step.generator == "dli":
            inst = step.receiver.instance
            key = f"lending_investors:{inst}"
            if key not in aux_pools:
                aux_pools[key] = ledger.init_accounts(
                    EntityKind.BUSINESS, 1000 + inst, cfg.pool_size_min
                )
        elif step.generator == "ild":
            inst = step.sender.instance
            key = f"lending_investors:{inst}"
            if key not in aux_pools:
                aux_pools[key] = ledger.init_accounts(
                    EntityKind.BUSINESS, 1000 + inst, cfg.pool_size_min
                )
            aux_targets[key] = aux_targets.get(key, 0) + math.ceil(
                step.quantity * (1 + cfg.input_cap) / 2
            )
        elif step.generator in ("p2p_leg", "escrow_settle"):
            inst = (
                step.receiver.instance
                if step.generator == "p2p_leg"
                else step.sender.instance
            )
            key = f"escrow_dex:{inst}"
            if key not in aux_pools:
                aux_pools[key] = ledger.init_accounts(
                    EntityKind.DECENTRALIZED_EXCHANGE, 1000 + inst, 2
                )

    # Boundary funding: pools that only ever send, plus reserves.
    oldest_ts = min(r.latest_ts for r in rows)
    demand: dict[str, int] = {}
    for step in steps:
        spec = step.sender
        if step.generator == "escrow_settle":
            ekey = f"escrow_reserve:{spec.instance}"
            demand[ekey] = demand.get(ekey, 0) + math.ceil(step.quantity * 1.2) + 10
            continue
        if step.generator in ("sgl_sgl", "sgl_gen", "ild"):
            continue  # funded in-schema (validation guarantees it)
        if spec in receives_somewhere or spec.kind in (
            EntityKind.SINGLE_USE,
            EntityKind.ESCROW,
        ):
            continue
        key = f"pool:{spec.kind.value}:{spec.instance}"
        demand[key] = demand.get(key, 0) + _consumption_estimate(step, cfg)

    seed_specs = []
    for key, raw in demand.items():
        seed_specs.append(
            SeedSpec(pool_key=key, target_utxos=math.ceil(raw * cfg.seed_headroom))
        )
    for key, raw in aux_targets.items():
        if raw > 0:
            seed_specs.append(
                SeedSpec(
                    pool_key=key, target_utxos=math.ceil(raw * cfg.seed_headroom)
                )
            )

    # Escrow reserves map onto the escrow schema pools themselves.
    total_seed_utxos = sum(s.target_utxos for s in seed_specs)
    est_seed_txs = math.ceil(total_seed_utxos / 8) + len(seed_specs)
    mean_endowment = (cfg.seed_utxos_min + cfg.seed_utxos_max) / 2
    outer_count = max(4, math.ceil(est_seed_txs * 3 / mean_endowment))
    endowments = []
    lo, hi = math.log(cfg.seed_value_low), math.log(cfg.seed_value_high)
    for _ in range(outer_count):
        n = int(ledger.rng.integers(cfg.seed_utxos_min, cfg.seed_utxos_max + 1))
        endowments.append(np.exp(ledger.rng.uniform(lo, hi, size=n)).tolist())
    outer_pool = ledger.init_accounts(
        EntityKind.OUTER_LAYER, 1, outer_count, endow=endowments
    )

    return ExecutionPlan(
        pools=pools,
        aux_pools=aux_pools,
        steps=steps,
        seed_specs=seed_specs,
        outer_pool=outer_pool,
        oldest_ts=oldest_ts,
        seed=ledger.seed,
    )


def resolve_seed_pool(plan: ExecutionPlan, key: str) -> list[str]:
    """Map a seed-spec key back to the account ids it funds."""
    prefix, _, rest = key.partition(":")
    if prefix == "pool":
        kind_name, _, instance = rest.partition(":")
        spec = EntitySpec(kind=EntityKind(kind_name), instance=int(instance))
        return plan.pools[spec]
    if prefix == "escrow_reserve":
        for spec, ids in plan.pools.items():
            if spec.kind is EntityKind.ESCROW and spec.instance == int(rest):
                return ids
        raise CompileError(f"no escrow pool for reserve key {key}")
    return plan.aux_pools[key]


def init_outer_layer(
    plan: ExecutionPlan, ledger: Ledger, cfg: SimConfig
) -> list:
    """Fund the seed-spec pools from outer-layer accounts.

    Regular transactions timestamped uniformly inside the window
    [oldest_ts - seed_window_days, oldest_ts - 1 day].  Returns the
    committed records.
    """
    if not plan.seed_specs:
        return []
    window_lo = plan.oldest_ts - cfg.seed_window_days * SECONDS_PER_DAY
    window_hi = plan.oldest_ts - SECONDS_PER_DAY
    records = []
    for spec in plan.seed_specs:
        pool = resolve_seed_pool(plan, spec.pool_key)
        delivered = 0
        participants = plan.outer_pool + pool
        lower = max(
            window_lo, max(ledger.accounts[a].last_time for a in participants)
        )
        n_ts = math.ceil(spec.target_utxos / 4) + 4
        timestamps = ledger.sample_timestamps(n_ts, lower, window_hi, "uniform")
        ts_idx = 0
        # availability maintained incrementally: one entry per spendable
        # UTXO, removed as it is consumed
        ac = ledger.avail_general(plan.outer_pool)
        while delivered < spec.target_utxos:
            if not ac:
                raise InsufficientFundsError(
                    "outer-layer pool exhausted while funding "
                    f"{spec.pool_key}; raise seed_utxos_max"
                )
            k = int(ledger.rng.integers(1, min(3, len(ac)) + 1))
            chosen = []
            for _ in range(k):
                i = int(ledger.rng.integers(len(ac)))
                ac[i], ac[-1] = ac[-1], ac[i]
                chosen.append(ac.pop())
            in_values = [ledger.spend_utxo(a) for a in chosen]
            in_sum = sum(in_values)
            fee = compute_fee(k, in_sum)
            m = compute_max_outputs(in_sum, fee)
            rem = in_sum - fee
            n_out = min(
                cfg.output_cap,
                len(pool),
                m,
                int(rem / cfg.seed_min_out),
                spec.target_utxos - delivered,
            )
            n_out = max(n_out, 1)
            receivers = [
                pool[i]
                for i in ledger.rng.choice(len(pool), size=n_out, replace=False)
            ]
            rec = ledger.apply_update(
                chosen,
                receivers,
                in_values,
                fee,
                timestamps[min(ts_idx, len(timestamps) - 1)],
                RandomSplit(min_out=min(cfg.seed_min_out, rem / n_out)),
            )
            ts_idx += 1
            records.append(rec)
            delivered += n_out
    return records
