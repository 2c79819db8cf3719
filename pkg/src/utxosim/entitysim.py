"""Schema-free, ready-use entity simulators.

Each entity builds a small internal plan (synthesized schema rows), maps
it through the regular compiler and runs it, so pools, boundary funding
and timestamps are auto-initialized.  Only the number of transactions is
required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import SimConfig, DEFAULT_CONFIG
from .errors import ConfigError, SimulationError
from .generators import Dataset, run_plan
from .ledger import Ledger
from .mapper import compile_plan
from .schema import SchemaRow, parse_entity_spec, parse_timestamp

QUICKGEN_ENTITIES = ("mixer", "exchange", "p2p_escrow", "nested_exchange", "licit")

DAY = 86400
DEFAULT_BASE_TS = parse_timestamp("2020-06-01")


@dataclass(frozen=True)
class QuickGenConfig:
    entity: str
    count: int
    seed: int
    base_ts: int = DEFAULT_BASE_TS

    def __post_init__(self) -> None:
        if self.entity not in QUICKGEN_ENTITIES:
            raise ConfigError(
                f"unknown entity {self.entity!r}; pick one of {QUICKGEN_ENTITIES}"
            )
        if self.count < 1:
            raise ConfigError("count must be >= 1")


def _row(sender: str, receiver: str, quantity: int, ts: int) -> SchemaRow:
    return SchemaRow(
        sender=parse_entity_spec(sender),
        receiver=parse_entity_spec(receiver),
        quantity=max(1, quantity),
        latest_ts=ts,
    )


def _licit_rows(cfg: QuickGenConfig) -> list[SchemaRow]:
    q = math.ceil(cfg.count / 3)
    t = cfg.base_ts
    return [
        _row("Licit 1", "Licit 2", q, t),
        _row("Licit 2", "Licit 3", q, t + DAY),
        _row("Licit 3", "Licit 4", q, t + 2 * DAY),
    ]


def _mixer_rows(cfg: QuickGenConfig) -> list[SchemaRow]:
    # four rows so the round-robin covers every mixer sub-class
    q = math.ceil(cfg.count / 4)
    t = cfg.base_ts
    return [
        _row("Interim 1", "Mixer 1", q, t),
        _row("Mixer 1", "Interim 2", q, t + DAY),
        _row("Interim 2", "Mixer 1", q, t + 2 * DAY),
        _row("Mixer 1", "Interim 3", q, t + 3 * DAY),
    ]


def _exchange_rows(cfg: QuickGenConfig, sim: SimConfig) -> list[SchemaRow]:
    rotation = sim.service_rotation_period
    generations = max(1, math.ceil(cfg.count / rotation))
    rows = []
    t = cfg.base_ts
    for g in range(1, generations + 1):
        fund = max(1, math.ceil(rotation * 0.4))
        serve = max(1, rotation - fund)
        rows.append(_row("Exchange 1", f"Service address {g}", fund, t))
        rows.append(_row(f"Service address {g}", "Licit 1", serve, t + DAY // 2))
        t += DAY
    return rows


def _p2p_rows(cfg: QuickGenConfig) -> list[SchemaRow]:
    q = math.ceil(cfg.count / 3)
    t = cfg.base_ts
    return [
        _row("Business 1", "Escrow 1", q, t),
        _row("Mule 1", "Escrow 1", q, t + DAY),
        _row("Escrow 1", "DEX 1", q, t + 2 * DAY),
    ]


def _nested_rows(cfg: QuickGenConfig, ledger: Ledger) -> list[SchemaRow]:
    hops = int(
        ledger.rng.integers(
            DEFAULT_CONFIG.nested_hops_min, DEFAULT_CONFIG.nested_hops_max + 1
        )
    )
    q = math.ceil(cfg.count / hops)
    rows = []
    t = cfg.base_ts
    for h in range(hops):
        exchange_instance = h // 2 + 1
        if h % 2 == 0:
            src = f"Nested service address {h // 2 + 1}"
            dst = f"Service address {exchange_instance}"
        else:
            src = f"Service address {exchange_instance}"
            dst = f"Nested service address {h // 2 + 2}"
        rows.append(_row(src, dst, q, t))
        t += DAY
    return rows


def quickgen(cfg: QuickGenConfig, sim_cfg: SimConfig = DEFAULT_CONFIG) -> Dataset:
    """Generate at least ``cfg.count`` transactions for one entity profile."""
    last_error: SimulationError | None = None
    for attempt in range(3):
        ledger = Ledger(seed=cfg.seed + attempt * 1_000_003)
        if cfg.entity == "licit":
            rows = _licit_rows(cfg)
        elif cfg.entity == "mixer":
            rows = _mixer_rows(cfg)
        elif cfg.entity == "exchange":
            rows = _exchange_rows(cfg, sim_cfg)
        elif cfg.entity == "p2p_escrow":
            rows = _p2p_rows(cfg)
        else:
            rows = _nested_rows(cfg, ledger)
        plan = compile_plan(rows, ledger, sim_cfg)
        try:
            dataset = run_plan(plan, ledger, sim_cfg)
        except SimulationError as exc:
            last_error = exc
            continue
        if len(dataset.records) >= cfg.count:
            return dataset
        last_error = SimulationError(
            f"only {len(dataset.records)} of {cfg.count} records generated"
        )
    raise SimulationError(
        f"quickgen({cfg.entity}) failed after 3 attempts: {last_error}"
    )
