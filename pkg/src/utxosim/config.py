"""Tunable simulation parameters.

Constants that come straight from the transaction model (dust floor,
availability threshold, the fee equation coefficients) live in
:mod:`utxosim.ledger` and are not configurable.  Everything here is a
knob with a documented default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class SimConfig:
    # Transaction shape caps.  Input count is sampled in
    # [min_inputs, min(input_cap, available)]; output count is
    # min(max_outputs, eligible receivers, output_cap).
    input_cap: int = 10
    output_cap: int = 20

    # Output counts also respect a typical output size so that chained
    # flows do not fan value down into the sub-8000 (unspendable) zone
    # within a few hops.  Splits themselves still bottom out at the dust
    # floor, so sub-8000 outputs remain possible.
    target_out_value: float = 22000.0

    # Single-use sides get tighter caps so pool sizing (2 uses per
    # address per side on average) stays an upper bound at runtime.
    # One input per single-use send keeps chain hop counts stable.
    sgl_input_cap: int = 1
    sgl_output_cap: int = 2

    # Preferred per-output value for chain-internal steps (mixer layers,
    # single-use hops).  Well above the 8000 availability threshold so a
    # hop's children survive several fee deductions; when a hop cannot
    # afford it, it degrades to a single output above the dust floor.
    chain_min_out: float = 50000.0

    # Escrow / decentralized-exchange rates.
    escrow_platform_fee_rate: float = 0.01
    escrow_deposit_rate: float = 0.10

    # Crypto-lending rates.
    lender_retain_rate: float = 0.05
    depositor_interest_rate: float = 0.02

    # Value draws (trade amounts, endowments) are log-uniform in
    # [value_low, value_high] satoshis.
    value_low: float = 2e4
    value_high: float = 1e8

    # Outer-layer seeding: endowed UTXO count per boundary account and
    # headroom multiplier on projected input consumption.
    seed_utxos_min: int = 10
    seed_utxos_max: int = 40
    seed_headroom: float = 1.5
    seed_min_out: float = 2e4
    seed_value_low: float = 1e5
    seed_value_high: float = 1e8
    seed_window_days: int = 90

    # Pool sizing: non-single-use pool = clamp(ceil(frac * quantity)).
    pool_size_frac: float = 0.05
    pool_size_min: int = 10
    pool_size_max: int = 5000
    # Expected outputs (and inputs) per transaction used when sizing
    # single-use pools; runtime caps above keep this an upper bound.
    sgl_uses_per_tx: int = 2

    # Default side pattern for patterned general->general rows.
    gen_pattern: tuple[int, int] = (1, 1)

    # Entity-simulator knobs.
    service_rotation_period: int = 50
    nested_hops_min: int = 3
    nested_hops_max: int = 7

    # Feature augmentation defaults.
    augment_scale: float = 1.12
    augment_noise: float = 0.10

    def digest(self) -> str:
        """Stable hex digest of the configuration for run manifests."""
        payload = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()


DEFAULT_CONFIG = SimConfig()


@dataclass(frozen=True)
class LabelConfig:
    """Entity-kind to licit/illicit mapping.

    Single-use addresses are not listed: they inherit the category of
    the flow that created them.
    """

    illicit: frozenset[str] = frozenset(
        {
            "Mixer",
            "NestedExchange",
            "NestedServiceAddress",
            "InterimAddress",
            "Funds",
            "Business",
            "CryptoLending",
        }
    )
    licit: frozenset[str] = frozenset(
        {
            "Licit",
            "Exchange",
            "DecentralizedExchange",
            "Escrow",
            "ServiceAddress",
            "Mule",
            "OuterLayer",
        }
    )

    @classmethod
    def from_file(cls, path: str) -> "LabelConfig":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(
            illicit=frozenset(raw["illicit"]), licit=frozenset(raw["licit"])
        )


DEFAULT_LABELS = LabelConfig()
