"""Behavior-embedded UTXO money-laundering transaction simulator."""

__version__ = "0.1.0"

from .config import DEFAULT_CONFIG, DEFAULT_LABELS, LabelConfig, SimConfig
from .ledger import (
    AVAIL_THRESHOLD,
    DUST_FLOOR,
    Account,
    EntityKind,
    EqualSplit,
    FixedFeeSplit,
    Ledger,
    ProportionalSplit,
    RandomSplit,
    TransactionRecord,
    compute_fee,
    compute_max_outputs,
)
from .schema import EntitySpec, SchemaRow, parse_entity_spec, parse_schema, validate_schema
from .mapper import ExecutionPlan, collect_entities, compile_plan, init_outer_layer, size_pools
from .generators import Dataset, GenRequest, TransactionEngine, run_plan
from .entitysim import QuickGenConfig, quickgen
from .features import (
    FEATURE_NAMES,
    MANIFEST,
    assign_label,
    augment,
    cluster_common_input,
    compute_feature_matrix,
    extract_interaction,
    extract_realtime,
    write_feature_csv,
)
from .dataio import RunManifest, read_accounts, read_transactions, write_dataset

__all__ = [
    "AVAIL_THRESHOLD",
    "DUST_FLOOR",
    "FEATURE_NAMES",
    "MANIFEST",
    "Account",
    "Dataset",
    "DEFAULT_CONFIG",
    "DEFAULT_LABELS",
    "EntityKind",
    "EntitySpec",
    "EqualSplit",
    "ExecutionPlan",
    "FixedFeeSplit",
    "GenRequest",
    "LabelConfig",
    "Ledger",
    "ProportionalSplit",
    "QuickGenConfig",
    "RandomSplit",
    "RunManifest",
    "SchemaRow",
    "SimConfig",
    "TransactionEngine",
    "TransactionRecord",
    "assign_label",
    "augment",
    "cluster_common_input",
    "collect_entities",
    "compile_plan",
    "compute_fee",
    "compute_feature_matrix",
    "compute_max_outputs",
    "extract_interaction",
    "extract_realtime",
    "init_outer_layer",
    "parse_entity_spec",
    "parse_schema",
    "quickgen",
    "read_accounts",
    "read_transactions",
    "run_plan",
    "size_pools",
    "validate_schema",
    "write_dataset",
    "write_feature_csv",
]
