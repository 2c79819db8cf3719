"""Per-account feature extraction: 70 real-time + 60 interaction attributes.

The manifest is versioned: feature order and names are fixed, and the
manifest hash is embedded in every exported matrix.  Real-time features
only use what is observable from an account's own transactions (plus the
common-input cluster it belongs to); interaction features additionally
use counterparty entity kinds, i.e. simulation ground truth.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import LabelConfig, DEFAULT_LABELS
from .errors import ConfigError
from .ledger import Account, EntityKind, TransactionRecord

MANIFEST_VERSION = 1

AGGREGATES = ("min", "max", "mean", "std", "sum")

STREAMS = (
    ("sent_value", "value contributed as a sender, per sending tx"),
    ("recv_value", "value received, per receiving tx"),
    ("sent_fee", "fee of each tx the account helped send"),
    ("sent_inputs", "input count of each sending tx"),
    ("sent_outputs", "output count of each sending tx"),
    ("recv_inputs", "input count of each receiving tx"),
    ("recv_outputs", "output count of each receiving tx"),
    ("gap_seconds", "seconds between consecutive involving txs"),
    ("utxo_hold_seconds", "receipt-to-spend time of each matched UTXO"),
)

COUNTS = (
    ("n_tx_sent", "transactions with the account on the input side", False),
    ("n_tx_recv", "transactions with the account on the output side", False),
    ("n_tx_total", "transactions involving the account on either side", False),
    ("n_in_counterparties", "distinct accounts that ever paid this one", False),
    ("n_out_counterparties", "distinct accounts this one ever paid", False),
    ("n_equal_output_tx", "involving txs (>=2 outputs) with one distinct output value", True),
    ("n_single_output_tx", "involving txs with exactly one output", False),
    ("n_multi_input_tx", "involving txs with two or more inputs", False),
    ("n_dust_receipts", "received outputs below 8000 satoshis", True),
    ("n_both_sides_tx", "txs with the account on both sides", True),
)

SCALARS = (
    ("lifetime_span_seconds", "last seen minus first seen", False),
    ("activity_rate_per_day", "involving txs per active day (min one day)", False),
    ("final_balance", "sum of the account's UTXO set at the end of the log", False),
    ("net_flow", "received total minus sent total", False),
    ("sent_recv_ratio", "sent total over received total (0 when nothing received)", False),
    ("mean_counterparties_per_tx", "mean distinct other accounts per involving tx", False),
    ("top_counterparty_value_fraction", "share of sent value going to the heaviest receiver", True),
    ("first_seen_offset_seconds", "first activity minus dataset start", False),
    ("last_seen_offset_seconds", "dataset end minus last activity", False),
    ("ever_sent", "1 if the account ever sent", False),
    ("ever_received", "1 if the account ever received", False),
)

CLUSTER_FEATURES = (
    ("cluster_size", "accounts sharing an input-side cluster with this one"),
    ("cluster_tx_count", "distinct txs touching any cluster member"),
    ("cluster_total_volume", "summed output value of those txs"),
    ("cluster_n_counterparties", "distinct non-member accounts in those txs"),
)

INTERACTION_MEASURES = (
    ("sent_tx_to", "txs in which the account sent to this entity kind"),
    ("recv_tx_from", "txs in which the account received from this entity kind"),
    ("value_sent_to", "output value delivered to this entity kind while sending"),
    ("value_recv_from", "input value contributed by this entity kind while receiving"),
)


def realtime_feature_names() -> list[str]:
    names = [f"{s}_{a}" for s, _ in STREAMS for a in AGGREGATES]
    names += [n for n, _, _ in COUNTS]
    names += [n for n, _, _ in SCALARS]
    names += [n for n, _ in CLUSTER_FEATURES]
    return names


def interaction_feature_names() -> list[str]:
    return [
        f"{m}_{kind.value}"
        for kind in EntityKind
        for m, _ in INTERACTION_MEASURES
    ]


def feature_manifest() -> dict:
    """The versioned description of all 130 features, with a stable hash."""
    entries = []
    for stream, desc in STREAMS:
        for agg in AGGREGATES:
            entries.append(
                {
                    "name": f"{stream}_{agg}",
                    "category": "realtime/aggregate",
                    "definition": f"{agg} of: {desc} (0 when the stream is empty)",
                    "red_flag": False,
                }
            )
    for name, desc, red in COUNTS:
        entries.append(
            {"name": name, "category": "realtime/count", "definition": desc, "red_flag": red}
        )
    for name, desc, red in SCALARS:
        entries.append(
            {"name": name, "category": "realtime/scalar", "definition": desc, "red_flag": red}
        )
    for name, desc in CLUSTER_FEATURES:
        entries.append(
            {"name": name, "category": "realtime/cluster", "definition": desc, "red_flag": False}
        )
    for kind in EntityKind:
        for measure, desc in INTERACTION_MEASURES:
            entries.append(
                {
                    "name": f"{measure}_{kind.value}",
                    "category": "interaction",
                    "definition": f"{desc}: {kind.value}",
                    "red_flag": kind in (EntityKind.MIXER, EntityKind.FUNDS),
                }
            )
    payload = json.dumps(entries, sort_keys=True).encode()
    return {
        "version": MANIFEST_VERSION,
        "features": entries,
        "hash": hashlib.sha256(payload).hexdigest(),
    }


MANIFEST = feature_manifest()
FEATURE_NAMES = realtime_feature_names() + interaction_feature_names()
assert len(realtime_feature_names()) == 70
assert len(interaction_feature_names()) == 60


# --- clustering --------------------------------------------------------


@dataclass
class ClusterStats:
    size: int
    tx_count: int
    volume: float
    counterparties: int


@dataclass
class ClusterAssignment:
    account_to_cluster: dict[str, int]
    members: dict[int, list[str]]
    stats: dict[int, ClusterStats] = field(default_factory=dict)


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def cluster_common_input(records: list[TransactionRecord]) -> ClusterAssignment:
    """Common-input-ownership heuristic: inputs of one tx share an owner.

    The returned assignment also carries per-cluster statistics so that
    per-account extraction needs no second pass over the log.
    """
    uf = _UnionFind()
    seen: list[str] = []
    seen_set: set[str] = set()
    for rec in records:
        first = rec.inputs[0]
        for aid in rec.inputs:
            uf.union(first, aid)
        for aid in rec.inputs + rec.outputs:
            if aid not in seen_set:
                seen_set.add(aid)
                seen.append(aid)
    roots: dict[str, int] = {}
    assignment: dict[str, int] = {}
    members: dict[int, list[str]] = {}
    for aid in seen:
        root = uf.find(aid)
        cid = roots.setdefault(root, len(roots))
        assignment[aid] = cid
        members.setdefault(cid, []).append(aid)

    tx_count: dict[int, int] = {}
    volume: dict[int, float] = {}
    outsiders: dict[int, set[str]] = {}
    for rec in records:
        involved = list(dict.fromkeys(rec.inputs + rec.outputs))
        touched = {assignment[aid] for aid in involved}
        vol = sum(rec.out_values)
        for cid in touched:
            tx_count[cid] = tx_count.get(cid, 0) + 1
            volume[cid] = volume.get(cid, 0.0) + vol
            outsiders.setdefault(cid, set()).update(
                aid for aid in involved if assignment[aid] != cid
            )
    stats = {
        cid: ClusterStats(
            size=len(m),
            tx_count=tx_count.get(cid, 0),
            volume=volume.get(cid, 0.0),
            counterparties=len(outsiders.get(cid, ())),
        )
        for cid, m in members.items()
    }
    return ClusterAssignment(
        account_to_cluster=assignment, members=members, stats=stats
    )


# --- per-account views -----------------------------------------------------


@dataclass
class AccountView:
    """An account plus every transaction it took part in (1-hop scope:
    neighborhood context enters through the cluster statistics)."""

    account: str
    records: list[TransactionRecord] = field(default_factory=list)
    end_balance: float = 0.0
    t0: int = 0
    t1: int = 0


def build_views(
    records: list[TransactionRecord], accounts: dict[str, Account]
) -> dict[str, AccountView]:
    t0 = min((r.timestamp for r in records), default=0)
    t1 = max((r.timestamp for r in records), default=0)
    views = {
        aid: AccountView(account=aid, end_balance=acct.balance(), t0=t0, t1=t1)
        for aid, acct in accounts.items()
    }
    for rec in records:
        for aid in dict.fromkeys(rec.inputs + rec.outputs):
            views[aid].records.append(rec)
    return views


# --- real-time features ----------------------------------------------------


def _aggregate(stream: list[float]) -> list[float]:
    if not stream:
        return [0.0] * 5
    arr = np.asarray(stream, dtype=float)
    return [
        float(arr.min()),
        float(arr.max()),
        float(arr.mean()),
        float(arr.std()),
        float(arr.sum()),
    ]


def extract_realtime(
    view: AccountView, clusters: ClusterAssignment
) -> list[float]:
    """The 70 real-time attributes, in manifest order."""
    aid = view.account
    sent_value, recv_value = [], []
    sent_fee, sent_inputs, sent_outputs = [], [], []
    recv_inputs, recv_outputs = [], []
    timestamps = []
    credits: list[tuple[float, int]] = []
    holds: list[float] = []
    n_sent = n_recv = n_equal = n_single = n_multi = n_dust = n_both = 0
    in_cp: set[str] = set()
    out_cp: set[str] = set()
    cp_per_tx: list[float] = []
    sent_to_value: dict[str, float] = {}
    for rec in view.records:
        is_sender = aid in rec.inputs
        is_receiver = aid in rec.outputs
        timestamps.append(rec.timestamp)
        n_involved = len(set(rec.inputs) | set(rec.outputs))
        cp_per_tx.append(float(n_involved - 1))
        if len(rec.outputs) == 1:
            n_single += 1
        if len(rec.inputs) >= 2:
            n_multi += 1
        if len(rec.outputs) >= 2 and len(set(rec.out_values)) == 1:
            n_equal += 1
        if is_sender and is_receiver:
            n_both += 1
        if is_sender:
            n_sent += 1
            contributed = 0.0
            for a, v in zip(rec.inputs, rec.in_values):
                if a == aid:
                    contributed += v
                    # match this spend against an earlier credit (FIFO by
                    # receipt time, exact value)
                    for i, (cv, cts) in enumerate(credits):
                        if cv == v:
                            holds.append(float(rec.timestamp - cts))
                            credits.pop(i)
                            break
            sent_value.append(contributed)
            sent_fee.append(rec.fee)
            sent_inputs.append(float(len(rec.inputs)))
            sent_outputs.append(float(len(rec.outputs)))
            out_cp.update(a for a in rec.outputs if a != aid)
            for a, v in zip(rec.outputs, rec.out_values):
                if a != aid:
                    sent_to_value[a] = sent_to_value.get(a, 0.0) + v
        if is_receiver:
            n_recv += 1
            got = 0.0
            for a, v in zip(rec.outputs, rec.out_values):
                if a == aid:
                    got += v
                    if v < 8000:
                        n_dust += 1
                    credits.append((v, rec.timestamp))
            recv_value.append(got)
            recv_inputs.append(float(len(rec.inputs)))
            recv_outputs.append(float(len(rec.outputs)))
            in_cp.update(a for a in rec.inputs if a != aid)
    gaps = [float(b - a) for a, b in zip(timestamps, timestamps[1:])]
    out = []
    for stream in (
        sent_value,
        recv_value,
        sent_fee,
        sent_inputs,
        sent_outputs,
        recv_inputs,
        recv_outputs,
        gaps,
        holds,
    ):
        out += _aggregate(stream)
    n_total = len(view.records)
    out += [
        float(n_sent),
        float(n_recv),
        float(n_total),
        float(len(in_cp)),
        float(len(out_cp)),
        float(n_equal),
        float(n_single),
        float(n_multi),
        float(n_dust),
        float(n_both),
    ]
    if timestamps:
        span = float(timestamps[-1] - timestamps[0])
        first_seen = float(timestamps[0] - view.t0)
        last_seen = float(view.t1 - timestamps[-1])
    else:
        span = first_seen = last_seen = 0.0
    sent_sum = float(sum(sent_value))
    recv_sum = float(sum(recv_value))
    rate = n_total / max(span / 86400.0, 1.0) if n_total else 0.0
    top_frac = (
        max(sent_to_value.values()) / sum(sent_to_value.values())
        if sent_to_value
        else 0.0
    )
    out += [
        span,
        float(rate),
        float(view.end_balance) if n_total else 0.0,
        recv_sum - sent_sum,
        sent_sum / recv_sum if recv_sum > 0 else 0.0,
        float(np.mean(cp_per_tx)) if cp_per_tx else 0.0,
        float(top_frac),
        first_seen,
        last_seen,
        1.0 if n_sent else 0.0,
        1.0 if n_recv else 0.0,
    ]
    cid = clusters.account_to_cluster.get(aid)
    if cid is None or not n_total:
        out += [0.0, 0.0, 0.0, 0.0]
    else:
        cs = clusters.stats[cid]
        out += [
            float(cs.size),
            float(cs.tx_count),
            float(cs.volume),
            float(cs.counterparties),
        ]
    assert len(out) == 70
    return out


def extract_interaction(
    view: AccountView, kind_of: dict[str, EntityKind]
) -> list[float]:
    """The 60 interaction attributes (4 measures x 15 entity kinds)."""
    aid = view.account
    idx = {k: i for i, k in enumerate(EntityKind)}
    sent_tx = [0.0] * 15
    recv_tx = [0.0] * 15
    value_sent = [0.0] * 15
    value_recv = [0.0] * 15
    for rec in view.records:
        if aid in rec.inputs:
            touched = set()
            for a, v in zip(rec.outputs, rec.out_values):
                if a == aid:
                    continue
                k = kind_of.get(a)
                if k is None:
                    raise ConfigError(f"unknown counterparty kind for {a}")
                value_sent[idx[k]] += v
                touched.add(idx[k])
            for ki in touched:
                sent_tx[ki] += 1.0
        if aid in rec.outputs:
            touched = set()
            for a, v in zip(rec.inputs, rec.in_values):
                if a == aid:
                    continue
                k = kind_of.get(a)
                if k is None:
                    raise ConfigError(f"unknown counterparty kind for {a}")
                value_recv[idx[k]] += v
                touched.add(idx[k])
            for ki in touched:
                recv_tx[ki] += 1.0
    out = []
    for ki in range(15):
        out += [sent_tx[ki], recv_tx[ki], value_sent[ki], value_recv[ki]]
    assert len(out) == 60
    return out


# --- labels ------------------------------------------------------------


def assign_label(account: Account, config: LabelConfig = DEFAULT_LABELS) -> str:
    """Map an account to licit/illicit; single-use inherits its flow."""
    kind = account.kind.value
    if account.kind is EntityKind.SINGLE_USE:
        return account.provenance or "illicit"
    if kind in config.illicit:
        return "illicit"
    if kind in config.licit:
        return "licit"
    raise ConfigError(f"entity kind {kind} is mapped by neither label set")


# --- augmentation ----------------------------------------------------------


def augment(
    matrix: np.ndarray,
    scale: float = 1.12,
    noise_frac: float = 0.10,
    seed: int = 0,
) -> np.ndarray:
    """v -> v * scale * (1 + u), u ~ U(-noise_frac, +noise_frac) per value."""
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-noise_frac, noise_frac, size=matrix.shape)
    return matrix * scale * (1.0 + noise)


# --- matrix assembly --------------------------------------------------------


def compute_feature_matrix(
    records: list[TransactionRecord],
    accounts: dict[str, Account],
    labels: LabelConfig = DEFAULT_LABELS,
    include_inactive: bool = False,
):
    """Feature rows for every (active) account, in account-creation order.

    Returns (account_ids, matrix ndarray [n, 130], entity_labels,
    category_labels).  Inactive accounts (never part of a transaction)
    are skipped unless asked for: their all-zero rows carry no signal.
    """
    clusters = cluster_common_input(records)
    views = build_views(records, accounts)
    kind_of = {aid: acct.kind for aid, acct in accounts.items()}
    ids, rows, entity_labels, categories = [], [], [], []
    for aid, acct in accounts.items():
        view = views[aid]
        if not include_inactive and not view.records:
            continue
        row = extract_realtime(view, clusters)
        row += extract_interaction(view, kind_of)
        ids.append(aid)
        rows.append(row)
        entity_labels.append(acct.kind.value)
        categories.append(assign_label(acct, labels))
    matrix = np.asarray(rows, dtype=float) if rows else np.zeros((0, 130))
    return ids, matrix, entity_labels, categories


def write_feature_csv(
    path: str | Path,
    ids: list[str],
    matrix: np.ndarray,
    entity_labels: list[str],
    categories: list[str],
) -> None:
    """Matrix CSV with the manifest hash embedded in the header comment."""
    path = Path(path)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# feature_manifest_sha256={MANIFEST['hash']}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["account"] + FEATURE_NAMES + ["entity_label", "category_label"]
        )
        for aid, row, ent, cat in zip(ids, matrix, entity_labels, categories):
            writer.writerow([aid] + [repr(float(v)) for v in row] + [ent, cat])
    tmp.replace(path)
    manifest_path = Path(str(path) + ".manifest.json")
    manifest_path.write_text(json.dumps(MANIFEST, indent=2, sort_keys=True) + "\n")
