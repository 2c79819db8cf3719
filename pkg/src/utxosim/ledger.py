"""Mutable simulation state: accounts, UTXOs, the transaction log.

All value mutation flows through a single :class:`Ledger` instance.
Amounts are real-valued satoshis; conservation is asserted to a 1e-6
relative tolerance because the fee equation yields fractional values.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DustViolationError,
    InsufficientFundsError,
    ScheduleOrderError,
    SimulationError,
    UnknownAccountError,
)

# Model constants (not configuration):
# the minimum transferable value, the availability threshold that keeps
# spendable UTXOs clear of dusting attacks, and the adaptive fee curve
# fees = k*1810 + 0.0008*(in_sum - 1810 - 5460) + 100.
DUST_FLOOR = 5460.0
AVAIL_THRESHOLD = 8000.0
FEE_PER_INPUT = 1810.0
FEE_RATE = 0.0008
FEE_BASE = 100.0

CONSERVATION_RTOL = 1e-6

_BASE58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


class EntityKind(str, Enum):
    LICIT = "Licit"
    EXCHANGE = "Exchange"
    DECENTRALIZED_EXCHANGE = "DecentralizedExchange"
    NESTED_EXCHANGE = "NestedExchange"
    ESCROW = "Escrow"
    MIXER = "Mixer"
    MULE = "Mule"
    FUNDS = "Funds"
    BUSINESS = "Business"
    CRYPTO_LENDING = "CryptoLending"
    SERVICE_ADDRESS = "ServiceAddress"
    NESTED_SERVICE_ADDRESS = "NestedServiceAddress"
    INTERIM_ADDRESS = "InterimAddress"
    SINGLE_USE = "SingleUse"
    OUTER_LAYER = "OuterLayer"


@dataclass
class Account:
    id: str
    kind: EntityKind
    instance: int
    utxos: list[float] = field(default_factory=list)
    last_time: int = 0
    sent_once: bool = False
    received_once: bool = False
    # licit/illicit inheritance for single-use addresses, set by whoever
    # created the account (plan step or mixer script).
    provenance: str | None = None

    def balance(self) -> float:
        return sum(self.utxos)


@dataclass(frozen=True)
class TransactionRecord:
    hash: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    in_values: tuple[float, ...]
    out_values: tuple[float, ...]
    timestamp: int
    fee: float


# --- value split policies ------------------------------------------------


@dataclass(frozen=True)
class RandomSplit:
    """Uniform random composition with every share >= min_out."""

    min_out: float = DUST_FLOOR


@dataclass(frozen=True)
class EqualSplit:
    """Every output receives the same amount (coinjoin semantics)."""


@dataclass(frozen=True)
class ProportionalSplit:
    """Shares proportional to the given non-negative weights."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if sum(self.weights) <= 0:
            raise ValueError("proportional weights must sum > 0")


@dataclass(frozen=True)
class FixedFeeSplit:
    """Prescribed per-output amounts (escrow / lending arithmetic).

    ``fee_rate`` and ``deposit_rate`` document the platform rates that
    produced the amounts; the amounts themselves must already sum to the
    remaining value.
    """

    fee_rate: float
    deposit_rate: float
    amounts: tuple[float, ...]

    def __post_init__(self) -> None:
        for r in (self.fee_rate, self.deposit_rate):
            if not 0 <= r < 1:
                raise ValueError("rates must lie in [0, 1)")


SplitPolicy = RandomSplit | EqualSplit | ProportionalSplit | FixedFeeSplit


# --- pure arithmetic ------------------------------------------------------


def compute_fee(input_count: int, in_value_sum: float) -> float:
    """Adaptive transaction fee for ``input_count`` inputs."""
    if in_value_sum <= FEE_PER_INPUT + DUST_FLOOR:
        raise InsufficientFundsError(
            f"input total {in_value_sum} cannot cover the fee floor"
        )
    return (
        input_count * FEE_PER_INPUT
        + FEE_RATE * (in_value_sum - FEE_PER_INPUT - DUST_FLOOR)
        + FEE_BASE
    )


def compute_max_outputs(in_value_sum: float, fee: float) -> int:
    """How many dust-floor outputs the net input value can fund."""
    if fee > in_value_sum:
        raise InsufficientFundsError(
            f"fee {fee} exceeds input total {in_value_sum}"
        )
    return int((in_value_sum - fee) / DUST_FLOOR)


def split_value(
    rem: float, n: int, policy: SplitPolicy, rng: np.random.Generator
) -> list[float]:
    """Distribute ``rem`` over ``n`` outputs according to ``policy``.

    The returned shares sum to ``rem`` exactly (last share absorbs float
    drift) and each share respects the dust floor.
    """
    if n <= 0:
        raise ValueError("need at least one output")
    if isinstance(policy, EqualSplit):
        share = rem / n
        if share < DUST_FLOOR:
            raise DustViolationError(
                f"equal share {share} below dust floor for {n} outputs"
            )
        return [share] * n
    if isinstance(policy, RandomSplit):
        floor = max(policy.min_out, DUST_FLOOR)
        if rem < floor * n:
            raise DustViolationError(
                f"cannot place {n} outputs of >= {floor} from {rem}"
            )
        if rem <= floor * n * (1 + 1e-9):
            return [rem / n] * n
        weights = rng.uniform(0.05, 1.0, size=n)
        shares = rem * weights / weights.sum()
        # Iterative repair: lift sub-floor shares to the floor and take
        # the excess proportionally from the shares above it.
        for _ in range(n):
            low = shares < floor
            if not low.any():
                break
            deficit = (floor - shares[low]).sum()
            shares[low] = floor
            headroom = np.where(low, 0.0, shares - floor)
            total_headroom = headroom.sum()
            if total_headroom <= deficit:
                return [rem / n] * n
            shares -= deficit * headroom / total_headroom
        out = shares.tolist()
        out[-1] += rem - sum(out)
        if min(out) < DUST_FLOOR - 1e-9:
            raise DustViolationError("random split repair failed")
        return out
    if isinstance(policy, ProportionalSplit):
        if len(policy.weights) != n:
            raise ValueError("weight count must match output count")
        total = sum(policy.weights)
        out = [rem * w / total for w in policy.weights]
        out[-1] += rem - sum(out)
        if min(out) < DUST_FLOOR:
            raise DustViolationError(
                f"proportional share {min(out)} below dust floor"
            )
        return out
    if isinstance(policy, FixedFeeSplit):
        if len(policy.amounts) != n:
            raise ValueError("amount count must match output count")
        if abs(sum(policy.amounts) - rem) > CONSERVATION_RTOL * max(rem, 1.0):
            raise ValueError(
                f"prescribed amounts sum {sum(policy.amounts)} != rem {rem}"
            )
        if min(policy.amounts) < DUST_FLOOR:
            raise DustViolationError(
                f"prescribed amount {min(policy.amounts)} below dust floor"
            )
        out = list(policy.amounts)
        out[-1] += rem - sum(out)
        return out
    raise TypeError(f"unknown split policy {policy!r}")


@dataclass
class Snapshot:
    accounts: dict[str, Account]
    log_len: int
    tx_counter: int
    account_counter: int
    rng_state: dict


class Ledger:
    """Single-writer owner of all simulation state."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.accounts: dict[str, Account] = {}
        self.log: list[TransactionRecord] = []
        # Genesis UTXO endowments (boundary accounts only); replaying the
        # log on top of these reproduces the final state.
        self.endowments: dict[str, tuple[float, ...]] = {}
        self.tx_counter = 0
        self.account_counter = 0

    # -- accounts ----------------------------------------------------

    def _new_id(self) -> str:
        digest = hashlib.sha512(
            f"{self.seed}:{self.account_counter}".encode()
        ).digest()
        self.account_counter += 1
        body = "".join(_BASE58[b % 58] for b in digest[:33])
        return "1" + body

    def init_accounts(
        self,
        kind: EntityKind,
        instance: int,
        count: int,
        endow: Sequence[float] | None = None,
        provenance: str | None = None,
    ) -> list[str]:
        """Create ``count`` fresh accounts for one entity instance.

        ``endow`` seeds each account with genesis UTXOs drawn per-account
        from the given values callable-free: when provided it must be a
        list of per-account UTXO lists.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        ids = []
        for i in range(count):
            acct = Account(
                id=self._new_id(),
                kind=kind,
                instance=instance,
                provenance=provenance,
            )
            if endow is not None:
                values = list(endow[i])
                acct.utxos.extend(values)
                self.endowments[acct.id] = tuple(values)
            self.accounts[acct.id] = acct
            ids.append(acct.id)
        return ids

    def require(self, account_id: str) -> Account:
        try:
            return self.accounts[account_id]
        except KeyError:
            raise UnknownAccountError(
                f"account {account_id!r} not in ledger (plan/ledger mismatch)"
            ) from None

    # -- availability --------------------------------------------------

    def avail_general(
        self, senders: Iterable[str], threshold: float = AVAIL_THRESHOLD
    ) -> list[str]:
        """Senders repeated once per UTXO strictly above ``threshold``."""
        ac: list[str] = []
        accounts = self.accounts
        for sid in senders:
            acct = accounts.get(sid)
            if acct is None:
                raise UnknownAccountError(
                    f"account {sid!r} not in ledger (plan/ledger mismatch)"
                )
            n = 0
            for v in acct.utxos:
                if v > threshold:
                    n += 1
            if n:
                ac.extend([sid] * n)
        return ac

    def avail_single_use_sender(
        self, senders: Iterable[str], threshold: float = AVAIL_THRESHOLD
    ) -> list[str]:
        """avail_general restricted to fresh single-use senders."""
        eligible = [
            sid
            for sid in senders
            if self.require(sid).kind is EntityKind.SINGLE_USE
            and not self.accounts[sid].sent_once
        ]
        return self.avail_general(eligible, threshold)

    def avail_receiver_capacity(self, receivers: Iterable[str]) -> list[str]:
        """Receivers that may still be credited (single-use caps apply)."""
        out = []
        for rid in receivers:
            acct = self.require(rid)
            if acct.kind is EntityKind.SINGLE_USE and acct.received_once:
                continue
            out.append(rid)
        return out

    # -- spending ------------------------------------------------------

    def spend_utxo(self, account_id: str, threshold: float = AVAIL_THRESHOLD) -> float:
        """Remove and return one random UTXO above ``threshold``."""
        acct = self.require(account_id)
        eligible = [i for i, v in enumerate(acct.utxos) if v > threshold]
        if not eligible:
            raise InsufficientFundsError(
                f"account {account_id} has no spendable UTXO above {threshold}"
            )
        idx = eligible[int(self.rng.integers(len(eligible)))]
        value = acct.utxos[idx]
        acct.utxos[idx] = acct.utxos[-1]
        acct.utxos.pop()
        return value

    def spend_utxo_at_least(self, account_id: str, minimum: float) -> float:
        """Remove and return the smallest UTXO whose value >= minimum."""
        acct = self.require(account_id)
        best = None
        for i, v in enumerate(acct.utxos):
            if v >= minimum and (best is None or v < acct.utxos[best]):
                best = i
        if best is None:
            raise InsufficientFundsError(
                f"account {account_id} has no UTXO >= {minimum}"
            )
        value = acct.utxos[best]
        acct.utxos[best] = acct.utxos[-1]
        acct.utxos.pop()
        return value

    def spend_exact(self, account_id: str, value: float) -> float:
        """Remove one UTXO with exactly this value (book-tracked spends)."""
        acct = self.require(account_id)
        try:
            idx = acct.utxos.index(value)
        except ValueError:
            raise InsufficientFundsError(
                f"account {account_id} holds no UTXO of {value}"
            ) from None
        acct.utxos[idx] = acct.utxos[-1]
        acct.utxos.pop()
        return value

    # -- timestamps ------------------------------------------------------

    def sample_timestamps(
        self, count: int, lower: int, upper: int, dist: str = "uniform"
    ) -> list[int]:
        """``count`` sorted integer timestamps in [lower, upper]."""
        if lower > upper:
            raise ScheduleOrderError(
                f"timestamp window empty: lower {lower} > upper {upper}"
            )
        if count < 1:
            raise ValueError("count must be >= 1")
        if dist == "uniform":
            ts = self.rng.integers(lower, upper + 1, size=count)
        elif dist == "gaussian":
            mean = (lower + upper) / 2
            sigma = (upper - lower) / 6
            if sigma == 0:
                ts = np.full(count, lower)
            else:
                ts = np.clip(
                    np.rint(self.rng.normal(mean, sigma, size=count)),
                    lower,
                    upper,
                )
        else:
            raise ValueError(f"unknown distribution {dist!r}")
        return sorted(int(t) for t in ts)

    # -- committing --------------------------------------------------------

    def apply_update(
        self,
        inputs: Sequence[str],
        outputs: Sequence[str],
        in_values: Sequence[float],
        fee: float,
        ts: int,
        policy: SplitPolicy,
    ) -> TransactionRecord:
        """Distribute the net input value, credit receivers, log the record.

        Spent UTXOs must already have been removed by the caller (the
        generator picked them); this method owns everything downstream:
        out-value computation, hashing, timestamp bookkeeping, single-use
        flags and the append to the log.
        """
        if not inputs or not outputs:
            raise ValueError("inputs and outputs must be non-empty")
        for r in outputs:
            acct = self.require(r)
            if acct.kind is EntityKind.SINGLE_USE and acct.received_once:
                raise SimulationError(f"receiver {r} over single-use capacity")
        in_sum = sum(in_values)
        rem = in_sum - fee
        if rem < DUST_FLOOR * len(outputs) - 1e-9:
            raise InsufficientFundsError(
                f"net value {rem} cannot fund {len(outputs)} outputs"
            )
        out_values = split_value(rem, len(outputs), policy, self.rng)

        digest = hashlib.sha256(
            "|".join(
                (
                    str(self.tx_counter),
                    ",".join(inputs),
                    ",".join(outputs),
                    str(ts),
                    str(self.seed),
                )
            ).encode()
        ).hexdigest()

        involved: dict[str, Account] = {}
        for aid in list(inputs) + list(outputs):
            involved[aid] = self.require(aid)
        for acct in involved.values():
            if ts < acct.last_time:
                raise ScheduleOrderError(
                    f"timestamp {ts} precedes last activity of {acct.id}"
                )
            acct.last_time = ts

        seen_in: set[str] = set()
        for aid in inputs:
            acct = self.accounts[aid]
            if acct.kind is EntityKind.SINGLE_USE and aid not in seen_in:
                if acct.sent_once:
                    raise SimulationError(f"single-use {aid} sent twice")
                acct.sent_once = True
                seen_in.add(aid)
        seen_out: set[str] = set()
        for aid, value in zip(outputs, out_values):
            acct = self.accounts[aid]
            acct.utxos.append(value)
            if acct.kind is EntityKind.SINGLE_USE and aid not in seen_out:
                acct.received_once = True
                seen_out.add(aid)

        record = TransactionRecord(
            hash=digest,
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            in_values=tuple(float(v) for v in in_values),
            out_values=tuple(float(v) for v in out_values),
            timestamp=ts,
            fee=float(fee),
        )
        self.log.append(record)
        self.tx_counter += 1
        return record

    # -- snapshot / rollback ----------------------------------------------

    @staticmethod
    def _copy_account(acct: Account) -> Account:
        return Account(
            id=acct.id,
            kind=acct.kind,
            instance=acct.instance,
            utxos=list(acct.utxos),
            last_time=acct.last_time,
            sent_once=acct.sent_once,
            received_once=acct.received_once,
            provenance=acct.provenance,
        )

    def snapshot(self) -> Snapshot:
        return Snapshot(
            accounts={k: self._copy_account(a) for k, a in self.accounts.items()},
            log_len=len(self.log),
            tx_counter=self.tx_counter,
            account_counter=self.account_counter,
            rng_state=self.rng.bit_generator.state,
        )

    def rollback(self, snap: Snapshot) -> None:
        self.accounts = {
            k: self._copy_account(a) for k, a in snap.accounts.items()
        }
        del self.log[snap.log_len :]
        self.endowments = {
            k: v for k, v in self.endowments.items() if k in self.accounts
        }
        self.tx_counter = snap.tx_counter
        self.account_counter = snap.account_counter
        self.rng.bit_generator.state = snap.rng_state

    def state_digest(self) -> str:
        """Hash of the full mutable state, for rollback tests."""
        h = hashlib.sha256()
        for aid in sorted(self.accounts):
            a = self.accounts[aid]
            h.update(
                f"{aid}|{a.kind.value}|{a.instance}|{sorted(a.utxos)}|"
                f"{a.last_time}|{a.sent_once}|{a.received_once}".encode()
            )
        for rec in self.log:
            h.update(rec.hash.encode())
        h.update(str(self.tx_counter).encode())
        h.update(str(self.account_counter).encode())
        h.update(repr(self.rng.bit_generator.state).encode())
        return h.hexdigest()
