"""Transaction-generating templates.

Every public ``gen_*`` method commits a whole set of transactions or
rolls the ledger back to its pre-set state.  Brackets are reentrant:
when a template runs inside another one (mixer scripts), the outermost
bracket owns the snapshot, so a mid-script failure unwinds the whole
script.  A trace entry is appended per generator invocation so tests
and downstream tooling can audit script structure.
"""

from __future__ import annotations

import math
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field

from .config import SimConfig
from .errors import (
    InsufficientFundsError,
    PoolExhaustedError,
    SimulationError,
)
from .ledger import (
    DUST_FLOOR,
    FEE_BASE,
    FEE_PER_INPUT,
    FEE_RATE,
    EntityKind,
    EqualSplit,
    FixedFeeSplit,
    Ledger,
    RandomSplit,
    TransactionRecord,
    compute_fee,
    split_value,
)
from .mapper import (
    MIXER_SCRIPTS,
    ExecutionPlan,
    PlanStep,
    init_outer_layer,
)


@dataclass(frozen=True)
class GenRequest:
    senders: list[str]
    receivers: list[str]
    quantity: int
    latest_ts: int
    min_inputs: int = 1

    def __post_init__(self) -> None:
        if self.quantity < 1 or self.min_inputs < 1:
            raise ValueError("quantity and min_inputs must be >= 1")


@dataclass
class TraceEntry:
    step_index: int
    generator: str
    subgenerator: str = ""
    mixer_subclass: int = 0
    mixer_step: int = 0
    funds_injected: bool = False
    record_hashes: list[str] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EscrowLeg:
    party_key: str
    party_account: str
    escrow_account: str
    trade_amount: float
    deposit: float

    @property
    def utxo_value(self) -> float:
        return self.trade_amount + self.deposit


@dataclass
class EscrowBook:
    pending: dict[str, deque[EscrowLeg]] = field(default_factory=dict)
    matched: deque = field(default_factory=deque)
    accrued_fees: float = 0.0
    settled: int = 0

    def add_leg(self, leg: EscrowLeg) -> None:
        self.pending.setdefault(leg.party_key, deque()).append(leg)
        keys = [k for k, q in self.pending.items() if q]
        if len(keys) >= 2:
            a, b = keys[0], keys[1]
            while self.pending[a] and self.pending[b]:
                self.matched.append(
                    (self.pending[a].popleft(), self.pending[b].popleft())
                )

    def unmatched_count(self) -> int:
        return sum(len(q) for q in self.pending.values())


DepositBook = dict[str, float]


class TransactionEngine:
    """Stateful binding of the generator templates to one ledger."""

    def __init__(self, ledger: Ledger, cfg: SimConfig, fault_hook=None) -> None:
        self.ledger = ledger
        self.cfg = cfg
        self.trace: list[TraceEntry] = []
        self.escrow_books: dict[int, EscrowBook] = {}
        self.deposit_books: dict[int, DepositBook] = {}
        self.fault_hook = fault_hook
        self._internal_instance = 100000
        self._step_index = -1
        self._atomic_depth = 0

    # -- shared plumbing ---------------------------------------------------

    def _copy_books(self):
        escrow = {
            inst: EscrowBook(
                pending={k: deque(q) for k, q in book.pending.items()},
                matched=deque(book.matched),
                accrued_fees=book.accrued_fees,
                settled=book.settled,
            )
            for inst, book in self.escrow_books.items()
        }
        deposits = {inst: dict(b) for inst, b in self.deposit_books.items()}
        return escrow, deposits

    @contextmanager
    def _atomic(self, label: str):
        if self._atomic_depth > 0:
            # an enclosing bracket owns the snapshot
            self._atomic_depth += 1
            try:
                yield
            finally:
                self._atomic_depth -= 1
            return
        snap = self.ledger.snapshot()
        books = self._copy_books()
        internal = self._internal_instance
        trace_len = len(self.trace)
        self._atomic_depth = 1
        try:
            yield
        except Exception as exc:
            self.ledger.rollback(snap)
            self.escrow_books, self.deposit_books = books
            self._internal_instance = internal
            del self.trace[trace_len:]
            if isinstance(exc, SimulationError):
                raise type(exc)(f"{label}: {exc}") from None
            raise
        finally:
            self._atomic_depth -= 1

    def _maybe_fault(self, tx_index: int) -> None:
        if self.fault_hook is not None:
            self.fault_hook(self._step_index, tx_index)

    def _lower_bound(self, pools: list[list[str]]) -> int:
        lo = 0
        for pool in pools:
            for aid in pool:
                t = self.ledger.accounts[aid].last_time
                if t > lo:
                    lo = t
        return lo

    def _timestamps(self, quantity: int, pools: list[list[str]], latest_ts: int):
        return self.ledger.sample_timestamps(
            quantity, self._lower_bound(pools), latest_ts, "uniform"
        )

    def _draw_entries(self, entries: list[str], k: int) -> list[str]:
        """Remove and return k random entries from an availability list."""
        rng = self.ledger.rng
        out = []
        for _ in range(k):
            i = int(rng.integers(len(entries)))
            entries[i], entries[-1] = entries[-1], entries[i]
            out.append(entries.pop())
        return out

    def _sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices in [0, n), O(k) (Floyd's algorithm)."""
        rng = self.ledger.rng
        chosen: list[int] = []
        seen: set[int] = set()
        for i in range(n - k, n):
            j = int(rng.integers(0, i + 1))
            if j in seen:
                j = i
            seen.add(j)
            chosen.append(j)
        return chosen

    def _spend_inputs(self, entries: list[str], k: int):
        chosen = self._draw_entries(entries, k)
        values = [self.ledger.spend_utxo(a) for a in chosen]
        return chosen, values

    def _trace(self, **kw) -> TraceEntry:
        entry = TraceEntry(step_index=self._step_index, **kw)
        self.trace.append(entry)
        return entry

    def _plan_outputs(self, rem: float, eligible_count: int, cap: int, min_out: float):
        """Output count and the effective split floor for one transaction.

        Counts respect the configured typical output size; the split
        floor stays at ``min_out``.  A hop that cannot afford its floor
        degrades to a single dust-floor output rather than failing.
        """
        count_floor = max(min_out, self.cfg.target_out_value, DUST_FLOOR)
        n_out = min(cap, eligible_count, int(rem / count_floor))
        if n_out >= 1:
            return n_out, min_out
        if rem >= max(min_out, DUST_FLOOR) and eligible_count >= 1:
            return 1, min_out
        if rem >= DUST_FLOOR and eligible_count >= 1:
            return 1, DUST_FLOOR
        raise InsufficientFundsError(f"net value {rem} cannot fund an output")

    # -- core templates ------------------------------------------------------

    def gen_regular(
        self,
        req: GenRequest,
        *,
        min_out: float = DUST_FLOOR,
        trace_as: str = "regular",
    ) -> list[TransactionRecord]:
        """Pattern-agnostic generation: the baseline template."""
        with self._atomic(trace_as):
            entry = self._trace(generator=trace_as)
            ac = self.ledger.avail_general(req.senders)
            eligible = self.ledger.avail_receiver_capacity(req.receivers)
            if not eligible:
                raise PoolExhaustedError("no eligible receivers")
            ts = self._timestamps(
                req.quantity, [req.senders, req.receivers], req.latest_ts
            )
            records = []
            for l in range(req.quantity):
                self._maybe_fault(l)
                if len(ac) < req.min_inputs:
                    raise InsufficientFundsError(
                        f"sender availability exhausted at tx {l + 1}/{req.quantity}"
                    )
                k = int(
                    self.ledger.rng.integers(
                        req.min_inputs, min(self.cfg.input_cap, len(ac)) + 1
                    )
                )
                inputs, in_values = self._spend_inputs(ac, k)
                in_sum = sum(in_values)
                fee = compute_fee(k, in_sum)
                rem = in_sum - fee
                n_out, floor = self._plan_outputs(
                    rem, len(eligible), self.cfg.output_cap, min_out
                )
                outs = [eligible[i] for i in self._sample_indices(len(eligible), n_out)]
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[l], RandomSplit(min_out=floor)
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def gen_coinjoin(self, req: GenRequest) -> list[TransactionRecord]:
        """Joint-side transactions where every participant receives the same."""
        with self._atomic("coinjoin"):
            entry = self._trace(generator="coinjoin")
            same = req.senders == req.receivers
            ac_s = self.ledger.avail_general(req.senders)
            ac_r = ac_s if same else self.ledger.avail_general(req.receivers)
            ts = self._timestamps(
                req.quantity, [req.senders, req.receivers], req.latest_ts
            )
            records = []
            for l in range(req.quantity):
                self._maybe_fault(l)
                total = len(ac_s) if same else len(ac_s) + len(ac_r)
                if total < 4:
                    raise InsufficientFundsError(
                        "fewer than 4 participants available for coinjoin"
                    )
                n = min(int(self.ledger.rng.integers(4, 13)), total)
                if same:
                    inputs, in_values = self._spend_inputs(ac_s, n)
                else:
                    k_s_lo = max(1, n - len(ac_r))
                    k_s_hi = min(n - 1, len(ac_s))
                    if k_s_lo > k_s_hi:
                        raise InsufficientFundsError(
                            "cannot mix both sides in coinjoin"
                        )
                    k_s = int(self.ledger.rng.integers(k_s_lo, k_s_hi + 1))
                    in_s, val_s = self._spend_inputs(ac_s, k_s)
                    in_r, val_r = self._spend_inputs(ac_r, n - k_s)
                    inputs, in_values = in_s + in_r, val_s + val_r
                participants = list(dict.fromkeys(inputs))
                fee = compute_fee(len(inputs), sum(in_values))
                rec = self.ledger.apply_update(
                    inputs, participants, in_values, fee, ts[l], EqualSplit()
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def gen_single_use(
        self, mode: str, cj_variant: bool, req: GenRequest
    ) -> list[TransactionRecord]:
        """Single-use-constrained transfers: sgl_sgl, sgl_gen or gen_sgl."""
        if mode not in ("sgl_sgl", "sgl_gen", "gen_sgl"):
            raise ValueError(f"unknown single-use mode {mode!r}")
        sgl_sender = mode in ("sgl_sgl", "sgl_gen")
        sgl_receiver = mode in ("sgl_sgl", "gen_sgl")
        with self._atomic(mode):
            entry = self._trace(
                generator=mode, subgenerator="coinjoin" if cj_variant else ""
            )
            if sgl_sender:
                # generated single-use addresses carry exactly one credit,
                # so entries are unique; endowed fixtures may not be
                ac = self.ledger.avail_single_use_sender(req.senders)
                dedupe = len(ac) != len(set(ac))
                input_cap = max(self.cfg.sgl_input_cap, req.min_inputs)
            else:
                ac = self.ledger.avail_general(req.senders)
                dedupe = False
                input_cap = self.cfg.input_cap
            eligible = self.ledger.avail_receiver_capacity(req.receivers)
            output_cap = (
                self.cfg.sgl_output_cap if sgl_receiver else self.cfg.output_cap
            )
            min_out = self.cfg.chain_min_out
            ts = self._timestamps(
                req.quantity, [req.senders, req.receivers], req.latest_ts
            )
            records = []
            for l in range(req.quantity):
                self._maybe_fault(l)
                if len(ac) < req.min_inputs:
                    if sgl_sender:
                        raise PoolExhaustedError(
                            f"single-use senders exhausted at tx {l + 1}/{req.quantity}"
                        )
                    raise InsufficientFundsError(
                        f"sender availability exhausted at tx {l + 1}/{req.quantity}"
                    )
                if not eligible:
                    raise PoolExhaustedError(
                        f"single-use receivers exhausted at tx {l + 1}/{req.quantity}"
                    )
                k = int(
                    self.ledger.rng.integers(
                        req.min_inputs, min(input_cap, len(ac)) + 1
                    )
                )
                inputs, in_values = self._spend_inputs(ac, k)
                if dedupe:
                    used = set(inputs)
                    ac = [a for a in ac if a not in used]
                in_sum = sum(in_values)
                fee = compute_fee(k, in_sum)
                rem = in_sum - fee
                n_out, floor = self._plan_outputs(
                    rem, len(eligible), output_cap, min_out
                )
                picked = self._sample_indices(len(eligible), n_out)
                outs = [eligible[i] for i in picked]
                if sgl_receiver:
                    for i in sorted(picked, reverse=True):
                        eligible[i] = eligible[-1]
                        eligible.pop()
                policy = EqualSplit() if cj_variant else RandomSplit(min_out=floor)
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[l], policy
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def gen_gen_gen(
        self, req: GenRequest, side_pattern: tuple[int, int] | None = None
    ) -> list[TransactionRecord]:
        """General-to-general transfers, optionally with fixed side counts."""
        if side_pattern is None:
            return self.gen_regular(req, trace_as="gen_gen")
        n_in, n_out = side_pattern
        with self._atomic("gen_gen"):
            entry = self._trace(generator="gen_gen", subgenerator=f"{n_in}x{n_out}")
            ac = self.ledger.avail_general(req.senders)
            eligible = self.ledger.avail_receiver_capacity(req.receivers)
            ts = self._timestamps(
                req.quantity, [req.senders, req.receivers], req.latest_ts
            )
            records = []
            for l in range(req.quantity):
                self._maybe_fault(l)
                if len(ac) < n_in:
                    raise InsufficientFundsError(
                        f"pattern {side_pattern} unsatisfiable at tx {l + 1}:"
                        f" only {len(ac)} inputs available"
                    )
                if len(eligible) < n_out:
                    raise PoolExhaustedError("not enough receivers for pattern")
                inputs, in_values = self._spend_inputs(ac, n_in)
                in_sum = sum(in_values)
                fee = compute_fee(n_in, in_sum)
                rem = in_sum - fee
                if rem < DUST_FLOOR * n_out:
                    raise InsufficientFundsError(
                        f"pattern {side_pattern} unsatisfiable: net value {rem}"
                    )
                outs = [eligible[i] for i in self._sample_indices(len(eligible), n_out)]
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[l], RandomSplit()
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def gen_inout(self, req: GenRequest) -> list[TransactionRecord]:
        """Senders and receivers collaborate on both sides, unequal splits."""
        with self._atomic("inout"):
            entry = self._trace(generator="inout")
            same = req.senders == req.receivers
            ac_s = self.ledger.avail_general(req.senders)
            ac_r = ac_s if same else self.ledger.avail_general(req.receivers)
            out_s = self.ledger.avail_receiver_capacity(req.senders)
            out_r = out_s if same else self.ledger.avail_receiver_capacity(req.receivers)
            if not out_s or not out_r:
                raise PoolExhaustedError("both pools must accept outputs")
            ts = self._timestamps(
                req.quantity, [req.senders, req.receivers], req.latest_ts
            )
            records = []
            for l in range(req.quantity):
                self._maybe_fault(l)
                total = len(ac_s) if same else len(ac_s) + len(ac_r)
                if total < 2 or (not same and (not ac_s or not ac_r)):
                    raise InsufficientFundsError(
                        f"both-side availability exhausted at tx {l + 1}"
                    )
                k_total = int(
                    self.ledger.rng.integers(
                        max(2, req.min_inputs), min(self.cfg.input_cap, total) + 1
                    )
                )
                if same:
                    inputs, in_values = self._spend_inputs(ac_s, k_total)
                else:
                    k_s = int(self.ledger.rng.integers(1, k_total))
                    k_s = min(max(k_s, k_total - len(ac_r)), len(ac_s))
                    in_s, val_s = self._spend_inputs(ac_s, k_s)
                    in_r, val_r = self._spend_inputs(ac_r, k_total - k_s)
                    inputs, in_values = in_s + in_r, val_s + val_r
                in_sum = sum(in_values)
                fee = compute_fee(len(inputs), in_sum)
                rem = in_sum - fee
                budget = int(rem / DUST_FLOOR)
                if budget < 2:
                    raise InsufficientFundsError(
                        f"net value {rem} too small for a joint split at tx {l + 1}"
                    )
                n_out = min(self.cfg.output_cap, len(out_s) + len(out_r), budget)
                n_from_s = max(1, min(n_out - 1, int(self.ledger.rng.integers(1, n_out))))
                n_from_s = min(n_from_s, len(out_s))
                n_from_r = min(n_out - n_from_s, len(out_r))
                outs = [out_s[i] for i in self._sample_indices(len(out_s), n_from_s)]
                outs += [out_r[i] for i in self._sample_indices(len(out_r), n_from_r)]
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[l], RandomSplit()
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    # -- crypto-lending --------------------------------------------------

    def gen_dli(
        self,
        depositors: list[str],
        lender: list[str],
        investors: list[str],
        quantity: int,
        latest_ts: int,
    ) -> tuple[list[TransactionRecord], DepositBook]:
        """Depositor -> lender -> investor chains; returns the deposit book."""
        if not investors:
            raise SimulationError("lending needs at least one investor account")
        with self._atomic("dli"):
            entry = self._trace(generator="dli")
            ac = self.ledger.avail_general(depositors)
            n_batches = math.ceil(quantity / self.cfg.input_cap)
            ts = self._timestamps(
                quantity + n_batches, [depositors, lender, investors], latest_ts
            )
            records: list[TransactionRecord] = []
            book: DepositBook = {}
            inflow: list[tuple[str, float]] = []
            for l in range(quantity):
                self._maybe_fault(l)
                if not ac:
                    raise InsufficientFundsError(
                        f"depositor availability exhausted at deposit {l + 1}"
                    )
                inputs, in_values = self._spend_inputs(ac, 1)
                fee = compute_fee(1, in_values[0])
                rem = in_values[0] - fee
                if rem < DUST_FLOOR:
                    raise InsufficientFundsError("deposit below dust floor")
                target = lender[int(self.ledger.rng.integers(len(lender)))]
                rec = self.ledger.apply_update(
                    inputs, [target], in_values, fee, ts[l],
                    FixedFeeSplit(0.0, 0.0, (rem,)),
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
                book[inputs[0]] = book.get(inputs[0], 0.0) + rem
                inflow.append((target, rem))
            # Forward pooled deposits to investors, retaining the platform
            # share as a change output back to the lender.
            ts_idx = quantity
            for start in range(0, len(inflow), self.cfg.input_cap):
                batch = inflow[start : start + self.cfg.input_cap]
                inputs = [acct for acct, _ in batch]
                in_values = [self.ledger.spend_exact(acct, v) for acct, v in batch]
                in_sum = sum(in_values)
                fee = compute_fee(len(inputs), in_sum)
                rem = in_sum - fee
                retained = rem * self.cfg.lender_retain_rate
                if retained < DUST_FLOOR:
                    retained = 0.0
                forward = rem - retained
                n_inv = min(
                    self.cfg.output_cap - 1,
                    len(investors),
                    int(forward / DUST_FLOOR),
                )
                if n_inv < 1:
                    raise InsufficientFundsError("deposits too small to forward")
                inv_out = [
                    investors[i] for i in self._sample_indices(len(investors), n_inv)
                ]
                amounts = split_value(forward, n_inv, RandomSplit(), self.ledger.rng)
                outs = list(inv_out)
                if retained:
                    outs.append(inputs[0])
                    amounts.append(retained)
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[min(ts_idx, len(ts) - 1)],
                    FixedFeeSplit(self.cfg.lender_retain_rate, 0.0, tuple(amounts)),
                )
                ts_idx += 1
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records, book

    def gen_ild(
        self,
        investors: list[str],
        lender: list[str],
        book: DepositBook,
        quantity: int,
        latest_ts: int,
    ) -> list[TransactionRecord]:
        """Investor -> lender inflow, then payouts proportional to deposits."""
        if not book:
            raise SimulationError("deposit book is empty; run a DLI flow first")
        with self._atomic("ild"):
            entry = self._trace(generator="ild")
            ac = self.ledger.avail_general(investors)
            depositors = list(book)
            n_payouts = math.ceil(quantity / self.cfg.input_cap)
            ts = self._timestamps(
                quantity + n_payouts, [investors, lender, depositors], latest_ts
            )
            records: list[TransactionRecord] = []
            inflow: list[tuple[str, float]] = []
            for l in range(quantity):
                self._maybe_fault(l)
                if not ac:
                    raise InsufficientFundsError(
                        f"investor availability exhausted at tx {l + 1}"
                    )
                inputs, in_values = self._spend_inputs(ac, 1)
                fee = compute_fee(1, in_values[0])
                rem = in_values[0] - fee
                if rem < DUST_FLOOR:
                    raise InsufficientFundsError("investor return below dust floor")
                target = lender[int(self.ledger.rng.integers(len(lender)))]
                rec = self.ledger.apply_update(
                    inputs, [target], in_values, fee, ts[l],
                    FixedFeeSplit(0.0, 0.0, (rem,)),
                )
                records.append(rec)
                entry.record_hashes.append(rec.hash)
                inflow.append((target, rem))
            principal_total = sum(book.values())
            batches = []
            dist_total = 0.0
            for start in range(0, len(inflow), self.cfg.input_cap):
                batch = inflow[start : start + self.cfg.input_cap]
                in_sum = sum(v for _, v in batch)
                fee = compute_fee(len(batch), in_sum)
                batches.append((batch, fee, in_sum - fee))
                dist_total += in_sum - fee
            # interest-bearing payouts, capped by what actually came in;
            # depositors are partitioned across payout transactions so
            # nobody's payout is diluted below the dust floor
            scale = min(
                1 + self.cfg.depositor_interest_rate, dist_total / principal_total
            )
            pending = list(depositors)
            ts_idx = quantity
            for b_idx, (batch, fee, dist) in enumerate(batches):
                if not pending:
                    break
                self._maybe_fault(ts_idx)
                last_batch = b_idx == len(batches) - 1
                inputs = [acct for acct, _ in batch]
                in_values = [self.ledger.spend_exact(acct, v) for acct, v in batch]
                outs: list[str] = []
                amounts: list[float] = []
                placed = 0.0
                while pending:
                    payout = book[pending[0]] * scale
                    if outs and placed + payout > dist and not last_batch:
                        break
                    outs.append(pending.pop(0))
                    amounts.append(payout)
                    placed += payout
                if placed > dist:
                    # shrink proportionally; the last batch takes everyone
                    amounts = [a * dist / placed for a in amounts]
                    placed = dist
                leftover = dist - placed
                if leftover >= DUST_FLOOR:
                    outs.append(inputs[0])
                    amounts.append(leftover)
                elif leftover > 0:
                    # absorb it uniformly: per-record proportionality holds
                    amounts = [a * dist / placed for a in amounts]
                if min(amounts) < DUST_FLOOR:
                    raise InsufficientFundsError(
                        f"payout of {min(amounts):.0f} would fall below the dust floor"
                    )
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[min(ts_idx, len(ts) - 1)],
                    FixedFeeSplit(
                        0.0, self.cfg.depositor_interest_rate, tuple(amounts)
                    ),
                )
                ts_idx += 1
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            if pending:
                raise InsufficientFundsError(
                    f"inflow exhausted with {len(pending)} depositors unpaid"
                )
            return records

    # -- escrow / P2P ------------------------------------------------------

    def _leg(
        self,
        book: EscrowBook,
        party_key: str,
        party_pool: list[str],
        escrow_pool: list[str],
        ts: int,
        amount: float | None,
    ) -> TransactionRecord:
        """One party -> escrow deposit: trade amount plus security deposit."""
        ac = self.ledger.avail_general(party_pool)
        if not ac:
            raise InsufficientFundsError(f"party {party_key} has no available funds")
        rate = self.cfg.escrow_deposit_rate
        # The deposit itself comes back as a settlement output, so it must
        # clear the dust floor on its own.
        min_gross = DUST_FLOOR * (1 + rate) / rate if rate > 0 else DUST_FLOOR
        if amount is None:
            k = min(int(self.ledger.rng.integers(1, 4)), len(ac))
            inputs, in_values = self._spend_inputs(ac, k)
            while (
                sum(in_values) - compute_fee(len(inputs), sum(in_values))
                < 1.3 * min_gross
                and ac
                and len(inputs) < self.cfg.input_cap
            ):
                more, vals = self._spend_inputs(ac, 1)
                inputs += more
                in_values += vals
            in_sum = sum(in_values)
            fee = compute_fee(len(inputs), in_sum)
            budget = in_sum - fee
            if budget < min_gross:
                raise InsufficientFundsError("trade budget below dust floor")
            gross = max(
                budget * float(self.ledger.rng.uniform(0.7, 0.9)), min_gross
            )
            if budget - gross < DUST_FLOOR:
                gross = budget
        else:
            target = amount * (1 + rate)
            inputs, in_values = self._spend_inputs(ac, 1)
            while True:
                in_sum = sum(in_values)
                fee = compute_fee(len(inputs), in_sum)
                if in_sum - fee >= target or not ac or len(inputs) >= self.cfg.input_cap:
                    break
                more, vals = self._spend_inputs(ac, 1)
                inputs += more
                in_values += vals
            in_sum = sum(in_values)
            fee = compute_fee(len(inputs), in_sum)
            budget = in_sum - fee
            if budget < target:
                raise InsufficientFundsError(
                    f"party {party_key} cannot fund a trade of {amount}"
                )
            gross = target
            if budget - gross < DUST_FLOOR and budget > gross:
                gross = budget
        trade = gross / (1 + rate)
        deposit = gross - trade
        change = budget - gross
        escrow_acct = escrow_pool[int(self.ledger.rng.integers(len(escrow_pool)))]
        outs = [escrow_acct]
        amounts = [gross]
        if change >= DUST_FLOOR:
            outs.append(inputs[0])
            amounts.append(change)
        rec = self.ledger.apply_update(
            inputs, outs, in_values, fee, ts,
            FixedFeeSplit(self.cfg.escrow_platform_fee_rate, rate, tuple(amounts)),
        )
        book.add_leg(
            EscrowLeg(
                party_key=party_key,
                party_account=inputs[0],
                escrow_account=escrow_acct,
                trade_amount=trade,
                deposit=deposit,
            )
        )
        return rec

    def p2p_leg_step(
        self,
        party_key: str,
        party_pool: list[str],
        escrow_pool: list[str],
        escrow_instance: int,
        quantity: int,
        latest_ts: int,
    ) -> list[TransactionRecord]:
        """One schema row worth of escrow deposits from a single party."""
        book = self.escrow_books.setdefault(escrow_instance, EscrowBook())
        with self._atomic("p2p"):
            entry = self._trace(generator="p2p")
            ts = self._timestamps(quantity, [party_pool, escrow_pool], latest_ts)
            records = []
            for l in range(quantity):
                self._maybe_fault(l)
                rec = self._leg(book, party_key, party_pool, escrow_pool, ts[l], None)
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def gen_p2p(
        self,
        party1: list[str],
        party2: list[str],
        escrow: list[str],
        escrow_instance: int,
        quantity: int,
        latest_ts: int,
        trade_amounts: list[float] | None = None,
        counter_amounts: list[float] | None = None,
    ) -> list[TransactionRecord]:
        """Full trades: party1 leg then party2 leg, matched in the book."""
        book = self.escrow_books.setdefault(escrow_instance, EscrowBook())
        with self._atomic("p2p"):
            entry = self._trace(generator="p2p")
            ts = self._timestamps(2 * quantity, [party1, party2, escrow], latest_ts)
            records = []
            for l in range(quantity):
                self._maybe_fault(l)
                amount = trade_amounts[l] if trade_amounts else None
                rec1 = self._leg(book, "party1", party1, escrow, ts[2 * l], amount)
                if counter_amounts:
                    counter = counter_amounts[l]
                elif amount is not None:
                    counter = amount * float(self.ledger.rng.uniform(0.8, 1.2))
                else:
                    counter = None
                rec2 = self._leg(book, "party2", party2, escrow, ts[2 * l + 1], counter)
                records += [rec1, rec2]
                entry.record_hashes += [rec1.hash, rec2.hash]
            return records

    def gen_escrow_settle(
        self,
        escrow_pool: list[str],
        escrow_instance: int,
        latest_ts: int,
        fee_receivers: list[str],
        quantity: int | None = None,
    ) -> list[TransactionRecord]:
        """Settle matched trades: payouts, deposit returns, platform fee.

        The network fee comes out of the escrow's seeded reserve; the
        platform fee accrues until it clears the dust floor, then pays
        out to the decentralized-exchange account.  Unmatched legs stay
        pending in the book.
        """
        book = self.escrow_books.get(escrow_instance)
        if book is None or not book.matched:
            raise SimulationError(
                f"escrow {escrow_instance} has no matched trades to settle"
            )
        n = len(book.matched) if quantity is None else min(quantity, len(book.matched))
        r = self.cfg.escrow_platform_fee_rate
        # leg UTXOs still referenced by the book are not usable as reserve
        held = {
            (leg.escrow_account, leg.utxo_value)
            for pair in book.matched
            for leg in pair
        }
        for queue in book.pending.values():
            held.update((leg.escrow_account, leg.utxo_value) for leg in queue)
        with self._atomic("escrow"):
            entry = self._trace(generator="escrow")
            ts = self._timestamps(n, [escrow_pool, fee_receivers], latest_ts)
            records = []
            for l in range(n):
                self._maybe_fault(l)
                leg1, leg2 = book.matched.popleft()
                trade_in = leg1.utxo_value + leg2.utxo_value
                platform = r * (leg1.trade_amount + leg2.trade_amount)
                carry = book.accrued_fees
                fee_flat = (
                    3 * FEE_PER_INPUT
                    + FEE_RATE * (trade_in - FEE_PER_INPUT - DUST_FLOOR)
                    + FEE_BASE
                )
                reserve_min = (fee_flat + DUST_FLOOR + carry + 1.0) / (1 - FEE_RATE)
                reserve_acct, reserve_val = self._find_reserve(
                    escrow_pool, reserve_min, held
                )
                inputs = [leg1.escrow_account, leg2.escrow_account, reserve_acct]
                in_values = [
                    self.ledger.spend_exact(leg1.escrow_account, leg1.utxo_value),
                    self.ledger.spend_exact(leg2.escrow_account, leg2.utxo_value),
                    self.ledger.spend_exact(reserve_acct, reserve_val),
                ]
                in_sum = sum(in_values)
                fee = compute_fee(3, in_sum)
                payouts = [
                    (leg2.party_account, leg1.trade_amount * (1 - r)),
                    (leg1.party_account, leg2.trade_amount * (1 - r)),
                    (leg1.party_account, leg1.deposit),
                    (leg2.party_account, leg2.deposit),
                ]
                outs = [acct for acct, amt in payouts if amt > 0]
                amounts = [amt for _, amt in payouts if amt > 0]
                book.accrued_fees += platform
                if book.accrued_fees >= DUST_FLOOR:
                    outs.append(fee_receivers[0])
                    amounts.append(book.accrued_fees)
                    book.accrued_fees = 0.0
                change = in_sum - fee - sum(amounts)
                if change < DUST_FLOOR - 1e-9:
                    raise InsufficientFundsError(
                        "escrow reserve too small to settle a trade"
                    )
                outs.append(reserve_acct)
                amounts.append(change)
                rec = self.ledger.apply_update(
                    inputs, outs, in_values, fee, ts[l],
                    FixedFeeSplit(r, self.cfg.escrow_deposit_rate, tuple(amounts)),
                )
                book.settled += 1
                records.append(rec)
                entry.record_hashes.append(rec.hash)
            return records

    def _find_reserve(
        self, pool: list[str], minimum: float, held: set | None = None
    ) -> tuple[str, float]:
        for aid in pool:
            for v in self.ledger.accounts[aid].utxos:
                if v >= minimum and (held is None or (aid, v) not in held):
                    return aid, v
        raise InsufficientFundsError(
            f"no escrow reserve UTXO >= {minimum:.0f} available"
        )

    # -- mixers -----------------------------------------------------------

    def _fresh_sgl_pool(self, count: int) -> list[str]:
        self._internal_instance += 1
        return self.ledger.init_accounts(
            EntityKind.SINGLE_USE,
            self._internal_instance,
            count,
            provenance="illicit",
        )

    def gen_mixer(
        self,
        subclass: int,
        req: GenRequest,
        funds_pool: list[str],
        internal_pool: list[str],
    ) -> list[TransactionRecord]:
        """Run one mixing script: a fixed sequence of template invocations.

        Sub-classes 1-4 run 5/5/13/9 steps with reserve (funds) injections
        at steps {3}/{3}/{4,6,9}/{3,5,7}.  The whole script is atomic.
        """
        script = MIXER_SCRIPTS[subclass]
        per_step = max(1, req.quantity // len(script))
        with self._atomic(f"mixer[{subclass}]"):
            records: list[TransactionRecord] = []
            sgl_pools: dict[str, list[str]] = {}
            for step_no, (src, dst, kind, funds) in enumerate(script, start=1):
                pools_src = self._resolve_mixer_pool(
                    src, req, funds_pool, internal_pool, sgl_pools, per_step
                )
                pools_dst = self._resolve_mixer_pool(
                    dst, req, funds_pool, internal_pool, sgl_pools, per_step
                )
                sub_req = GenRequest(
                    senders=pools_src,
                    receivers=pools_dst,
                    quantity=per_step,
                    latest_ts=req.latest_ts,
                )
                before = len(self.trace)
                if kind == "coinjoin":
                    recs = self.gen_coinjoin(sub_req)
                elif kind in ("regular", "gen_gen"):
                    recs = self.gen_regular(
                        sub_req, min_out=self.cfg.chain_min_out, trace_as=kind
                    )
                else:
                    mode = kind.removesuffix("_cj")
                    recs = self.gen_single_use(mode, kind.endswith("_cj"), sub_req)
                for t in self.trace[before:]:
                    t.generator = "mixer"
                    t.subgenerator = kind
                    t.mixer_subclass = subclass
                    t.mixer_step = step_no
                    t.funds_injected = funds
                records += recs
            return records

    def _resolve_mixer_pool(
        self,
        symbol: str,
        req: GenRequest,
        funds_pool: list[str],
        internal_pool: list[str],
        sgl_pools: dict[str, list[str]],
        per_step: int,
    ) -> list[str]:
        pools: list[str] = []
        for part in symbol.split("+"):
            if part == "S":
                pools += req.senders
            elif part == "R":
                pools += req.receivers
            elif part == "F":
                pools += funds_pool
            elif part == "G":
                pools += internal_pool
            elif part.startswith("U"):
                if part not in sgl_pools:
                    sgl_pools[part] = self._fresh_sgl_pool(
                        per_step * self.cfg.sgl_output_cap + 2
                    )
                pools += sgl_pools[part]
            else:
                raise ValueError(f"unknown mixer pool symbol {part!r}")
        return pools


# --- plan execution -----------------------------------------------------


@dataclass
class Dataset:
    """Everything a run produced: ledger, plan, seeds, trace, errors."""

    ledger: Ledger
    plan: ExecutionPlan
    seed_records: list[TransactionRecord]
    trace: list[TraceEntry]
    step_errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def records(self) -> list[TransactionRecord]:
        return self.ledger.log

    def active_accounts(self) -> set[str]:
        seen: set[str] = set()
        for rec in self.ledger.log:
            seen.update(rec.inputs)
            seen.update(rec.outputs)
        return seen


def run_plan(
    plan: ExecutionPlan,
    ledger: Ledger,
    cfg: SimConfig,
    *,
    keep_partial: bool = False,
    progress=None,
    fault_hook=None,
) -> Dataset:
    """Execute boundary seeding then every step in order."""
    engine = TransactionEngine(ledger, cfg, fault_hook=fault_hook)
    seed_records = init_outer_layer(plan, ledger, cfg)
    errors: list[tuple[int, str]] = []
    for step in plan.steps:
        engine._step_index = step.index
        try:
            execute_step(engine, plan, step)
        except SimulationError as exc:
            if not keep_partial:
                raise type(exc)(f"step {step.index}: {exc}") from None
            errors.append((step.index, str(exc)))
        if progress is not None:
            progress(len(ledger.log))
    return Dataset(
        ledger=ledger,
        plan=plan,
        seed_records=seed_records,
        trace=engine.trace,
        step_errors=errors,
    )


def execute_step(engine: TransactionEngine, plan: ExecutionPlan, step: PlanStep):
    """Dispatch one plan step to its generator."""
    pools = plan.pools
    req = GenRequest(
        senders=pools[step.sender],
        receivers=pools[step.receiver],
        quantity=step.quantity,
        latest_ts=step.latest_ts,
        min_inputs=step.min_inputs,
    )
    gen = step.generator
    if gen == "regular":
        return engine.gen_regular(req)
    if gen == "gen_gen":
        return engine.gen_gen_gen(req, step.side_pattern)
    if gen == "inout":
        return engine.gen_inout(req)
    if gen == "coinjoin":
        return engine.gen_coinjoin(req)
    if gen in ("sgl_sgl", "sgl_gen", "gen_sgl"):
        return engine.gen_single_use(gen, step.cj_variant, req)
    if gen == "p2p_leg":
        return engine.p2p_leg_step(
            str(step.sender),
            pools[step.sender],
            pools[step.receiver],
            step.receiver.instance,
            step.quantity,
            step.latest_ts,
        )
    if gen == "escrow_settle":
        inst = step.sender.instance
        dex = plan.aux_pools[f"escrow_dex:{inst}"]
        fee_receivers = (
            pools[step.receiver]
            if step.receiver.kind is EntityKind.DECENTRALIZED_EXCHANGE
            else dex
        )
        return engine.gen_escrow_settle(
            pools[step.sender], inst, step.latest_ts, fee_receivers, step.quantity
        )
    if gen == "dli":
        inst = step.receiver.instance
        investors = plan.aux_pools[f"lending_investors:{inst}"]
        records, book = engine.gen_dli(
            pools[step.sender],
            pools[step.receiver],
            investors,
            step.quantity,
            step.latest_ts,
        )
        merged = engine.deposit_books.setdefault(inst, {})
        for acct, amount in book.items():
            merged[acct] = merged.get(acct, 0.0) + amount
        return records
    if gen == "ild":
        inst = step.sender.instance
        investors = plan.aux_pools[f"lending_investors:{inst}"]
        book = engine.deposit_books.get(inst)
        if not book:
            raise SimulationError(
                f"ILD step {step.index} has no deposit book for lender {inst}"
            )
        records = engine.gen_ild(
            investors, pools[step.sender], book, step.quantity, step.latest_ts
        )
        engine.deposit_books[inst] = {}  # the payout cycle closes the book
        return records
    if gen == "mixer":
        inst = (
            step.sender.instance
            if step.sender.kind is EntityKind.MIXER
            else step.receiver.instance
        )
        return engine.gen_mixer(
            step.mixer_subclass,
            req,
            plan.aux_pools[f"mixer_funds:{inst}"],
            plan.aux_pools[f"mixer_internal:{inst}"],
        )
    raise SimulationError(f"unknown generator {gen!r}")
