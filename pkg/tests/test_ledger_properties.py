"""Property tests: availability oracle, split conservation, replay."""

import numpy as np
from hypothesis import given, settings, strategies as st

from utxosim.ledger import (
    DUST_FLOOR,
    EntityKind,
    EqualSplit,
    Ledger,
    ProportionalSplit,
    RandomSplit,
    split_value,
)


def brute_force_avail(utxo_lists, threshold=8000.0):
    """Literal re-implementation of the availability routine.

    For each sender: non-empty numeric UTXO list whose max exceeds the
    threshold contributes the sender once per UTXO above it; the nested
    list is then flattened.
    """
    avail = []
    for idx, utxos in enumerate(utxo_lists):
        if len(utxos) > 0 and isinstance(utxos[0], (int, float)):
            if max(utxos) > threshold:
                count = sum(1 for v in utxos if v > threshold)
                avail.append([idx] * count)
    return [s for sub in avail for s in sub]


utxo_list = st.lists(
    st.one_of(
        st.floats(min_value=0, max_value=20000, allow_nan=False),
        st.sampled_from([7999.0, 8000.0, 8000.5, 8001.0]),
    ),
    max_size=8,
)


@settings(max_examples=1000, deadline=None)
@given(st.lists(utxo_list, min_size=1, max_size=10))
def test_avail_general_matches_brute_force(utxo_lists):
    ledger = Ledger(seed=1)
    ids = []
    for utxos in utxo_lists:
        (aid,) = ledger.init_accounts(EntityKind.LICIT, 1, 1, endow=[list(utxos)])
        ids.append(aid)
    got = ledger.avail_general(ids)
    expected = [ids[i] for i in brute_force_avail(utxo_lists)]
    assert got == expected


@settings(max_examples=300, deadline=None)
@given(
    rem=st.floats(min_value=DUST_FLOOR, max_value=1e9),
    n=st.integers(min_value=1, max_value=25),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_random_split_properties(rem, n, seed):
    rng = np.random.default_rng(seed)
    if DUST_FLOOR * n > rem:
        return
    out = split_value(rem, n, RandomSplit(), rng)
    assert len(out) == n
    assert all(v >= DUST_FLOOR - 1e-9 for v in out)
    assert abs(sum(out) - rem) <= 1e-6 * rem


@settings(max_examples=300, deadline=None)
@given(
    rem=st.floats(min_value=DUST_FLOOR * 30, max_value=1e9),
    weights=st.lists(
        st.floats(min_value=1.0, max_value=100.0), min_size=1, max_size=10
    ),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_proportional_split_ratios(rem, weights, seed):
    rng = np.random.default_rng(seed)
    total = sum(weights)
    if min(weights) / total * rem < DUST_FLOOR:
        return
    out = split_value(rem, len(weights), ProportionalSplit(tuple(weights)), rng)
    assert abs(sum(out) - rem) <= 1e-6 * rem
    for v, w in zip(out, weights):
        assert abs(v - rem * w / total) <= 1e-6 * rem


@settings(max_examples=200, deadline=None)
@given(
    rem=st.floats(min_value=DUST_FLOOR * 12, max_value=1e9),
    n=st.integers(min_value=1, max_value=12),
)
def test_equal_split_single_distinct_value(rem, n):
    out = split_value(rem, n, EqualSplit(), np.random.default_rng(0))
    assert len(set(out)) == 1
    assert abs(sum(out) - rem) <= 1e-6 * rem


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31))
def test_log_replay_reproduces_utxo_sets(seed):
    """Replaying endowments + log rebuilds every final UTXO multiset."""
    ledger = Ledger(seed=seed)
    rng = np.random.default_rng(seed)
    senders = ledger.init_accounts(
        EntityKind.LICIT, 1, 5, endow=[[float(v) for v in rng.uniform(2e4, 1e6, 6)] for _ in range(5)]
    )
    receivers = ledger.init_accounts(EntityKind.LICIT, 2, 8)
    everyone = senders + receivers
    ts = 0
    for _ in range(30):
        ac = ledger.avail_general(everyone)
        if not ac:
            break
        sender = ac[int(rng.integers(len(ac)))]
        value = ledger.spend_utxo(sender)
        from utxosim.ledger import compute_fee

        fee = compute_fee(1, value)
        n_out = max(1, min(3, int((value - fee) / DUST_FLOOR)))
        outs = [everyone[int(rng.integers(len(everyone)))] for _ in range(n_out)]
        outs = list(dict.fromkeys(outs))
        ts += 10
        ledger.apply_update([sender], outs, [value], fee, ts, RandomSplit())
    # replay
    replayed = {aid: list(ledger.endowments.get(aid, ())) for aid in everyone}
    for rec in ledger.log:
        for aid, v in zip(rec.inputs, rec.in_values):
            replayed[aid].remove(v)
        for aid, v in zip(rec.outputs, rec.out_values):
            replayed[aid].append(v)
    for aid in everyone:
        assert sorted(replayed[aid]) == sorted(ledger.accounts[aid].utxos)
