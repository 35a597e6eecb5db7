import numpy as np
import pytest

from ponziwarn.ingest import load_dataset
from ponziwarn.opcodes import CATEGORY_INDEX, code_histogram
from ponziwarn.synth import synth_generate, write_dataset


def test_counts_and_labels():
    accounts = synth_generate(5, 12, delta=10, m=3, seed=0)
    assert len(accounts) == 17
    assert sum(a.label for a in accounts) == 5
    assert all(len(a.records) >= 30 for a in accounts)


def test_imbalance_mirrors_default_shape():
    accounts = synth_generate(75, 325, delta=10, m=10, seed=1)
    labels = [a.label for a in accounts]
    assert labels.count(1) == 75 and labels.count(0) == 325
    assert all(len(a.records) >= 100 for a in accounts)


def test_seed_determinism():
    a = synth_generate(4, 9, delta=5, m=4, seed=42)
    b = synth_generate(4, 9, delta=5, m=4, seed=42)
    assert a == b
    c = synth_generate(4, 9, delta=5, m=4, seed=43)
    assert a != c


def test_ponzi_payouts_always_postdate_their_funding():
    accounts = synth_generate(20, 1, delta=10, m=10, seed=7)
    for account in (a for a in accounts if a.label == 1):
        balance = 0
        for r in sorted(account.records, key=lambda r: (r.timestamp, r.index)):
            if r.to_address == account.address:
                balance += r.value
            else:
                balance -= r.value
                # outflow can never exceed what earlier inflows provided
                assert balance >= 0, account.address
        out_ts = [r.timestamp for r in account.records if r.from_address == account.address]
        in_ts = [r.timestamp for r in account.records if r.to_address == account.address]
        if out_ts:
            assert min(out_ts) > min(in_ts)


def test_ponzi_code_biased_toward_returndata_cluster():
    accounts = synth_generate(10, 10, delta=5, m=2, seed=3)
    rds = CATEGORY_INDEX["RETURNDATASIZE"]
    rdc = CATEGORY_INDEX["RETURNDATACOPY"]
    dcall = CATEGORY_INDEX["DELEGATECALL"]

    def cluster_rate(account, idx):
        h = code_histogram(account.bytecode)
        return h.counts[idx] / h.total

    ponzi_rd = np.mean([cluster_rate(a, rds) + cluster_rate(a, rdc)
                        for a in accounts if a.label == 1])
    normal_rd = np.mean([cluster_rate(a, rds) + cluster_rate(a, rdc)
                         for a in accounts if a.label == 0])
    assert ponzi_rd > 3 * normal_rd
    ponzi_dc = np.mean([cluster_rate(a, dcall) for a in accounts if a.label == 1])
    normal_dc = np.mean([cluster_rate(a, dcall) for a in accounts if a.label == 0])
    assert normal_dc > 3 * ponzi_dc


def test_normal_accounts_have_disjoint_sender_receiver_pools():
    accounts = synth_generate(1, 10, delta=10, m=5, seed=9)
    for account in (a for a in accounts if a.label == 0):
        senders = {r.from_address for r in account.records
                   if r.to_address == account.address}
        receivers = {r.to_address for r in account.records
                     if r.from_address == account.address}
        assert not senders & receivers


def test_timestamps_strictly_increase_per_account():
    accounts = synth_generate(3, 3, delta=10, m=3, seed=11)
    for account in accounts:
        ts = [r.timestamp for r in account.records]
        assert all(a < b for a, b in zip(ts, ts[1:]))


def test_write_then_load_roundtrip(tmp_path):
    accounts = synth_generate(3, 7, delta=5, m=4, seed=13)
    out = write_dataset(accounts, tmp_path / "data")
    loaded = load_dataset(
        tmp_path / "data" / "tx", tmp_path / "data" / "bytecode",
        tmp_path / "data" / "labels.csv", min_tx=20,
    )
    assert len(loaded) == 10
    by_addr = {a.address: a for a in accounts}
    for account in loaded:
        original = by_addr[account.address]
        assert account.label == original.label
        assert account.bytecode == original.bytecode
        assert account.records == original.records


def test_requires_positive_counts():
    with pytest.raises(ValueError):
        synth_generate(0, 5, delta=1, m=1, seed=0)
