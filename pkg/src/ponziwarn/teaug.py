"""Temporal evolution augmentation (TEAug).

Each account's transaction history is cut into m nested snapshots: snapshot
k contains the k*delta earliest transactions under a total (timestamp, row
index) order. Every snapshot keeps the account's label, so one labeled
account becomes m labeled graphs of growing scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .graphs import GraphSample, MicroTxGraph, build_micro_graph, merge_multi_edges
from .ingest import AccountData, TxRecord
from .opcodes import OpcodeHistogram, code_histogram

AUGMENT_MODES = ("train", "val", "test")


@dataclass(frozen=True)
class ScaleSeries:
    """The m snapshots of one account; snapshot k holds k*delta raw edges."""

    account: str
    snapshots: tuple[MicroTxGraph, ...]
    delta: int
    m: int


def teaug(
    records: Sequence[TxRecord],
    delta: int,
    m: int,
    target: str,
    code: OpcodeHistogram,
    label: int,
    contract_addresses: frozenset[str] = frozenset(),
) -> ScaleSeries:
    """Generate the nested snapshot series of one account.

    Accounts that cannot fill all m scales are an error, not zero-padded:
    the dataset loader is expected to filter them out up front.
    """
    if delta < 1 or m < 1:
        raise ValueError(f"delta and m must be >= 1, got delta={delta}, m={m}")
    needed = m * delta
    if len(records) < needed:
        raise ValueError(
            f"{target}: TEAug needs {needed} records (m={m} x delta={delta}), "
            f"only {len(records)} available"
        )
    ordered = sorted(records, key=lambda r: r.sort_key)
    snapshots = tuple(
        build_micro_graph(target, ordered[: k * delta], code, label, contract_addresses)
        for k in range(1, m + 1)
    )
    return ScaleSeries(target, snapshots, delta, m)


def augment_account(
    account: AccountData,
    delta: int,
    m: int,
    contract_addresses: frozenset[str] = frozenset(),
) -> ScaleSeries:
    return teaug(
        account.records, delta, m, account.address,
        code_histogram(account.bytecode), account.label, contract_addresses,
    )


def augment_split(
    accounts: Sequence[AccountData],
    delta: int,
    m: int,
    mode: str,
    contract_addresses: frozenset[str] = frozenset(),
    normalize_code: bool = False,
):
    """Apply TEAug to one split of the dataset.

    train mode pools all scales into a single flat sample list; val and
    test modes return m per-scale lists, list i holding exactly one
    scale-(i+1) snapshot per account.
    """
    if mode not in AUGMENT_MODES:
        raise ValueError(f"mode must be one of {AUGMENT_MODES}, got {mode!r}")
    series = [augment_account(a, delta, m, contract_addresses) for a in accounts]
    samples = [
        [
            GraphSample.from_micro(s.snapshots[k], scale=k + 1, normalize_code=normalize_code)
            for s in series
        ]
        for k in range(m)
    ]
    if mode == "train":
        return [sample for per_scale in samples for sample in per_scale]
    return samples


class TemporalEvolutionAugmenter(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper around augment_split, for pipeline use.

    Stateless: fit only validates parameters. transform maps a list of
    AccountData to either a pooled sample list (mode='train') or m
    per-scale lists.
    """

    def __init__(self, delta=10, m=10, mode="train", normalize_code=False):
        self.delta = delta
        self.m = m
        self.mode = mode
        self.normalize_code = normalize_code

    def fit(self, X, y=None):
        if self.mode not in AUGMENT_MODES:
            raise ValueError(f"mode must be one of {AUGMENT_MODES}, got {self.mode!r}")
        if self.delta < 1 or self.m < 1:
            raise ValueError("delta and m must be >= 1")
        return self

    def transform(self, X, contract_addresses: frozenset[str] = frozenset()):
        self.fit(X)
        return augment_split(
            X, self.delta, self.m, self.mode, contract_addresses, self.normalize_code
        )


def scale_stats(accounts: Sequence[AccountData], delta: int, m: int) -> list[dict]:
    """Per-scale averages over the dataset: nodes, merged edges, class counts.

    The report format mirrors the augmented-dataset summary tables used
    when sizing experiments.
    """
    if not accounts:
        raise ValueError("cannot compute scale statistics for an empty dataset")
    rows = []
    series = [augment_account(a, delta, m) for a in accounts]
    n_pos = sum(1 for a in accounts if a.label == 1)
    for k in range(m):
        lights = [merge_multi_edges(s.snapshots[k]) for s in series]
        rows.append(
            {
                "scale": k + 1,
                "tx_count": (k + 1) * delta,
                "avg_nodes": sum(len(g.nodes) for g in lights) / len(lights),
                "avg_edges": sum(len(g.merged_edges) for g in lights) / len(lights),
                "n_ponzi": n_pos,
                "n_non_ponzi": len(accounts) - n_pos,
            }
        )
    return rows
