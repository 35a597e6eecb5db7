"""Contract-centric transaction graphs.

A micro transaction graph holds every raw transfer touching one target
contract. The lightweight form merges parallel edges per ordered account
pair and attaches a 15-column node feature matrix; this is what the
transaction channel of the model consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .ingest import TxRecord
from .opcodes import OpcodeHistogram


class NodeRole(Enum):
    TARGET = "CA"
    EOA = "EOA"
    CONTRACT = "other-CA"


class Edge(NamedTuple):
    src: int
    dst: int
    value: int
    timestamp: int
    index: int


class MergedEdge(NamedTuple):
    src: int
    dst: int
    total_value: int
    tx_count: int
    first_timestamp: int


# Per-node statistics, computed from the raw (unmerged) incident edges.
# This list is frozen: models and checkpoints assume this exact order.
FEATURE_NAMES = (
    "in_degree",
    "out_degree",
    "total_degree",
    "in_value_sum",
    "out_value_sum",
    "value_balance",
    "in_value_mean",
    "out_value_mean",
    "in_value_max",
    "out_value_max",
    "unique_in_counterparties",
    "unique_out_counterparties",
    "lifetime_seconds",
    "tx_frequency",
    "is_contract",
)
N_NODE_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class MicroTxGraph:
    target: str
    nodes: tuple[str, ...]           # node 0 is always the target
    roles: tuple[NodeRole, ...]
    edges: tuple[Edge, ...]          # sorted by (timestamp, index)
    label: int
    code: OpcodeHistogram


@dataclass(frozen=True)
class LightGraph:
    target: str
    nodes: tuple[str, ...]
    roles: tuple[NodeRole, ...]
    merged_edges: tuple[MergedEdge, ...]
    node_features: np.ndarray        # (|V|, 15) float64
    label: int
    code: OpcodeHistogram


def build_micro_graph(
    target: str,
    records: Sequence[TxRecord],
    code: OpcodeHistogram,
    label: int,
    contract_addresses: frozenset[str] = frozenset(),
) -> MicroTxGraph:
    """Assemble the graph of all records around ``target``.

    Nodes are the union of from/to addresses, numbered by first appearance
    in (timestamp, index) order with the target pinned at 0, so the same
    record multiset always yields the same graph regardless of file order.
    """
    if not records:
        raise ValueError(f"{target}: cannot build a transaction graph from zero records")

    ordered = sorted(records, key=lambda r: r.sort_key)
    node_ids: dict[str, int] = {target: 0}
    for rec in ordered:
        for addr in (rec.from_address, rec.to_address):
            if addr not in node_ids:
                node_ids[addr] = len(node_ids)

    nodes = tuple(node_ids)
    roles = tuple(
        NodeRole.TARGET if addr == target
        else NodeRole.CONTRACT if addr in contract_addresses
        else NodeRole.EOA
        for addr in nodes
    )
    edges = tuple(
        Edge(node_ids[r.from_address], node_ids[r.to_address], r.value, r.timestamp, r.index)
        for r in ordered
    )
    return MicroTxGraph(target, nodes, roles, edges, label, code)


def merge_multi_edges(g: MicroTxGraph) -> LightGraph:
    """Collapse parallel edges per ordered (src, dst) pair.

    Direction is preserved: A->B and B->A stay distinct. Merged edges are
    ordered by first occurrence, so merging is deterministic too.
    """
    merged: dict[tuple[int, int], list[int]] = {}
    for e in g.edges:
        slot = merged.get((e.src, e.dst))
        if slot is None:
            merged[(e.src, e.dst)] = [e.value, 1, e.timestamp]
        else:
            slot[0] += e.value
            slot[1] += 1
            slot[2] = min(slot[2], e.timestamp)
    merged_edges = tuple(
        MergedEdge(src, dst, total, count, first)
        for (src, dst), (total, count, first) in merged.items()
    )
    return LightGraph(
        g.target, g.nodes, g.roles, merged_edges, node_features(g), g.label, g.code
    )


def node_features(g: MicroTxGraph) -> np.ndarray:
    """The 15 per-node statistics (see FEATURE_NAMES), float64.

    Value columns are wei converted to float; magnitudes around 1e20 are
    exact enough for learning and are z-scored downstream anyway.
    """
    n = len(g.nodes)
    feats = np.zeros((n, N_NODE_FEATURES), dtype=np.float64)
    in_values: list[list[int]] = [[] for _ in range(n)]
    out_values: list[list[int]] = [[] for _ in range(n)]
    in_peers: list[set[int]] = [set() for _ in range(n)]
    out_peers: list[set[int]] = [set() for _ in range(n)]
    first_ts = [None] * n
    last_ts = [None] * n

    for e in g.edges:
        out_values[e.src].append(e.value)
        in_values[e.dst].append(e.value)
        out_peers[e.src].add(e.dst)
        in_peers[e.dst].add(e.src)
        for node in (e.src, e.dst):
            if first_ts[node] is None or e.timestamp < first_ts[node]:
                first_ts[node] = e.timestamp
            if last_ts[node] is None or e.timestamp > last_ts[node]:
                last_ts[node] = e.timestamp

    for i in range(n):
        in_deg, out_deg = len(in_values[i]), len(out_values[i])
        in_sum, out_sum = sum(in_values[i]), sum(out_values[i])
        lifetime = (last_ts[i] - first_ts[i]) if first_ts[i] is not None else 0
        feats[i] = (
            in_deg,
            out_deg,
            in_deg + out_deg,
            float(in_sum),
            float(out_sum),
            float(in_sum - out_sum),
            float(in_sum) / in_deg if in_deg else 0.0,
            float(out_sum) / out_deg if out_deg else 0.0,
            float(max(in_values[i])) if in_deg else 0.0,
            float(max(out_values[i])) if out_deg else 0.0,
            len(in_peers[i]),
            len(out_peers[i]),
            float(lifetime),
            (in_deg + out_deg) / max(lifetime, 1),
            0.0 if g.roles[i] is NodeRole.EOA else 1.0,
        )
    return feats


def symmetrized_edge_index(n_nodes: int, merged_edges: Sequence[MergedEdge]) -> np.ndarray:
    """Undirected-with-self-loops edge list (2, E), deduplicated and sorted.

    This is the topology the GNN layers run on; merged-edge attributes are
    not used as weights.
    """
    pairs = {(i, i) for i in range(n_nodes)}
    for e in merged_edges:
        pairs.add((e.src, e.dst))
        pairs.add((e.dst, e.src))
    arr = np.array(sorted(pairs), dtype=np.int64).T
    return arr.reshape(2, -1)


@dataclass(frozen=True)
class GraphSample:
    """One classification sample: code vector plus prepared graph tensors."""

    address: str
    scale: int                 # snapshot index k, or 0 for a full graph
    code: np.ndarray           # (76,) float64 opcode frequencies
    node_features: np.ndarray  # (n, 15) float64
    edge_index: np.ndarray     # (2, E) int64, symmetrized + self-loops
    label: int

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @classmethod
    def from_micro(cls, g: MicroTxGraph, scale: int = 0, normalize_code: bool = False):
        light = merge_multi_edges(g)
        return cls(
            address=g.target,
            scale=scale,
            code=g.code.frequencies(normalize=normalize_code),
            node_features=light.node_features,
            edge_index=symmetrized_edge_index(len(light.nodes), light.merged_edges),
            label=g.label,
        )


def light_graph_to_json(lg: LightGraph) -> dict:
    """Plain-dict dump of a lightweight graph for debugging and plotting."""
    return {
        "target": lg.target,
        "label": lg.label,
        "nodes": [
            {"id": i, "address": addr, "role": role.value}
            for i, (addr, role) in enumerate(zip(lg.nodes, lg.roles))
        ],
        "merged_edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "total_value": str(e.total_value),  # wei exceeds JSON-safe ints
                "tx_count": e.tx_count,
                "first_timestamp": e.first_timestamp,
            }
            for e in lg.merged_edges
        ],
        "feature_names": list(FEATURE_NAMES),
        "node_features": lg.node_features.tolist(),
        "code_total_opcodes": lg.code.total,
    }
