"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .graphs import GraphSample, N_NODE_FEATURES
from .opcodes import N_CATEGORIES


def check_samples(X) -> list[GraphSample]:
    samples = list(X)
    if not samples:
        raise ValueError("expected at least one sample")
    for i, s in enumerate(samples):
        if not isinstance(s, GraphSample):
            raise TypeError(f"sample {i}: expected GraphSample, got {type(s).__name__}")
        if s.code.shape != (N_CATEGORIES,):
            raise ValueError(f"sample {i}: code vector must have {N_CATEGORIES} entries")
        if s.node_features.ndim != 2 or s.node_features.shape[1] != N_NODE_FEATURES:
            raise ValueError(f"sample {i}: node features must be (n, {N_NODE_FEATURES})")
        if s.n_nodes < 1:
            raise ValueError(f"sample {i}: graph has no nodes")
        if not np.isfinite(s.code).all() or not np.isfinite(s.node_features).all():
            raise ValueError(f"sample {i}: non-finite feature values")
        if s.edge_index.size and s.edge_index.max() >= s.n_nodes:
            raise ValueError(f"sample {i}: edge index out of range")
    return samples


def check_labels(y, n_samples: int) -> np.ndarray:
    labels = np.asarray(y, dtype=np.int64)
    if labels.shape != (n_samples,):
        raise ValueError(f"expected {n_samples} labels, got shape {labels.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 (non-Ponzi) or 1 (Ponzi)")
    return labels
