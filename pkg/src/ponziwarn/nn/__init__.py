from .tensor import (
    Tensor,
    concat,
    gather_rows,
    nll_loss,
    scatter_add_rows,
    segment_softmax,
)
from .layers import (
    POOL_MODES,
    Dense,
    Dropout,
    GATLayer,
    GCNLayer,
    GlobalAttentionPool,
    MLP,
    gaussian_param,
    graph_pool,
)
from .optim import Adam

__all__ = [
    "Adam",
    "Dense",
    "Dropout",
    "GATLayer",
    "GCNLayer",
    "GlobalAttentionPool",
    "MLP",
    "POOL_MODES",
    "Tensor",
    "concat",
    "gather_rows",
    "gaussian_param",
    "graph_pool",
    "nll_loss",
    "scatter_add_rows",
    "segment_softmax",
]
