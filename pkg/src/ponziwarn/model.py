"""The dual-channel early-warning model and its sklearn-style estimator.

Architecture: a code channel (one relu+dropout dense layer over the 76
opcode frequencies, or a raw passthrough for the no-MLP ablation), a
transaction channel (two message-passing layers over node features plus a
graph pooling), concatenation, and a linear head producing two-class
log-probabilities. Single-channel baselines drop the other channel
entirely.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .graphs import GraphSample, N_NODE_FEATURES
from .metrics import f1_score
from .nn import Adam, Dense, Dropout, GATLayer, GCNLayer, GlobalAttentionPool
from .nn import POOL_MODES, Tensor, concat, graph_pool, nll_loss
from .opcodes import N_CATEGORIES
from .validation import check_labels, check_samples

HIDDEN_DIM_CHOICES = (16, 32, 64, 128)
GNN_BACKBONES = ("gcn", "gat")
CHANNEL_MODES = ("dual", "code", "trans")

CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the loss or a parameter goes non-finite during training."""


@dataclass
class DualChannelConfig:
    hidden_dim: int = 64
    gnn_backbone: str = "gcn"
    pooling: str = "mean"
    channels: str = "dual"
    use_code_mlp: bool = True
    heads: int = 1
    dropout: float = 0.1
    lr: float = 0.01
    l2: float = 1e-5
    batch_size: int = 200
    epochs: int = 200
    seed: int = 0
    init_std: float = 0.1
    class_weight: str | None = None

    def validate(self) -> "DualChannelConfig":
        if self.hidden_dim not in HIDDEN_DIM_CHOICES:
            raise ValueError(f"hidden_dim must be one of {HIDDEN_DIM_CHOICES}, got {self.hidden_dim}")
        if self.gnn_backbone not in GNN_BACKBONES:
            raise ValueError(f"gnn_backbone must be one of {GNN_BACKBONES}, got {self.gnn_backbone!r}")
        if self.pooling not in POOL_MODES:
            raise ValueError(f"pooling must be one of {POOL_MODES}, got {self.pooling!r}")
        if self.channels not in CHANNEL_MODES:
            raise ValueError(f"channels must be one of {CHANNEL_MODES}, got {self.channels!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.heads < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("heads and batch_size must be >= 1, epochs >= 0")
        return self


class DualChannelModel:
    """Raw model: owns parameters, computes per-sample log-probabilities.

    hidden_dim is unconstrained here; the public classifier enforces the
    configured search set. Tests use small widths for gradient checks.
    """

    def __init__(self, config: DualChannelConfig):
        self.config = config
        rng = np.random.Generator(np.random.Philox(config.seed))
        h = config.hidden_dim
        std = config.init_std
        self.dropout = Dropout(config.dropout)

        self.code_mlp = None
        self.gnn1 = None
        self.gnn2 = None
        self.pool_gate = None

        head_in = 0
        if config.channels in ("dual", "code"):
            if config.channels == "code" or config.use_code_mlp:
                self.code_mlp = Dense(N_CATEGORIES, h, "relu", rng=rng, init_std=std)
                head_in += h
            else:
                head_in += N_CATEGORIES  # no-MLP ablation: raw code features
        if config.channels in ("dual", "trans"):
            if config.gnn_backbone == "gcn":
                self.gnn1 = GCNLayer(N_NODE_FEATURES, h, rng=rng, init_std=std)
                self.gnn2 = GCNLayer(h, h, rng=rng, init_std=std)
            else:
                self.gnn1 = GATLayer(N_NODE_FEATURES, h, rng=rng, heads=config.heads,
                                     concat_heads=True, init_std=std)
                self.gnn2 = GATLayer(h * config.heads, h, rng=rng, heads=config.heads,
                                     concat_heads=False, init_std=std)
            if config.pooling == "global_attention":
                self.pool_gate = GlobalAttentionPool(h, rng=rng, init_std=std)
            head_in += h
        self.head = Dense(head_in, 2, None, rng=rng, init_std=std)

    def forward(self, sample: GraphSample, training: bool = False, rng=None) -> Tensor:
        """Log-probabilities (1, 2) for one sample."""
        parts = []
        if self.code_mlp is not None:
            z_code = self.code_mlp(Tensor(sample.code[None, :]))
            parts.append(self.dropout(z_code, training, rng))
        elif self.config.channels == "dual":
            parts.append(Tensor(sample.code[None, :]))
        if self.gnn1 is not None:
            hidden = self.gnn1(Tensor(sample.node_features), sample.edge_index)
            hidden = self.dropout(hidden, training, rng)
            hidden = self.gnn2(hidden, sample.edge_index)
            hidden = self.dropout(hidden, training, rng)
            parts.append(graph_pool(hidden, self.config.pooling, self.pool_gate))
        z = parts[0] if len(parts) == 1 else concat(parts, axis=1)
        return self.head(z).log_softmax()

    def predict_sample(self, sample: GraphSample) -> tuple[int, float]:
        """(label, Ponzi probability) for one sample, eval mode."""
        log_probs = self.forward(sample).data[0]
        return int(log_probs.argmax()), float(np.exp(log_probs[1]))

    def parameters(self) -> dict[str, Tensor]:
        groups = {
            "code_mlp": self.code_mlp,
            "gnn1": self.gnn1,
            "gnn2": self.gnn2,
            "pool_gate": self.pool_gate,
            "head": self.head,
        }
        return {
            f"{prefix}.{name}": p
            for prefix, layer in groups.items()
            if layer is not None
            for name, p in layer.parameters().items()
        }

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = self.parameters()
        if set(state) != set(params):
            raise ValueError("checkpoint parameter names do not match the model")
        for name, p in params.items():
            if state[name].shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: checkpoint {state[name].shape}, "
                    f"model {p.data.shape}"
                )
            p.data = state[name].copy()


class FeatureScaler:
    """Column z-scoring for code vectors and node features.

    Fit on the training split only; transform everywhere. Constant columns
    keep unit scale so they pass through unchanged.
    """

    def __init__(self):
        self.code_mean = None
        self.code_std = None
        self.node_mean = None
        self.node_std = None

    @staticmethod
    def _moments(matrix: np.ndarray):
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std[std < 1e-12] = 1.0
        return mean, std

    def fit(self, samples: list[GraphSample]) -> "FeatureScaler":
        self.code_mean, self.code_std = self._moments(np.stack([s.code for s in samples]))
        all_nodes = np.concatenate([s.node_features for s in samples], axis=0)
        self.node_mean, self.node_std = self._moments(all_nodes)
        return self

    def transform(self, samples: list[GraphSample]) -> list[GraphSample]:
        if self.code_mean is None:
            raise ValueError("scaler is not fitted")
        return [
            dataclasses.replace(
                s,
                code=(s.code - self.code_mean) / self.code_std,
                node_features=(s.node_features - self.node_mean) / self.node_std,
            )
            for s in samples
        ]

    def state_dict(self):
        return {
            "code_mean": self.code_mean, "code_std": self.code_std,
            "node_mean": self.node_mean, "node_std": self.node_std,
        }

    def load_state_dict(self, state):
        for key, value in state.items():
            setattr(self, key, np.asarray(value, dtype=np.float64))
        return self


def _sample_weights(labels: np.ndarray, class_weight: str | None) -> np.ndarray:
    if class_weight is None:
        return np.ones(len(labels))
    if class_weight != "balanced":
        raise ValueError(f"unsupported class_weight {class_weight!r}")
    counts = np.bincount(labels, minlength=2)
    return len(labels) / (2.0 * np.maximum(counts, 1))[labels]


def train_model(
    model: DualChannelModel,
    train_samples: list[GraphSample],
    val_samples: list[GraphSample] | None,
    config: DualChannelConfig,
) -> list[dict]:
    """Mini-batch Adam training with best-val-F1 checkpointing.

    Returns the per-epoch history; the model is left holding the best
    checkpoint (or the final parameters when no validation set is given).
    Deterministic for a fixed config, seed and sample order.
    """
    rng = np.random.Generator(np.random.Philox([config.seed, 1]))
    optimizer = Adam(model.parameters(), lr=config.lr, weight_decay=config.l2)
    labels = np.array([s.label for s in train_samples], dtype=np.int64)
    weights = _sample_weights(labels, config.class_weight)

    history = []
    best_f1 = -1.0
    best_state = None
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_samples))
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start : start + config.batch_size]
            optimizer.zero_grad()
            batch_loss = 0.0
            for idx in batch:
                sample = train_samples[idx]
                log_probs = model.forward(sample, training=True, rng=rng)
                loss = nll_loss(log_probs, [sample.label])
                scale = weights[idx] / len(batch)
                loss.backward(np.asarray(scale))
                batch_loss += float(loss.data) * scale
            if not np.isfinite(batch_loss):
                bad = [k for k, p in model.parameters().items()
                       if not np.isfinite(p.data).all()]
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}"
                    + (f"; non-finite parameters: {', '.join(bad)}" if bad else "")
                )
            optimizer.step()
            epoch_loss += batch_loss * len(batch)
        epoch_loss /= len(order)

        record = {"epoch": epoch, "train_loss": epoch_loss}
        if val_samples:
            predictions = [model.predict_sample(s)[0] for s in val_samples]
            val_f1 = f1_score(predictions, [s.label for s in val_samples])
            record["val_f1"] = val_f1
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_state = model.state_dict()
        history.append(record)

    if best_state is not None:
        model.load_state_dict(best_state)
    return history


class DualChannelClassifier(BaseEstimator, ClassifierMixin):
    """Dual-channel Ponzi classifier with the scikit-learn estimator API.

    X is a list of GraphSample (raw, unscaled features); fit standardizes
    with training statistics, trains with mini-batch Adam and keeps the
    checkpoint with the best pooled-validation F1 when a validation set is
    passed. All constructor arguments are plain hyperparameters, so
    get_params/set_params/clone compose with the usual tooling.
    """

    def __init__(self, hidden_dim=64, gnn_backbone="gcn", pooling="mean",
                 channels="dual", use_code_mlp=True, heads=1, dropout=0.1,
                 lr=0.01, l2=1e-5, batch_size=200, epochs=200, seed=0,
                 init_std=0.1, class_weight=None):
        self.hidden_dim = hidden_dim
        self.gnn_backbone = gnn_backbone
        self.pooling = pooling
        self.channels = channels
        self.use_code_mlp = use_code_mlp
        self.heads = heads
        self.dropout = dropout
        self.lr = lr
        self.l2 = l2
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.init_std = init_std
        self.class_weight = class_weight

    def _config(self) -> DualChannelConfig:
        fields = {f.name: getattr(self, f.name) for f in dataclasses.fields(DualChannelConfig)}
        return DualChannelConfig(**fields).validate()

    def fit(self, X, y=None, X_val=None, y_val=None):
        samples = check_samples(X)
        labels = check_labels(y if y is not None else [s.label for s in samples], len(samples))
        samples = [dataclasses.replace(s, label=int(l)) for s, l in zip(samples, labels)]
        val = check_samples(X_val) if X_val is not None else None
        if val is not None and y_val is not None:
            y_val = check_labels(y_val, len(val))
            val = [dataclasses.replace(s, label=int(l)) for s, l in zip(val, y_val)]

        config = self._config()
        self.scaler_ = FeatureScaler().fit(samples)
        self.model_ = DualChannelModel(config)
        self.history_ = train_model(
            self.model_,
            self.scaler_.transform(samples),
            self.scaler_.transform(val) if val is not None else None,
            config,
        )
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        samples = self.scaler_.transform(check_samples(X))
        return np.exp([self.model_.forward(s).data[0] for s in samples])

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def predict_account(self, sample: GraphSample) -> tuple[int, float]:
        """(label, Ponzi probability) for a single account graph."""
        proba = self.predict_proba([sample])[0]
        return int(proba.argmax()), float(proba[1])

    # -- persistence --------------------------------------------------------

    def save(self, path):
        check_is_fitted(self, "model_")
        state = self.model_.state_dict()
        meta = {
            "format_version": CHECKPOINT_VERSION,
            "params": self.get_params(),
            "shapes": {name: list(arr.shape) for name, arr in state.items()},
        }
        arrays = {f"param/{name}": arr for name, arr in state.items()}
        arrays.update({f"scaler/{k}": v for k, v in self.scaler_.state_dict().items()})
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)

    @classmethod
    def load(cls, path) -> "DualChannelClassifier":
        with np.load(path) as archive:
            meta = json.loads(archive["__meta__"].tobytes().decode())
            if meta.get("format_version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
            estimator = cls(**meta["params"])
            estimator.scaler_ = FeatureScaler().load_state_dict(
                {k[len("scaler/"):]: archive[k] for k in archive.files if k.startswith("scaler/")}
            )
            state = {k[len("param/"):]: archive[k] for k in archive.files if k.startswith("param/")}
        for name, shape in meta["shapes"].items():
            if name not in state or list(state[name].shape) != shape:
                raise ValueError(f"checkpoint shape table mismatch for {name!r}")
        estimator.model_ = DualChannelModel(estimator._config())
        estimator.model_.load_state_dict(state)
        estimator.history_ = []
        estimator.classes_ = np.array([0, 1])
        return estimator
