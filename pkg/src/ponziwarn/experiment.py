"""Experiment protocol: split, augment, train, per-scale evaluation,
threshold analysis, ablations. Everything is seeded; identical configs
produce byte-identical metric files.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .ingest import AccountData, known_contracts, load_dataset
from .metrics import ScaleReport, ThresholdResult, f1_score, threshold_report
from .model import DualChannelClassifier
from .synth import synth_generate
from .teaug import augment_split

# Ablation grid: which channels each named method enables.
METHOD_PRESETS = {
    "code": {"channels": "code", "use_code_mlp": True},
    "trans": {"channels": "trans", "use_code_mlp": True},
    "dual_nomlp": {"channels": "dual", "use_code_mlp": False},
    "dual": {"channels": "dual", "use_code_mlp": True},
}


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test partition sizes (or ratios, when the dataset is larger)."""

    train: int = 256
    val: int = 64
    test: int = 80
    seed: int = 0

    @property
    def total(self) -> int:
        return self.train + self.val + self.test


def split_dataset(accounts, spec: SplitSpec):
    """Seeded shuffle, then partition into disjoint train/val/test covering
    the whole dataset. Exact counts when sizes match; proportional
    (largest-remainder) scaling when the dataset is bigger.
    """
    n = len(accounts)
    if n < spec.total:
        raise ValueError(f"dataset has {n} accounts, split needs at least {spec.total}")
    if n == spec.total:
        counts = [spec.train, spec.val, spec.test]
    else:
        quotas = [spec.train * n / spec.total, spec.val * n / spec.total,
                  spec.test * n / spec.total]
        counts = [int(q) for q in quotas]
        order = sorted(range(3), key=lambda i: quotas[i] - counts[i], reverse=True)
        for i in range(n - sum(counts)):
            counts[order[i % 3]] += 1

    rng = np.random.Generator(np.random.Philox(spec.seed))
    shuffled = [accounts[i] for i in rng.permutation(n)]
    train = shuffled[: counts[0]]
    val = shuffled[counts[0] : counts[0] + counts[1]]
    test = shuffled[counts[0] + counts[1] :]
    return train, val, test


def evaluate_per_scale(classifiers, test_sets, method: str = "", delta: int = 10) -> ScaleReport:
    """F1 per scale for one classifier or a list of repeat classifiers."""
    if not test_sets or any(not s for s in test_sets):
        raise ValueError("every per-scale test set must be non-empty")
    if not isinstance(classifiers, (list, tuple)):
        classifiers = [classifiers]
    rows = []
    for clf in classifiers:
        rows.append([
            f1_score(clf.predict(scale_set), [s.label for s in scale_set])
            for scale_set in test_sets
        ])
    return ScaleReport(method=method, delta=delta, per_repeat=rows)


@dataclass
class ExperimentConfig:
    out_dir: str
    data_dir: str | None = None        # None -> synthetic data
    synth_n_ponzi: int = 75
    synth_n_normal: int = 325
    synth_seed: int = 0
    delta: int = 10
    m: int = 10
    min_tx: int = 100
    train_size: int = 256
    val_size: int = 64
    test_size: int = 80
    split_seed: int = 0
    methods: tuple[str, ...] = ("dual",)
    repeats: int = 5
    epsilon: float = 0.005
    normalize_code: bool = False
    hidden_dim: int = 64
    gnn_backbone: str = "gcn"
    pooling: str = "mean"
    heads: int = 1
    dropout: float = 0.1
    lr: float = 0.01
    l2: float = 1e-5
    batch_size: int = 200
    epochs: int = 200
    seed: int = 0
    init_std: float = 0.1
    class_weight: str | None = None

    def classifier_params(self, method: str, repeat: int) -> dict:
        if method not in METHOD_PRESETS:
            raise ValueError(f"unknown method {method!r}, expected one of {sorted(METHOD_PRESETS)}")
        params = {
            "hidden_dim": self.hidden_dim, "gnn_backbone": self.gnn_backbone,
            "pooling": self.pooling, "heads": self.heads, "dropout": self.dropout,
            "lr": self.lr, "l2": self.l2, "batch_size": self.batch_size,
            "epochs": self.epochs, "seed": self.seed + repeat,
            "init_std": self.init_std, "class_weight": self.class_weight,
        }
        params.update(METHOD_PRESETS[method])
        return params


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "methods" in raw:
        raw["methods"] = tuple(raw["methods"])
    return ExperimentConfig(**raw)


def load_accounts(config: ExperimentConfig) -> tuple[list[AccountData], frozenset[str]]:
    # TEAug needs m*delta records per account, so the load filter is at
    # least that regardless of the configured minimum.
    min_tx = max(config.min_tx, config.m * config.delta)
    if config.data_dir is None:
        accounts = synth_generate(config.synth_n_ponzi, config.synth_n_normal,
                                  config.delta, config.m, config.synth_seed)
        accounts = [a for a in accounts if len(a.records) >= min_tx]
        contracts = frozenset(a.address for a in accounts)
    else:
        accounts = load_dataset(
            os.path.join(config.data_dir, "tx"),
            os.path.join(config.data_dir, "bytecode"),
            os.path.join(config.data_dir, "labels.csv"),
            min_tx=min_tx,
        )
        contracts = known_contracts(os.path.join(config.data_dir, "bytecode"))
    return accounts, contracts


def _format_row(values) -> str:
    return ",".join(f"{v:.6f}" for v in values)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def run_experiment(config: ExperimentConfig) -> str:
    """Execute the full protocol and write a self-contained run directory:
    config snapshot, split summary, per-method metrics (CSV + JSON),
    plot-ready F1 curves, threshold recommendations and one checkpoint per
    method (first repeat).
    """
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        snapshot = dataclasses.asdict(config)
        snapshot["methods"] = list(config.methods)
        json.dump(snapshot, fh, indent=2, sort_keys=True)

    try:
        accounts, contracts = load_accounts(config)
    except Exception as exc:
        raise StageError("load", exc) from exc

    try:
        spec = SplitSpec(config.train_size, config.val_size, config.test_size,
                         config.split_seed)
        train_acc, val_acc, test_acc = split_dataset(accounts, spec)
        summary = {
            name: {
                "size": len(part),
                "ponzi": sum(a.label for a in part),
                "non_ponzi": sum(1 - a.label for a in part),
            }
            for name, part in (("train", train_acc), ("val", val_acc), ("test", test_acc))
        }
        with open(os.path.join(out, "split_summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("split", exc) from exc

    try:
        kwargs = dict(delta=config.delta, m=config.m,
                      contract_addresses=contracts, normalize_code=config.normalize_code)
        train_samples = augment_split(train_acc, mode="train", **kwargs)
        val_scales = augment_split(val_acc, mode="val", **kwargs)
        val_pooled = [s for per_scale in val_scales for s in per_scale]
        test_scales = augment_split(test_acc, mode="test", **kwargs)
    except Exception as exc:
        raise StageError("augment", exc) from exc

    reports: list[ScaleReport] = []
    thresholds: dict[str, ThresholdResult] = {}
    for method in config.methods:
        try:
            classifiers = []
            for repeat in range(config.repeats):
                clf = DualChannelClassifier(**config.classifier_params(method, repeat))
                clf.fit(train_samples, X_val=val_pooled)
                classifiers.append(clf)
            classifiers[0].save(os.path.join(out, f"checkpoint_{method}.npz"))
        except Exception as exc:
            raise StageError(f"train[{method}]", exc) from exc
        try:
            report = evaluate_per_scale(classifiers, test_scales, method, config.delta)
            reports.append(report)
            thresholds[method] = threshold_report(report, config.epsilon)
        except Exception as exc:
            raise StageError(f"evaluate[{method}]", exc) from exc

    try:
        _write_reports(out, config, reports, thresholds)
    except Exception as exc:
        raise StageError("report", exc) from exc
    return out


def _write_reports(out, config, reports, thresholds):
    scales = list(range(1, config.m + 1))
    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("method,repeats," + ",".join(f"scale_{k}" for k in scales) + "\n")
        for report in reports:
            fh.write(f"{report.method},{report.repeats},{_format_row(report.mean)}\n")
    with open(os.path.join(out, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump({r.method: r.to_dict() for r in reports}, fh, indent=2, sort_keys=True)
    with open(os.path.join(out, "plot_data.csv"), "w", encoding="utf-8") as fh:
        fh.write("scale,tx_count," + ",".join(r.method for r in reports) + "\n")
        for k in scales:
            row = [r.mean[k - 1] for r in reports]
            fh.write(f"{k},{k * config.delta},{_format_row(row)}\n")
    with open(os.path.join(out, "threshold.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {method: dataclasses.asdict(result) for method, result in thresholds.items()},
            fh, indent=2, sort_keys=True,
        )
