"""ponziwarn: dual-channel early warning for Ethereum Ponzi contracts.

The pipeline: disassemble contract bytecode into a 76-bin opcode-frequency
vector, build the contract-centric transaction graph, expand each account
into temporal snapshot graphs of growing scale (TEAug), and classify with
a code-channel MLP fused with a two-layer GNN over the transaction graph.
"""

from .graphs import (
    FEATURE_NAMES,
    GraphSample,
    LightGraph,
    MicroTxGraph,
    build_micro_graph,
    light_graph_to_json,
    merge_multi_edges,
    node_features,
    symmetrized_edge_index,
)
from .ingest import (
    AccountData,
    IngestError,
    LabeledAccount,
    TxRecord,
    load_dataset,
    load_labels,
    load_transaction_file,
    parse_transactions,
)
from .metrics import ScaleReport, ThresholdResult, f1_score, threshold_report
from .model import (
    DualChannelClassifier,
    DualChannelConfig,
    DualChannelModel,
    FeatureScaler,
    TrainingDivergedError,
    train_model,
)
from .opcodes import (
    CATEGORY_NAMES,
    N_CATEGORIES,
    BytecodeError,
    OpcodeHistogram,
    code_histogram,
    disassemble,
    load_bytecode_file,
    opcode_histogram,
)
from .experiment import (
    ExperimentConfig,
    SplitSpec,
    evaluate_per_scale,
    load_experiment_config,
    run_experiment,
    split_dataset,
)
from .synth import synth_generate, write_dataset
from .teaug import ScaleSeries, TemporalEvolutionAugmenter, augment_split, scale_stats, teaug

__version__ = "0.1.0"

__all__ = [
    "AccountData",
    "BytecodeError",
    "CATEGORY_NAMES",
    "DualChannelClassifier",
    "DualChannelConfig",
    "DualChannelModel",
    "ExperimentConfig",
    "FEATURE_NAMES",
    "FeatureScaler",
    "GraphSample",
    "IngestError",
    "LabeledAccount",
    "LightGraph",
    "MicroTxGraph",
    "N_CATEGORIES",
    "OpcodeHistogram",
    "ScaleReport",
    "ScaleSeries",
    "SplitSpec",
    "TemporalEvolutionAugmenter",
    "ThresholdResult",
    "TrainingDivergedError",
    "TxRecord",
    "augment_split",
    "build_micro_graph",
    "code_histogram",
    "disassemble",
    "evaluate_per_scale",
    "f1_score",
    "light_graph_to_json",
    "load_bytecode_file",
    "load_dataset",
    "load_experiment_config",
    "load_labels",
    "load_transaction_file",
    "merge_multi_edges",
    "node_features",
    "opcode_histogram",
    "parse_transactions",
    "run_experiment",
    "scale_stats",
    "split_dataset",
    "symmetrized_edge_index",
    "synth_generate",
    "teaug",
    "threshold_report",
    "train_model",
    "write_dataset",
]
