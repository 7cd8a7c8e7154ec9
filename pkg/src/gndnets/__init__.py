"""Graph neural diffusion networks for semi-supervised node classification.

A single-layer graph network aggregates local and global neighborhood
information through learnable diffusions over the hop sequence
Z, WZ, ..., W^(K-1)Z of a row-stochastic propagation matrix, built on a
small reverse-mode autodiff engine; classic two-layer convolution, linear
K-power, and fixed personalized-teleport / heat-kernel schedules ship as
baselines.
"""

from .autodiff import Parameter, Tape, adam_step, glorot_init, softmax_rows
from .data import (
    DatasetFiles,
    SbmConfig,
    dump_embeddings,
    generate_sbm,
    load_dataset,
    read_embedding,
    save_dataset,
)
from .diffusion import (
    DiffusionSchedule,
    DsDiffusion,
    MlpDiffusion,
    SlpDiffusion,
    ds_evolve,
    fixed_diffuse,
    mlp_aggregate,
    schedule_coefficients,
    slp_aggregate,
    taped_hops,
)
from .errors import GndError
from .estimator import GNDNetsClassifier
from .graph import (
    Graph,
    HopSequence,
    SparseMatrix,
    add_self_loops,
    check_nonbipartite_connected,
    hop_sequence,
    renormalized_smoothing,
    spmm,
    transition_matrix,
)
from .models import (
    VARIANTS,
    GraphOperators,
    Model,
    ModelConfig,
    accuracy,
    default_config,
    load_checkpoint,
    loss_value,
    predict_labels,
    save_checkpoint,
)
from .training import (
    EarlyStopping,
    ExperimentResult,
    Split,
    SplitSpec,
    TrainConfig,
    TrainHistory,
    evaluate,
    run_experiment,
    sample_split,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetFiles",
    "DiffusionSchedule",
    "DsDiffusion",
    "EarlyStopping",
    "ExperimentResult",
    "GNDNetsClassifier",
    "GndError",
    "Graph",
    "GraphOperators",
    "HopSequence",
    "MlpDiffusion",
    "Model",
    "ModelConfig",
    "Parameter",
    "SbmConfig",
    "SlpDiffusion",
    "SparseMatrix",
    "Split",
    "SplitSpec",
    "Tape",
    "TrainConfig",
    "TrainHistory",
    "VARIANTS",
    "accuracy",
    "adam_step",
    "add_self_loops",
    "check_nonbipartite_connected",
    "default_config",
    "ds_evolve",
    "dump_embeddings",
    "evaluate",
    "fixed_diffuse",
    "generate_sbm",
    "glorot_init",
    "hop_sequence",
    "load_checkpoint",
    "load_dataset",
    "loss_value",
    "mlp_aggregate",
    "predict_labels",
    "read_embedding",
    "renormalized_smoothing",
    "run_experiment",
    "sample_split",
    "save_checkpoint",
    "save_dataset",
    "schedule_coefficients",
    "slp_aggregate",
    "softmax_rows",
    "spmm",
    "taped_hops",
    "train",
    "transition_matrix",
]
