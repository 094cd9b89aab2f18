"""Gradient-magnitude importance sampling for mini-batch SGD.

Instances whose recent gradients are large are sampled more often, and each
sampled gradient is re-weighted by 1/(n p_i) so the uniformly weighted
objective is still the one being minimized. The package bundles the
training loops, the dynamic weighted sampler, exact variance diagnostics,
dataset tooling, a scikit-learn estimator, and a benchmarking CLI.
"""

from .dataset import (
    Dataset,
    Instance,
    ParseError,
    load_csv,
    load_idx,
    load_libsvm,
    save_csv,
    save_libsvm,
    split,
    synth_biased,
)
from .diagnostics import (
    InfoGainRecord,
    VarianceReport,
    finite_diff_check,
    full_gradient,
    info_gain,
    optimal_distribution,
    significance,
    uncertainty,
    variance,
)
from .engine import (
    MetricsRecord,
    StageConfig,
    TrainConfig,
    TrainedModel,
    reweight,
    sgd_step,
    train,
    train_ashr,
    train_assgd,
    train_mbsgd,
    train_optimal,
)
from .estimator import ActiveSGDClassifier
from .models import (
    ActivationSpec,
    BatchBackwardResult,
    LinearParams,
    LossSpec,
    MlpParams,
    NumericError,
    batch_backward,
    grad_norm_explicit,
    load_params,
    predict,
    regularizer_gradient,
    save_params,
)
from .sampler import HistoryStore, WeightIndex, naive_draw_batch, stage_subset

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "ActiveSGDClassifier",
    "BatchBackwardResult",
    "Dataset",
    "HistoryStore",
    "InfoGainRecord",
    "Instance",
    "LinearParams",
    "LossSpec",
    "MetricsRecord",
    "MlpParams",
    "NumericError",
    "ParseError",
    "StageConfig",
    "TrainConfig",
    "TrainedModel",
    "VarianceReport",
    "WeightIndex",
    "batch_backward",
    "finite_diff_check",
    "full_gradient",
    "grad_norm_explicit",
    "info_gain",
    "load_csv",
    "load_idx",
    "load_libsvm",
    "load_params",
    "naive_draw_batch",
    "optimal_distribution",
    "predict",
    "regularizer_gradient",
    "reweight",
    "save_csv",
    "save_libsvm",
    "save_params",
    "sgd_step",
    "significance",
    "split",
    "stage_subset",
    "synth_biased",
    "train",
    "train_ashr",
    "train_assgd",
    "train_mbsgd",
    "train_optimal",
    "uncertainty",
    "variance",
]
