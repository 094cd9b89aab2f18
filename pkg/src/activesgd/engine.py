"""Training loops over a shared weighted-sampling core.

Four algorithms:

- ``mbsgd``: uniform mini-batch SGD (importance weight exactly 1).
- ``optimal``: recomputes every instance's gradient norm each iteration and
  samples from the exact norm-proportional distribution (reference; O(n)
  gradient evaluations per iteration).
- ``assgd``: approximates each instance's gradient norm by the value from
  its last visit, mixed with a uniform floor beta/n, and refreshes the b
  sampled entries per iteration.
- ``ashr``: staged variant of ``assgd``; each stage trains on a random
  m-subset with a proximal pull toward the stage's starting parameters.

Sampled gradients are re-weighted by 1/(n p_i) so every algorithm optimizes
the same uniformly weighted objective. All loops are deterministic in
(dataset, config, seed); recorded wall time covers the training step only.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, models
from .models import LossSpec, NumericError
from .sampler import HistoryStore, WeightIndex, stage_subset

ALGORITHMS = ("mbsgd", "optimal", "assgd", "ashr")


@dataclass
class MetricsRecord:
    """One benchmark row; `variance_estimate` is None when not tracked."""

    iteration: int
    wall_time_ms: float
    train_loss: float
    test_error: float
    variance_estimate: float | None
    algorithm: str
    seed: int


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.1
    b: int = 16
    T: int = 1000
    beta: float = 0.1
    seed: int = 0
    eval_every: int = 100
    loss_spec: LossSpec = field(default_factory=LossSpec)
    algorithm: str = "assgd"
    eta_decay: float = 0.0
    hidden: tuple = ()
    activation: str = "sigmoid"
    track_variance: bool = False
    trace_samples: bool = False
    trace_distributions: bool = False

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.b < 1:
            raise ValueError("batch size must be at least 1")
        if self.T < 1:
            raise ValueError("iteration budget must be at least 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")
        if self.eta_decay < 0:
            raise ValueError("eta_decay must be non-negative")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")
        models.ActivationSpec(self.activation)


@dataclass(frozen=True)
class StageConfig:
    """Staged-training shape: subset size m, iterations per stage g, and the
    proximal strength gamma (a float, or a callable (stage, m, variance) -> float)."""

    m: int | None = None
    g: int | None = None
    gamma: object = 1e-3

    def resolved(self, n, b):
        m = self.m if self.m is not None else max(1, math.ceil(n / 16))
        if not 1 <= m <= n:
            raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
        # default: 16 passes over the subset per stage
        g = self.g if self.g is not None else max(1, math.ceil(16 * m / b))
        if g < 1:
            raise ValueError("stage length g must be at least 1")
        return m, g

    def gamma_at(self, stage, m, variance_estimate):
        if callable(self.gamma):
            return float(self.gamma(stage, m, variance_estimate))
        return float(self.gamma)


@dataclass
class TrainedModel:
    """Final parameters plus everything recorded along the way."""

    params: object
    metrics: list
    history: HistoryStore | None = None
    sample_weights: np.ndarray | None = None
    stage_subsets: list | None = None
    sampled_ids: list | None = None
    distributions: list | None = None


def reweight(grad, n, p):
    """Scale a sampled gradient by 1/(n p) so non-uniform draws stay unbiased."""
    if p <= 0:
        raise ValueError("sampling probability must be positive")
    return models.grad_scale(grad, 1.0 / (n * p))


def sgd_step(params, avg_gradient, reg_gradient, eta):
    """One descent step: params - eta * reg_gradient - eta * avg_gradient."""
    return models.step_params(params, eta, models.grad_add(reg_gradient, avg_gradient))


def proximal_gradient(params, anchor, gamma):
    """Gradient of (gamma/2) ||params - anchor||^2; exactly zero at the anchor."""
    return models.grad_scale(models.params_minus(params, anchor), gamma)


def init_params(dataset, config, rng):
    """Starting parameters: zero linear weights, or small random MLP layers.

    Consumes the random stream identically for every algorithm so that runs
    sharing a seed share their initialization.
    """
    spec = config.loss_spec
    if spec.binary:
        if dataset.num_classes != 2:
            raise ValueError(f"{spec.kind} loss requires a binary (+1/-1) dataset")
        out = 1
    else:
        if dataset.num_classes < 3:
            raise ValueError("softmax loss requires class-id labels (num_classes >= 3)")
        out = dataset.num_classes
    if not config.hidden:
        if out == 1:
            return models.LinearParams(np.zeros(dataset.dimension))
        return models.LinearParams(np.zeros((out, dataset.dimension)))
    sizes = [dataset.dimension, *config.hidden, out]
    layers = []
    for l, m in zip(sizes[:-1], sizes[1:]):
        layers.append((rng.normal(0.0, 1.0 / np.sqrt(l), size=(m, l)), np.zeros(m)))
    return models.MlpParams(layers, models.ActivationSpec(config.activation))


class _RunState:
    def __init__(self, params, rng, config, label):
        self.params = params
        self.rng = rng
        self.config = config
        self.label = label
        self.metrics = []
        self.step_seconds = 0.0
        self.last_variance = None
        self.sampled_ids = [] if config.trace_samples else None
        self.distributions = [] if config.trace_distributions else None


def _dataset_scores(params, dataset):
    matrix = dataset.features_matrix()
    parts = []
    for start in range(0, dataset.n, models.CHUNK):
        parts.append(models.predict_batch(params, matrix[start : start + models.CHUNK]))
    return np.concatenate(parts)


def _error_rate(params, dataset, spec):
    scores = _dataset_scores(params, dataset)
    labels = dataset.labels()
    if spec.binary:
        predicted = np.where(scores >= 0.0, 1, -1)
    else:
        predicted = np.argmax(scores, axis=1)
    return float(np.mean(predicted != labels))


def _evaluate(state, t, dataset, test_dataset, index, var_dataset):
    spec = state.config.loss_spec
    train_loss = float(np.mean(diagnostics.dataset_losses(state.params, dataset, spec)))
    eval_ds = test_dataset if test_dataset is not None else dataset
    test_error = _error_rate(state.params, eval_ds, spec)
    var = None
    if state.config.track_variance:
        # refresh prefix sums so the measured distribution sums to 1 exactly
        index.recompute()
        var = diagnostics.variance(
            state.params, var_dataset, spec, index.probabilities(), state.config.b
        ).variance
        state.last_variance = var
    state.metrics.append(
        MetricsRecord(
            iteration=t,
            wall_time_ms=state.step_seconds * 1000.0,
            train_loss=train_loss,
            test_error=test_error,
            variance_estimate=var,
            algorithm=state.label,
            seed=state.config.seed,
        )
    )


def _run_segment(
    state,
    dataset,
    index,
    num_iters,
    start_t,
    total_T,
    *,
    sub_ids=None,
    update_weights=False,
    global_weights=None,
    history=None,
    anchor=None,
    gamma=0.0,
    optimal_mode=False,
    test_dataset=None,
):
    config = state.config
    spec = config.loss_spec
    instances = dataset.instances
    var_dataset = dataset if sub_ids is None else dataset.subset(sub_ids)
    n_eff = index.n

    for step in range(num_iters):
        t = start_t + step + 1
        tic = time.perf_counter()
        if optimal_mode:
            norms = diagnostics.dataset_grad_norms(state.params, dataset, spec)
            index = WeightIndex(norms, 0.0)
        if state.distributions is not None:
            state.distributions.append(index.probabilities().copy())

        ids_local = index.draw_batch(config.b, state.rng)
        if index.beta >= 1.0:
            # the uniform distribution carries importance weight exactly 1
            weights = np.ones(config.b)
        else:
            weights = 1.0 / (n_eff * index.probabilities(ids_local))
        ids_global = ids_local if sub_ids is None else sub_ids[ids_local]
        batch = [(instances[int(i)], w) for i, w in zip(ids_global, weights)]
        result = models.batch_backward(state.params, batch, spec)

        reg = models.regularizer_gradient(state.params, spec)
        if gamma:
            reg = models.grad_add(reg, proximal_gradient(state.params, anchor, gamma))
        eta_t = config.eta / (1.0 + config.eta_decay * (t - 1))
        try:
            state.params = sgd_step(state.params, result.avg_gradient, reg, eta_t)
        except NumericError as exc:
            raise NumericError(f"iteration {t}: {exc}") from None

        if update_weights:
            norms = result.per_sample_grad_norms
            for lid, value in zip(ids_local, norms):
                index.update(int(lid), float(value))
            if global_weights is not None:
                global_weights[ids_global] = norms
        if history is not None:
            history.advance(t)
            history.record_visits(ids_global)
        state.step_seconds += time.perf_counter() - tic

        if state.sampled_ids is not None:
            state.sampled_ids.append(np.array(ids_global, dtype=np.int64))
        if t % config.eval_every == 0 or t == total_T:
            _evaluate(state, t, dataset, test_dataset, index, var_dataset)
    return index


def train_mbsgd(dataset, config, test_dataset=None):
    """Uniform mini-batch SGD: the baseline every variant is compared against."""
    rng = np.random.default_rng(config.seed)
    state = _RunState(init_params(dataset, config, rng), rng, config, "mbsgd")
    history = HistoryStore(dataset.n)
    index = WeightIndex(np.ones(dataset.n), 1.0)
    _run_segment(
        state, dataset, index, config.T, 0, config.T,
        history=history, test_dataset=test_dataset,
    )
    return TrainedModel(
        state.params, state.metrics, history=history,
        sampled_ids=state.sampled_ids, distributions=state.distributions,
    )


def train_assgd(dataset, config, test_dataset=None):
    """Weighted SGD with history-approximated gradient norms and smoothing.

    Never-visited instances start at weight 1.0, so the first sweep behaves
    like uniform sampling plus the beta/n floor.
    """
    rng = np.random.default_rng(config.seed)
    state = _RunState(init_params(dataset, config, rng), rng, config, "assgd")
    history = HistoryStore(dataset.n)
    index = WeightIndex(np.ones(dataset.n), config.beta)
    _run_segment(
        state, dataset, index, config.T, 0, config.T,
        update_weights=True, history=history, test_dataset=test_dataset,
    )
    return TrainedModel(
        state.params, state.metrics, history=history,
        sample_weights=index.weights.copy(),
        sampled_ids=state.sampled_ids, distributions=state.distributions,
    )


def train_optimal(dataset, config, test_dataset=None):
    """Exact norm-proportional weighted SGD (reference implementation).

    Every iteration recomputes all n gradient norms, so this is only
    practical for small datasets.
    """
    rng = np.random.default_rng(config.seed)
    state = _RunState(init_params(dataset, config, rng), rng, config, "optimal")
    history = HistoryStore(dataset.n)
    index = WeightIndex(np.ones(dataset.n), 0.0)
    _run_segment(
        state, dataset, index, config.T, 0, config.T,
        history=history, optimal_mode=True, test_dataset=test_dataset,
    )
    return TrainedModel(
        state.params, state.metrics, history=history,
        sampled_ids=state.sampled_ids, distributions=state.distributions,
    )


def train_ashr(dataset, config, stage_config=None, test_dataset=None):
    """Staged weighted SGD: per stage, draw a random m-subset, train on it for
    g iterations with re-weighting over m, and pull parameters toward the
    stage anchor with strength gamma.

    Per-instance weights and visit history persist across stages. Stage
    subsets come from a separate random stream so a single full-size stage
    with gamma = 0 reproduces `train_assgd` exactly.
    """
    if stage_config is None:
        stage_config = StageConfig()
    n = dataset.n
    m, g = stage_config.resolved(n, config.b)
    rng = np.random.default_rng(config.seed)
    stage_rng = np.random.default_rng([config.seed, 1])
    state = _RunState(init_params(dataset, config, rng), rng, config, "ashr")
    history = HistoryStore(n)
    global_weights = np.ones(n)
    subsets = []
    done = 0
    stage = 0
    while done < config.T:
        stage += 1
        iters = min(g, config.T - done)
        subset = stage_subset(n, m, stage_rng)
        subsets.append(subset)
        gamma_t = stage_config.gamma_at(stage, m, state.last_variance)
        sub_index = WeightIndex(global_weights[subset], config.beta)
        _run_segment(
            state, dataset, sub_index, iters, done, config.T,
            sub_ids=subset, update_weights=True, global_weights=global_weights,
            history=history, anchor=state.params, gamma=gamma_t,
            test_dataset=test_dataset,
        )
        done += iters
    return TrainedModel(
        state.params, state.metrics, history=history,
        sample_weights=global_weights, stage_subsets=subsets,
        sampled_ids=state.sampled_ids, distributions=state.distributions,
    )


_TRAINERS = {
    "mbsgd": train_mbsgd,
    "assgd": train_assgd,
    "optimal": train_optimal,
}


def train(dataset, config, stage_config=None, test_dataset=None):
    """Dispatch on config.algorithm."""
    if config.algorithm == "ashr":
        return train_ashr(dataset, config, stage_config, test_dataset)
    return _TRAINERS[config.algorithm](dataset, config, test_dataset)
