"""Exact reference quantities: full gradients, optimal sampling distributions,
stochastic-gradient variance, and the information-gain factors.

Everything here is read-only over its inputs and deliberately favors
exactness over speed; these functions serve as oracles for tests and as
measurement instrumentation for benchmarks.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import models
from .models import CHUNK


@dataclass
class VarianceReport:
    full_gradient_norm: float
    variance: float
    distribution_label: str
    batch_size: int


@dataclass(frozen=True)
class InfoGainRecord:
    """The three learning-value factors and their product."""

    uncertainty: float
    significance: float
    interval: int
    info_gain: float

    @classmethod
    def from_factors(cls, uncertainty, significance, interval):
        return cls(uncertainty, significance, interval,
                   info_gain(uncertainty, significance, interval))


def _unit_batches(dataset):
    for start in range(0, dataset.n, CHUNK):
        chunk = dataset.instances[start : start + CHUNK]
        yield [(inst, 1.0) for inst in chunk]


def full_gradient(params, dataset, spec):
    """Mean per-instance loss gradient over the dataset (regularizer excluded)."""
    total = None
    for batch in _unit_batches(dataset):
        part = models.batch_backward(params, batch, spec).avg_gradient
        part = models.grad_scale(part, len(batch) / dataset.n)
        total = part if total is None else models.grad_add(total, part)
    return total


def dataset_grad_norms(params, dataset, spec):
    """Per-instance gradient norms for the whole dataset, batched."""
    out = np.empty(dataset.n)
    pos = 0
    for batch in _unit_batches(dataset):
        res = models.batch_backward(params, batch, spec)
        out[pos : pos + len(batch)] = res.per_sample_grad_norms
        pos += len(batch)
    return out


def dataset_losses(params, dataset, spec):
    """Per-instance loss values for the whole dataset, batched."""
    out = np.empty(dataset.n)
    pos = 0
    for batch in _unit_batches(dataset):
        res = models.batch_backward(params, batch, spec)
        out[pos : pos + len(batch)] = res.per_sample_losses
        pos += len(batch)
    return out


def optimal_distribution(grad_norms):
    """Variance-minimizing sampling distribution: norms normalized to sum 1.

    All-zero norms fall back to uniform.
    """
    grad_norms = np.asarray(grad_norms, dtype=np.float64)
    if np.any(grad_norms < 0):
        raise ValueError("gradient norms must be non-negative")
    total = grad_norms.sum()
    if total <= 0.0:
        return np.full(grad_norms.size, 1.0 / grad_norms.size)
    return grad_norms / total


def variance(params, dataset, spec, probs, b=1):
    """Exact scalar variance of the re-weighted stochastic gradient.

    For a single draw from `probs` with re-weighting 1/(n p_i),
    Var = sum_i ||g_i||^2 / (n^2 p_i) - ||full_grad||^2; a size-b mini-batch
    divides it by b. Instances with zero gradient contribute nothing and may
    carry p_i = 0; a zero p_i on a nonzero gradient is rejected.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n = dataset.n
    if probs.shape != (n,):
        raise ValueError(f"probs must have shape ({n},)")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a probability vector")
    if b < 1:
        raise ValueError("batch size must be at least 1")
    norms = dataset_grad_norms(params, dataset, spec)
    if np.any((probs == 0.0) & (norms > 0.0)):
        raise ValueError("zero probability on an instance with nonzero gradient")
    fg = models.grad_norm(full_gradient(params, dataset, spec))
    active = norms > 0.0
    second_moment = float(np.sum(norms[active] ** 2 / (n * n * probs[active])))
    return VarianceReport(
        full_gradient_norm=fg,
        variance=(second_moment - fg * fg) / b,
        distribution_label="custom",
        batch_size=b,
    )


def variance_sampled(params, dataset, spec, probs, b=1, k=256, rng=None):
    """Monte-Carlo variance estimate: mean of k draws' squared deviation / b."""
    if rng is None:
        rng = np.random.default_rng(0)
    probs = np.asarray(probs, dtype=np.float64)
    n = dataset.n
    fg = models.grad_flatten(full_gradient(params, dataset, spec))
    ids = rng.choice(n, size=k, p=probs)
    acc = 0.0
    for i in ids:
        g = models.grad_flatten(
            models.instance_gradient(params, dataset.instances[int(i)], spec)
        )
        dev = g / (n * probs[int(i)]) - fg
        acc += float(dev @ dev)
    return acc / (k * b)


def uncertainty(params, x, spec):
    """Entropy of the predictive label distribution of a binary soft classifier."""
    if spec.kind != "logistic":
        raise ValueError("uncertainty is defined for the logistic loss only")
    f = models.predict(params, x)
    p_pos = expit(f)
    p_neg = expit(-f)
    # -p log p written via the loss values keeps the tails stable
    return float(p_pos * np.logaddexp(0.0, -f) + p_neg * np.logaddexp(0.0, f))


def significance(params, x, spec):
    """Norm of the prediction's gradient with respect to all parameters."""
    if params.output_dim != 1:
        raise ValueError("significance is defined for scalar predictors")
    return models.grad_norm(models.prediction_gradient(params, x))


def label_expected_grad_norm(params, x, spec):
    """E_y ||grad L(f(x), y)|| under the model's own label distribution.

    The companion quantity to uncertainty * significance; the two are
    reported side by side rather than asserted equal.
    """
    if spec.kind != "logistic":
        raise ValueError("label expectation is defined for the logistic loss only")
    from .dataset import Instance

    f = models.predict(params, x)
    values = x.values if hasattr(x, "values") else np.asarray(x, dtype=np.float64)
    indices = x.indices if hasattr(x, "indices") else None
    acc = 0.0
    for y, p in ((1, expit(f)), (-1, expit(-f))):
        inst = Instance(values, y, indices=indices)
        acc += p * models.grad_norm_explicit(params, inst, spec)
    return float(acc)


def info_gain(uncertainty_value, significance_value, interval_value):
    """Learning value of revisiting an instance: the product of its factors."""
    if uncertainty_value < 0 or significance_value < 0 or interval_value < 0:
        raise ValueError("information gain factors must be non-negative")
    return uncertainty_value * significance_value * interval_value


def finite_diff_check(params, instance, spec, h=None):
    """Max relative error between analytic and central-difference loss gradients.

    Per-coordinate step h_j = 1e-6 * max(1, |w_j|) unless `h` is given. The
    error is |analytic - numeric| / max(1, |numeric|), maximized over
    coordinates.
    """
    flat = models.params_flatten(params)
    analytic = models.grad_flatten(models.instance_gradient(params, instance, spec))
    worst = 0.0
    for j in range(flat.size):
        hj = h if h is not None else 1e-6 * max(1.0, abs(flat[j]))
        bumped = flat.copy()
        bumped[j] = flat[j] + hj
        up = models.loss(models.params_from_flat(params, bumped), instance, spec)
        bumped[j] = flat[j] - hj
        down = models.loss(models.params_from_flat(params, bumped), instance, spec)
        numeric = (up - down) / (2.0 * hj)
        err = abs(analytic[j] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst


def finite_diff_check_regularizer(params, spec, h=None):
    """Same check for the penalty term against `regularizer_gradient`."""
    flat = models.params_flatten(params)
    analytic = models.grad_flatten(models.regularizer_gradient(params, spec))
    worst = 0.0
    for j in range(flat.size):
        hj = h if h is not None else 1e-6 * max(1.0, abs(flat[j]))
        bumped = flat.copy()
        bumped[j] = flat[j] + hj
        up = models.regularizer_penalty(models.params_from_flat(params, bumped), spec)
        bumped[j] = flat[j] - hj
        down = models.regularizer_penalty(models.params_from_flat(params, bumped), spec)
        numeric = (up - down) / (2.0 * hj)
        err = abs(analytic[j] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
