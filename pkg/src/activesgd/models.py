"""Predictors, losses, regularizers, and the batched backward pass.

Two model families: a linear map (vector `w` for binary losses, a C x dim
matrix for softmax) and a multi-layer perceptron whose every layer applies
the configured activation. The batched backward pass also returns each
sample's gradient norm without materializing per-sample gradients: for a
dense layer the squared norm factorizes as
(sum_p dZ_p^2) * (sum_q H_q^2), with an extra (sum_p dZ_p^2) term for the
bias, and layers combine by summing squared norms.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit, logsumexp, softmax

# chunk length for whole-dataset passes
CHUNK = 8192

LOSS_KINDS = ("squared", "hinge", "logistic", "softmax")
REGULARIZERS = ("none", "l2", "l1")
ACTIVATIONS = ("sigmoid", "tanh", "relu")

_LOSS_ALIASES = {"softmax-cross-entropy": "softmax", "log": "logistic"}


class NumericError(ArithmeticError):
    """Raised when training or gradient evaluation produces non-finite values."""


@dataclass(frozen=True)
class ActivationSpec:
    """Elementwise activation with its derivative (relu derivative is 0 at 0)."""

    kind: str = "sigmoid"

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}, expected one of {ACTIVATIONS}")

    def value(self, z):
        if self.kind == "sigmoid":
            return expit(z)
        if self.kind == "tanh":
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def derivative(self, z, h=None):
        """Derivative at pre-activation z; `h` = value(z) may be passed to reuse work."""
        if self.kind == "sigmoid":
            s = expit(z) if h is None else h
            return s * (1.0 - s)
        if self.kind == "tanh":
            t = np.tanh(z) if h is None else h
            return 1.0 - t * t
        return np.where(z > 0, 1.0, 0.0)


@dataclass(frozen=True)
class LossSpec:
    """Loss kind plus optional parameter penalty (penalty applied by the engine)."""

    kind: str = "logistic"
    regularizer: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        kind = _LOSS_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def binary(self):
        return self.kind in ("squared", "hinge", "logistic")


class LinearParams:
    """Linear predictor: 1-d weight vector (binary) or (C, dim) matrix (softmax)."""

    __slots__ = ("w",)

    def __init__(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim not in (1, 2):
            raise ValueError("linear weights must be 1-d or 2-d")
        if w.ndim == 2 and w.shape[0] < 2:
            raise ValueError("multi-class weight matrix needs at least 2 rows")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        self.w = w

    @property
    def dimension(self):
        return self.w.shape[-1]

    @property
    def output_dim(self):
        return 1 if self.w.ndim == 1 else self.w.shape[0]


class MlpParams:
    """Feed-forward network: a stack of (W: m x l, B: m) layers.

    Every layer, including the last, applies `activation`; the prediction is
    the final post-activation vector.
    """

    __slots__ = ("layers", "activation")

    def __init__(self, layers, activation=ActivationSpec()):
        if isinstance(activation, str):
            activation = ActivationSpec(activation)
        layers = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in layers
        ]
        if not layers:
            raise ValueError("MLP needs at least one layer")
        for k, (w, b) in enumerate(layers):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ValueError(f"layer {k}: W must be (m, l) and B length m")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: parameters must be finite")
            if k > 0 and w.shape[1] != layers[k - 1][0].shape[0]:
                raise ValueError(f"layer {k}: input size {w.shape[1]} does not chain")
        self.layers = layers
        self.activation = activation

    @property
    def dimension(self):
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self):
        return self.layers[-1][0].shape[0]


# ---------------------------------------------------------------------------
# scores and per-sample losses


def _as_dense_features(x, dimension):
    if isinstance(x, object) and hasattr(x, "dense"):
        return x.dense(dimension)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dimension,):
        raise ValueError(f"feature vector has shape {x.shape}, expected ({dimension},)")
    return x


def _stack_batch(instances, dimension, force_dense):
    """Stack instance features as (b, dimension); CSR when sparse rows appear."""
    if all(not inst.is_sparse for inst in instances):
        return np.vstack([_as_dense_features(inst, dimension) for inst in instances])
    if force_dense:
        return np.vstack([inst.dense(dimension) for inst in instances])
    indptr = np.zeros(len(instances) + 1, dtype=np.int64)
    for i, inst in enumerate(instances):
        indptr[i + 1] = indptr[i] + inst.nnz
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1], dtype=np.float64)
    for i, inst in enumerate(instances):
        sl = slice(indptr[i], indptr[i + 1])
        if inst.is_sparse:
            indices[sl] = inst.indices
            data[sl] = inst.values
        else:
            nz = np.nonzero(inst.values)[0]
            # dense row mixed into a sparse batch: keep nonzeros only
            if nz.size != inst.nnz:
                return np.vstack([inst.dense(dimension) for inst in instances])
            indices[sl] = nz
            data[sl] = inst.values[nz]
    return sparse.csr_matrix((data, indices, indptr), shape=(len(instances), dimension))


def _check_labels(y, spec, output_dim):
    if spec.binary:
        if output_dim != 1:
            raise ValueError(f"{spec.kind} loss needs a scalar predictor, got {output_dim} outputs")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError(f"{spec.kind} loss needs labels in {{+1, -1}}")
    else:
        if output_dim < 2:
            raise ValueError("softmax loss needs a multi-output predictor")
        if np.any(y < 0) or np.any(y >= output_dim):
            raise ValueError(f"softmax labels must lie in 0..{output_dim - 1}")


def _loss_values(scores, y, spec):
    if spec.kind == "squared":
        return (y - scores) ** 2
    if spec.kind == "hinge":
        return np.maximum(0.0, 1.0 - scores * y)
    if spec.kind == "logistic":
        return np.logaddexp(0.0, -scores * y)
    rows = np.arange(scores.shape[0])
    return logsumexp(scores, axis=1) - scores[rows, y]


def _loss_dscores(scores, y, spec):
    if spec.kind == "squared":
        return 2.0 * (scores - y)
    if spec.kind == "hinge":
        return np.where(scores * y < 1.0, -np.asarray(y, dtype=np.float64), 0.0)
    if spec.kind == "logistic":
        return -y * expit(-scores * y)
    probs = softmax(scores, axis=1)
    rows = np.arange(scores.shape[0])
    probs[rows, y] -= 1.0
    return probs


def _forward_mlp(params, X):
    """Forward pass; returns (hs, zs) with hs[0] = X. Raises on non-finite layers."""
    hs = [X]
    zs = []
    h = X
    for k, (w, b) in enumerate(params.layers):
        z = h @ w.T + b
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite forward values at layer {k}")
        h = params.activation.value(z)
        zs.append(z)
        hs.append(h)
    return hs, zs


def predict_batch(params, X):
    """Scores for a stacked feature matrix: (b,) for scalar models, (b, C) otherwise."""
    if isinstance(params, LinearParams):
        out = X @ params.w.T if params.w.ndim == 2 else X @ params.w
        return np.asarray(out)
    if sparse.issparse(X):
        X = X.toarray()
    hs, _ = _forward_mlp(params, X)
    out = hs[-1]
    return out[:, 0] if params.output_dim == 1 else out


def predict(params, x):
    """Prediction for one instance: a float for scalar models, a vector otherwise."""
    if isinstance(params, LinearParams) and hasattr(x, "is_sparse") and x.is_sparse:
        w = params.w
        out = w[..., x.indices] @ x.values if w.ndim == 2 else w[x.indices] @ x.values
        return float(out) if w.ndim == 1 else np.asarray(out)
    xd = _as_dense_features(x, params.dimension)
    out = predict_batch(params, xd.reshape(1, -1))
    return float(out[0]) if params.output_dim == 1 else out[0]


def loss(params, instance, spec):
    """Per-instance loss value; the regularizer is not included."""
    y = np.array([instance.label])
    _check_labels(y, spec, params.output_dim)
    f = predict(params, instance)
    scores = np.array([f]) if params.output_dim == 1 else np.asarray(f).reshape(1, -1)
    return float(_loss_values(scores, y, spec)[0])


# ---------------------------------------------------------------------------
# batched backward


@dataclass
class BatchBackwardResult:
    """Weighted average gradient plus per-sample (unweighted) norms and losses."""

    avg_gradient: object
    per_sample_grad_norms: np.ndarray
    per_sample_losses: np.ndarray


def layer_grad_norm_sq(dz, h, include_bias=False):
    """Per-sample squared gradient norm of one dense layer from its row factors.

    `dz` is the (b, m) loss gradient at the layer's pre-activation and `h`
    the (b, l) layer input; the layer's per-sample weight-gradient is their
    outer product, so its squared norm is the product of the row square
    sums. Costs O(b(m+l)) instead of the O(bml) of materializing gradients.
    """
    dz_sq = np.einsum("ij,ij->i", dz, dz)
    h_sq = np.einsum("ij,ij->i", h, h)
    if include_bias:
        return dz_sq * (h_sq + 1.0)
    return dz_sq * h_sq


def _row_square_sums(X):
    if sparse.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return np.einsum("ij,ij->i", X, X)


def batch_backward(params, batch, spec):
    """Weighted mini-batch gradient with per-sample gradient norms.

    `batch` is a sequence of (instance, importance_weight) pairs. The
    average gradient is (1/b) * sum_i weight_i * grad_i; per-sample norms
    and losses are of the unweighted instances.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    instances = [pair[0] for pair in batch]
    weights = np.array([pair[1] for pair in batch], dtype=np.float64)
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise ValueError("importance weights must be finite and positive")
    y = np.array([inst.label for inst in instances], dtype=np.int64)
    _check_labels(y, spec, params.output_dim)
    b = len(instances)

    if isinstance(params, LinearParams):
        X = _stack_batch(instances, params.dimension, force_dense=False)
        scores = predict_batch(params, X)
        if not np.all(np.isfinite(scores)):
            raise NumericError("non-finite scores at linear output")
        losses = _loss_values(scores, y, spec)
        dldf = _loss_dscores(scores, y, spec)
        if not np.all(np.isfinite(dldf)):
            raise NumericError("non-finite loss gradient at linear output")
        row_sq = _row_square_sums(X)
        if params.w.ndim == 1:
            norms = np.sqrt(dldf * dldf * row_sq)
            avg = (X.T @ (weights * dldf)) / b
        else:
            norms = np.sqrt(np.einsum("ij,ij->i", dldf, dldf) * row_sq)
            avg = (X.T @ (weights[:, None] * dldf)).T / b
        return BatchBackwardResult(np.asarray(avg), norms, losses)

    X = _stack_batch(instances, params.dimension, force_dense=True)
    hs, zs = _forward_mlp(params, X)
    out = hs[-1]
    scores = out[:, 0] if params.output_dim == 1 else out
    losses = _loss_values(scores, y, spec)
    dldf = _loss_dscores(scores, y, spec)
    grad_h = dldf.reshape(b, -1)

    norm_sq = np.zeros(b)
    grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[k]
        dz = params.activation.derivative(zs[k], hs[k + 1]) * grad_h
        if not np.all(np.isfinite(dz)):
            raise NumericError(f"non-finite backward values at layer {k}")
        norm_sq += layer_grad_norm_sq(dz, hs[k], include_bias=True)
        wdz = weights[:, None] * dz
        grads[k] = (wdz.T @ hs[k] / b, wdz.sum(axis=0) / b)
        if k > 0:
            grad_h = dz @ w
    return BatchBackwardResult(grads, np.sqrt(norm_sq), losses)


# ---------------------------------------------------------------------------
# explicit single-instance gradients (oracle path: materializes outer products)


def instance_gradient(params, instance, spec):
    """Full gradient of the instance loss, materialized array by array."""
    y = np.array([instance.label])
    _check_labels(y, spec, params.output_dim)
    if isinstance(params, LinearParams):
        x = _as_dense_features(instance, params.dimension)
        if params.w.ndim == 1:
            f = float(params.w @ x)
            dldf = float(_loss_dscores(np.array([f]), y, spec)[0])
            return dldf * x
        f = params.w @ x
        dldf = _loss_dscores(f.reshape(1, -1), y, spec)[0]
        return np.outer(dldf, x)

    x = _as_dense_features(instance, params.dimension)
    act = params.activation
    hs = [x]
    zs = []
    h = x
    for w, bvec in params.layers:
        z = w @ h + bvec
        h = act.value(z)
        zs.append(z)
        hs.append(h)
    out = hs[-1]
    scores = np.array([out[0]]) if params.output_dim == 1 else out.reshape(1, -1)
    grad_h = _loss_dscores(scores, y, spec).reshape(-1)

    grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[k]
        dz = act.derivative(zs[k], hs[k + 1]) * grad_h
        grads[k] = (np.outer(dz, hs[k]), dz.copy())
        if k > 0:
            grad_h = w.T @ dz
    return grads


def grad_norm_explicit(params, instance, spec):
    """Euclidean norm of the materialized per-instance gradient over all parameters."""
    g = instance_gradient(params, instance, spec)
    value = grad_norm(g)
    if not np.isfinite(value):
        raise NumericError("non-finite explicit gradient norm")
    return value


def prediction_gradient(params, x):
    """Gradient of the scalar prediction with respect to all parameters."""
    if params.output_dim != 1:
        raise ValueError("prediction gradient requires a scalar predictor")
    if isinstance(params, LinearParams):
        return _as_dense_features(x, params.dimension).copy()
    xd = _as_dense_features(x, params.dimension)
    act = params.activation
    hs = [xd]
    zs = []
    h = xd
    for w, bvec in params.layers:
        z = w @ h + bvec
        h = act.value(z)
        zs.append(z)
        hs.append(h)
    grad_h = np.ones(1)
    grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[k]
        dz = act.derivative(zs[k], hs[k + 1]) * grad_h
        grads[k] = (np.outer(dz, hs[k]), dz.copy())
        if k > 0:
            grad_h = w.T @ dz
    return grads


# ---------------------------------------------------------------------------
# regularizers


def regularizer_gradient(params, spec):
    """Gradient of the penalty term; biases carry no penalty."""
    if isinstance(params, LinearParams):
        return _reg_grad_array(params.w, spec)
    return [
        (_reg_grad_array(w, spec), np.zeros_like(b)) for w, b in params.layers
    ]


def _reg_grad_array(w, spec):
    if spec.regularizer == "l2":
        return 2.0 * spec.lam * w
    if spec.regularizer == "l1":
        return spec.lam * np.sign(w)
    return np.zeros_like(w)


def regularizer_penalty(params, spec):
    """Penalty value matching `regularizer_gradient` (weights only)."""
    arrays = [params.w] if isinstance(params, LinearParams) else [w for w, _ in params.layers]
    if spec.regularizer == "l2":
        return spec.lam * float(sum(np.sum(w * w) for w in arrays))
    if spec.regularizer == "l1":
        return spec.lam * float(sum(np.sum(np.abs(w)) for w in arrays))
    return 0.0


# ---------------------------------------------------------------------------
# gradient / parameter structure helpers

# A gradient mirrors its parameters: an ndarray for LinearParams, a list of
# (dW, dB) pairs for MlpParams.


def grad_scale(grad, c):
    if isinstance(grad, np.ndarray):
        return c * grad
    return [(c * gw, c * gb) for gw, gb in grad]


def grad_add(a, b):
    if isinstance(a, np.ndarray):
        return a + b
    return [(gw + hw, gb + hb) for (gw, gb), (hw, hb) in zip(a, b)]


def grad_zeros(params):
    if isinstance(params, LinearParams):
        return np.zeros_like(params.w)
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]


def grad_flatten(grad):
    if isinstance(grad, np.ndarray):
        return grad.ravel().copy()
    return np.concatenate([np.concatenate([gw.ravel(), gb.ravel()]) for gw, gb in grad])


def grad_norm(grad):
    return float(np.linalg.norm(grad_flatten(grad)))


def params_minus(params, other):
    """params - other, expressed in gradient form (used for proximal terms)."""
    if isinstance(params, LinearParams):
        return params.w - other.w
    return [
        (w - ow, b - ob)
        for (w, b), (ow, ob) in zip(params.layers, other.layers)
    ]


def step_params(params, eta, grad):
    """New parameters params - eta * grad; raises NumericError on non-finite results."""
    with np.errstate(over="ignore", invalid="ignore"):
        if isinstance(params, LinearParams):
            w = params.w - eta * grad
            if not np.all(np.isfinite(w)):
                raise NumericError("non-finite parameters after update")
            return LinearParams(w)
        layers = []
        for (w, b), (gw, gb) in zip(params.layers, grad):
            nw = w - eta * gw
            nb = b - eta * gb
            if not (np.all(np.isfinite(nw)) and np.all(np.isfinite(nb))):
                raise NumericError("non-finite parameters after update")
            layers.append((nw, nb))
    return MlpParams(layers, params.activation)


def params_flatten(params):
    if isinstance(params, LinearParams):
        return params.w.ravel().copy()
    return grad_flatten(params.layers)


def params_from_flat(template, vec):
    """Rebuild parameters shaped like `template` from a flat vector."""
    vec = np.asarray(vec, dtype=np.float64)
    if isinstance(template, LinearParams):
        return LinearParams(vec.reshape(template.w.shape))
    layers = []
    pos = 0
    for w, b in template.layers:
        nw = vec[pos : pos + w.size].reshape(w.shape)
        pos += w.size
        nb = vec[pos : pos + b.size]
        pos += b.size
        layers.append((nw, nb.copy()))
    return MlpParams(layers, template.activation)


def num_params(params):
    return params_flatten(params).size


# ---------------------------------------------------------------------------
# checkpoints: npz container with a shape-describing header
#
# linear:  format=1, kind="linear", w=<float64 array>
# mlp:     format=1, kind="mlp", activation=<str>, n_layers=<int>,
#          W0,B0,...,W{k},B{k} as float64 arrays (row-major)


def save_params(params, path):
    """Write a model checkpoint (npz, format version 1)."""
    if isinstance(params, LinearParams):
        np.savez(path, format=1, kind="linear", w=params.w)
        return
    arrays = {"format": 1, "kind": "mlp", "activation": params.activation.kind,
              "n_layers": len(params.layers)}
    for k, (w, b) in enumerate(params.layers):
        arrays[f"W{k}"] = w
        arrays[f"B{k}"] = b
    np.savez(path, **arrays)


def load_params(path):
    """Load a checkpoint written by `save_params`."""
    with np.load(path, allow_pickle=False) as data:
        if int(data["format"]) != 1:
            raise ValueError(f"unsupported checkpoint format {int(data['format'])}")
        kind = str(data["kind"])
        if kind == "linear":
            return LinearParams(data["w"])
        if kind != "mlp":
            raise ValueError(f"unknown checkpoint kind {kind!r}")
        n_layers = int(data["n_layers"])
        layers = [(data[f"W{k}"], data[f"B{k}"]) for k in range(n_layers)]
        return MlpParams(layers, ActivationSpec(str(data["activation"])))
