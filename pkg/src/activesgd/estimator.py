"""Scikit-learn style front end for the training engine."""

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import engine, models
from .dataset import Dataset, Instance
from .models import LossSpec


def _rows_to_instances(X, y_internal):
    instances = []
    if sparse.issparse(X):
        X = X.tocsr()
        for i in range(X.shape[0]):
            row = X.getrow(i)
            instances.append(Instance(row.data, y_internal[i], indices=row.indices))
    else:
        for i in range(X.shape[0]):
            instances.append(Instance(X[i], y_internal[i]))
    return instances


class ActiveSGDClassifier(ClassifierMixin, BaseEstimator):
    """Linear or MLP classifier trained by gradient-norm weighted SGD.

    Parameters mirror the engine configuration: `algorithm` selects the
    sampling scheme (mbsgd, assgd, optimal, ashr), `beta` the uniform
    smoothing floor, and `hidden` a tuple of hidden-layer widths (empty for
    a linear model). `loss="auto"` picks logistic for binary problems and
    softmax otherwise.

    After `fit`, `params_` holds the trained parameters and `metrics_` the
    recorded training metrics.
    """

    def __init__(
        self,
        loss="auto",
        algorithm="assgd",
        eta=0.1,
        batch_size=16,
        iterations=1000,
        beta=0.1,
        regularizer="none",
        lam=0.0,
        hidden=(),
        activation="sigmoid",
        eta_decay=0.0,
        eval_every=100,
        stage_m=None,
        stage_g=None,
        gamma=1e-3,
        random_state=0,
    ):
        self.loss = loss
        self.algorithm = algorithm
        self.eta = eta
        self.batch_size = batch_size
        self.iterations = iterations
        self.beta = beta
        self.regularizer = regularizer
        self.lam = lam
        self.hidden = hidden
        self.activation = activation
        self.eta_decay = eta_decay
        self.eval_every = eval_every
        self.stage_m = stage_m
        self.stage_g = stage_g
        self.gamma = gamma
        self.random_state = random_state

    def _resolve_loss(self, n_classes):
        if self.loss == "auto":
            return "logistic" if n_classes == 2 else "softmax"
        return self.loss

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr")
        self.classes_ = unique_labels(y)
        n_classes = len(self.classes_)
        if n_classes < 2:
            raise ValueError("need at least two classes")
        kind = self._resolve_loss(n_classes)
        spec = LossSpec(kind=kind, regularizer=self.regularizer, lam=self.lam)
        if spec.binary:
            if n_classes != 2:
                raise ValueError(f"{kind} loss supports exactly two classes")
            y_internal = np.where(y == self.classes_[1], 1, -1)
            num_classes = 2
        else:
            if n_classes < 3:
                raise ValueError("softmax requires at least three classes; "
                                 "use a binary loss for two-class problems")
            class_index = {c: i for i, c in enumerate(self.classes_)}
            y_internal = np.array([class_index[v] for v in y], dtype=np.int64)
            num_classes = n_classes

        dataset = Dataset(_rows_to_instances(X, y_internal), X.shape[1], num_classes)
        config = engine.TrainConfig(
            eta=self.eta,
            b=self.batch_size,
            T=self.iterations,
            beta=self.beta,
            seed=self.random_state,
            eval_every=self.eval_every,
            loss_spec=spec,
            algorithm=self.algorithm,
            eta_decay=self.eta_decay,
            hidden=tuple(self.hidden),
            activation=self.activation,
        )
        stage_config = engine.StageConfig(m=self.stage_m, g=self.stage_g, gamma=self.gamma)
        trained = engine.train(dataset, config, stage_config=stage_config)
        self.params_ = trained.params
        self.metrics_ = trained.metrics
        self.loss_spec_ = spec
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = self.iterations
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, accept_sparse="csr")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if sparse.issparse(X) and not isinstance(self.params_, models.LinearParams):
            X = X.toarray()
        return models.predict_batch(self.params_, X)

    def predict(self, X):
        scores = self.decision_function(X)
        if self.loss_spec_.binary:
            return self.classes_[(scores >= 0.0).astype(int)]
        return self.classes_[np.argmax(scores, axis=1)]
