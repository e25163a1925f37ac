"""scikit-learn style wrapper around the predictor and the completion layer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .completion import Prediction
from .data import InstanceSet, matrix_to_instances
from .grid import Network
from .mlp import forward
from .training import complete_batch, new_model, train


class DualBoundEstimator(BaseEstimator, TransformerMixin):
    """Learns to predict dual-feasible lower bounds for one network.

    Rows of ``X`` are load instances laid out as ``[p_d | q_d]`` in per unit.
    ``fit`` needs no targets. ``predict`` returns one valid lower bound per
    row, ``transform`` the raw network outputs before completion.

    Parameters
    ----------
    network : Network
    hidden : tuple of int
    epochs, batch_size, learning_rate, patience, weight_decay
        Optimiser settings passed to :func:`dualsdp.training.train`.
    validation_fraction : float
        Share of ``X`` held out for model selection when ``X_val`` is not given.
    output_gain : float
        Scale of the initial last layer; 0 starts from the zero prediction.
    random_state : int
    """

    def __init__(
        self,
        network: Network = None,
        hidden=(64, 64),
        epochs: int = 200,
        batch_size: int = 64,
        learning_rate: float = 1e-3,
        patience: int = 20,
        weight_decay: float = 0.0,
        validation_fraction: float = 0.05,
        output_gain: float = 0.1,
        random_state: int = 0,
    ):
        self.network = network
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.patience = patience
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.output_gain = output_gain
        self.random_state = random_state

    def _check_X(self, X, reset=False):
        if self.network is None:
            raise ValueError("DualBoundEstimator needs a network")
        X = check_array(X, dtype=np.float64)
        expected = 2 * self.network.n_bus
        if X.shape[1] != expected:
            raise ValueError(f"X has {X.shape[1]} features, the network needs {expected} ([p_d | q_d])")
        if reset:
            self.n_features_in_ = X.shape[1]
        return X

    def fit(self, X, y=None, X_val=None):
        X = self._check_X(X, reset=True)
        if X_val is None:
            rng = np.random.default_rng(self.random_state)
            n_val = max(1, int(round(self.validation_fraction * len(X))))
            if n_val >= len(X):
                raise ValueError("need at least two rows to hold out a validation set")
            perm = rng.permutation(len(X))
            X_val, X = X[perm[:n_val]], X[perm[n_val:]]
        else:
            X_val = self._check_X(X_val)
        instances = matrix_to_instances(np.vstack([X, X_val]))
        data = InstanceSet(instances, ["train"] * len(X) + ["val"] * len(X_val), seed=self.random_state)
        model = new_model(
            self.network, hidden=self.hidden, seed=self.random_state, output_gain=self.output_gain, instances=data.train
        )
        self.model_, self.history_ = train(
            self.network,
            model,
            data,
            epochs=self.epochs,
            batch=self.batch_size,
            lr=self.learning_rate,
            patience=self.patience,
            seed=self.random_state,
            weight_decay=self.weight_decay,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        Y, _ = forward(self.model_, self._check_X(X))
        return Y

    def predict_dual(self, X):
        """Completed dual solutions, one per row."""
        check_is_fitted(self, "model_")
        sols, _, _, _ = complete_batch(self.network, self.model_, matrix_to_instances(self._check_X(X)))
        return sols

    def predict(self, X):
        check_is_fitted(self, "model_")
        _, objs, _, _ = complete_batch(self.network, self.model_, matrix_to_instances(self._check_X(X)))
        return objs

    def score(self, X, y=None):
        """Mean lower bound (higher is better)."""
        return float(np.mean(self.predict(X)))

    def predictions(self, X):
        """Raw outputs split into :class:`Prediction` records."""
        return [Prediction.from_vector(self.network, y) for y in self.transform(X)]
