"""scikit-learn style wrapper around the from-scratch CNN.

X is a 3D array [n_samples, 8, n_points] of stacked Re/Im S-parameter
channels (see sparams.to_feature_tensor); y is the inclusion fraction in
[0, 1]. The wrapper makes the regressor usable in sklearn pipelines and
model-selection utilities.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ShapeError, ValidationError
from .neuralnet import (AdamState, Architecture, adam_step, backward_batch, forward_batch,
                        mse_loss, init_params, predict_batch)
from .rng import rng_from_seed
from .sparams import FEATURE_CHANNELS, N_POINTS


def _validate_x(x, n_points):
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[1] != FEATURE_CHANNELS or x.shape[2] != n_points:
        raise ShapeError(f"X must be [n_samples, {FEATURE_CHANNELS}, {n_points}], "
                         f"got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("X contains non-finite values")
    return x


class CnnRegressor(BaseEstimator, RegressorMixin):
    """1D-CNN fraction regressor trained with Adam on MSE loss."""

    def __init__(self, epochs=50, learning_rate=1e-4, beta1=0.9, beta2=0.999,
                 adam_eps=1e-8, batch_size=16, full_batch_threshold=32, seed=0,
                 n_points=N_POINTS, conv1_channels=32, conv1_kernel=7,
                 conv2_channels=64, conv2_kernel=5, pool=2, hidden=128):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.full_batch_threshold = full_batch_threshold
        self.seed = seed
        self.n_points = n_points
        self.conv1_channels = conv1_channels
        self.conv1_kernel = conv1_kernel
        self.conv2_channels = conv2_channels
        self.conv2_kernel = conv2_kernel
        self.pool = pool
        self.hidden = hidden

    def _architecture(self):
        return Architecture(input_len=self.n_points,
                            conv1_channels=self.conv1_channels,
                            conv1_kernel=self.conv1_kernel,
                            conv2_channels=self.conv2_channels,
                            conv2_kernel=self.conv2_kernel,
                            pool=self.pool, hidden=self.hidden)

    def fit(self, X, y):
        X = _validate_x(X, self.n_points)
        y = np.asarray(y, dtype=float)
        if y.shape != (X.shape[0],):
            raise ShapeError(f"y shape {y.shape} does not match {X.shape[0]} samples")
        if np.any((y < 0) | (y > 1)):
            raise ValidationError("targets must lie in [0, 1]")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")

        arch = self._architecture()
        params = init_params(self.seed, arch)
        state = AdamState.for_params(params, lr=self.learning_rate, beta1=self.beta1,
                                     beta2=self.beta2, eps=self.adam_eps)
        rng = rng_from_seed(self.seed + 0x5EED)
        n = X.shape[0]
        self.loss_curve_ = []
        for _ in range(self.epochs):
            if n <= self.full_batch_threshold:
                batches = [np.arange(n)]
            else:
                order = rng.permutation(n)
                batches = [order[i:i + self.batch_size]
                           for i in range(0, n, self.batch_size)]
            for batch in batches:
                pred, cache = forward_batch(X[batch], params)
                _, d_pred = mse_loss(pred, y[batch])
                grads = backward_batch(cache, params, d_pred)
                params, state = adam_step(params, grads, state)
            self.loss_curve_.append(float(np.mean((predict_batch(params, X) - y) ** 2)))
        self.params_ = params
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = _validate_x(X, self.n_points)
        return predict_batch(self.params_, X)
