"""Estimator-style front end: configure a problem and an architecture,
``fit`` minimizes the physics residual plus condition mismatch, ``predict``
evaluates the learned solution field at query points.

There is no labeled training data; ``fit`` ignores X and y and samples its
own collocation points, so the class still composes with scikit-learn
tooling (``get_params``/``set_params``/``clone``).
"""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .architectures import build_model
from .base import DTYPES
from .errors import ConfigurationError
from .problems import build_problem
from .training import TrainConfig, evaluate_l2, train
from .validation import check_points


class PDESolver(BaseEstimator):
    """Trains one architecture on one PDE problem and acts as the solution.

    Parameters mirror the run-config schema; ``None`` values resolve to the
    per-problem / per-architecture defaults. After ``fit`` the trained model
    is available as ``model_`` and the metric log as ``history_``.
    """

    def __init__(self, problem="helmholtz", problem_params=None,
                 architecture="pgcan", architecture_params=None,
                 epochs=2_000, learning_rate=1e-3, n_interior=2_000,
                 n_boundary=256, n_initial=256, resample_every=100,
                 reweight_every=None, dynamic_weights=None, ema_alpha=0.1,
                 eval_every=500, precision="fp32", seed=0):
        self.problem = problem
        self.problem_params = problem_params
        self.architecture = architecture
        self.architecture_params = architecture_params
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.n_interior = n_interior
        self.n_boundary = n_boundary
        self.n_initial = n_initial
        self.resample_every = resample_every
        self.reweight_every = reweight_every
        self.dynamic_weights = dynamic_weights
        self.ema_alpha = ema_alpha
        self.eval_every = eval_every
        self.precision = precision
        self.seed = seed

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate,
            n_interior=self.n_interior, n_boundary=self.n_boundary,
            n_initial=self.n_initial, resample_every=self.resample_every,
            reweight_every=self.reweight_every,
            dynamic_weights=self.dynamic_weights, ema_alpha=self.ema_alpha,
            eval_every=self.eval_every, precision=self.precision,
            seed=self.seed)

    def fit(self, X=None, y=None):
        """Solves the configured problem; X and y are accepted and ignored."""
        config = self._train_config()
        torch.manual_seed(self.seed)
        self.problem_ = build_problem(self.problem, **(self.problem_params or {}))
        self.model_ = build_model(self.architecture, self.problem_.bounds,
                                  n_outputs=self.problem_.n_outputs,
                                  dtype=DTYPES[self.precision],
                                  **(self.architecture_params or {}))
        self.state_ = train(self.model_, self.problem_, config)
        self.history_ = self.state_.log
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict/score")

    def predict(self, X):
        """Solution values at query points, one row per point."""
        self._require_fitted()
        X = check_points(X, n_dims=self.model_.n_inputs,
                         bounds=self.model_.bounds)
        dtype = next(self.model_.parameters()).dtype
        with torch.no_grad():
            out = self.model_(torch.as_tensor(X, dtype=dtype)).numpy()
        return out[:, 0] if self.problem_.n_outputs == 1 else out

    def score(self, X=None, y=None):
        """Negative relative-L2 error against the problem reference."""
        self._require_fitted()
        metrics = evaluate_l2(self.model_, self.problem_, self._train_config())
        if not metrics:
            raise ConfigurationError(
                f"problem '{self.problem}' has no reference solution to score against")
        return -metrics["l2rel"]
