"""scikit-learn style front end to the particle posterior.

``X`` holds controls (one column, tau in us) and ``y`` the single-shot
outcomes. :meth:`BayesianSensingEstimator.fit` starts from the prior and
applies the shots in order, :meth:`partial_fit` continues from the current
posterior, and :meth:`suggest` returns the next batch of controls.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import (check_array, check_consistent_length, check_is_fitted,
                                      check_random_state)

from .eig import BatchPolicy, ControlGrid, eig_table, sample_batch
from .exceptions import ConfigurationError
from .models import NuclearSpinModel
from .smc import (ParticleCloud, ResamplerConfig, bayes_update, effective_sample_size,
                  remap_labels, resample_liu_west, summarize)


def check_controls(X) -> np.ndarray:
    """Controls as a 1-D float array; accepts ``(n,)`` or ``(n, 1)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, ensure_2d=True, dtype=np.float64, ensure_min_samples=0)
    if X.shape[1] != 1:
        raise ConfigurationError(f"expected one control column, got {X.shape[1]}")
    if np.any(X <= 0):
        raise ConfigurationError("controls must be positive")
    return X[:, 0]


def check_outcomes(y) -> np.ndarray:
    y = check_array(np.asarray(y), ensure_2d=False, dtype=None, ensure_min_samples=0)
    if y.ndim != 1:
        raise ConfigurationError("outcomes must be one-dimensional")
    if not np.all(np.isin(y, (0, 1))):
        raise ConfigurationError("outcomes must be 0 or 1")
    return y.astype(np.int64)


class BayesianSensingEstimator(BaseEstimator):
    """Sequential Monte Carlo posterior over a sensing model's parameters.

    Parameters
    ----------
    model : SensingModel, default NuclearSpinModel()
    grid : ControlGrid or None
        Candidate controls for :meth:`suggest`; defaults to 1..10 us in 10 ns.
    n_particles : int
    n_batch, p_exponent, floor : batch sampling policy.
    utility : {"eig", "mutual_information"}
    resample_a, ess_threshold : Liu-West resampler settings.
    random_state : int, Generator or None
    """

    def __init__(self, model=None, grid=None, n_particles=3200, n_batch=15, p_exponent=6.0,
                 floor=False, utility="eig", resample_a=0.98, ess_threshold=0.5,
                 precision="mixed", random_state=None):
        self.model = model
        self.grid = grid
        self.n_particles = n_particles
        self.n_batch = n_batch
        self.p_exponent = p_exponent
        self.floor = floor
        self.utility = utility
        self.resample_a = resample_a
        self.ess_threshold = ess_threshold
        self.precision = precision
        self.random_state = random_state

    def _model(self):
        return self.model if self.model is not None else NuclearSpinModel()

    def _grid(self) -> ControlGrid:
        return self.grid if self.grid is not None else ControlGrid.arange(1.0, 10.0, 0.01)

    def _init(self):
        model = self._model()
        self.model_ = model
        self.rng_ = np.random.default_rng(check_random_state(self.random_state).randint(2 ** 31))
        self.resampler_ = ResamplerConfig(self.resample_a, self.ess_threshold)
        loc = model.sample_prior(self.n_particles, self.rng_)
        cloud = ParticleCloud(loc, np.full(self.n_particles, 1.0 / self.n_particles),
                              model.bounds)
        self.cloud_ = remap_labels(cloud, model)
        self.n_shots_ = 0
        self.n_resamples_ = 0

    def fit(self, X, y):
        """Posterior after applying ``(X, y)`` to a fresh prior."""
        self._init()
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        """Apply further shots to the current posterior (fitting from the prior if new)."""
        taus = check_controls(X)
        y = check_outcomes(y)
        check_consistent_length(taus, y)
        if not hasattr(self, "cloud_"):
            self._init()
        model = self.model_
        for tau, d in zip(taus, y):
            self.cloud_ = bayes_update(self.cloud_, model.likelihood(self.cloud_.locations, tau, d))
            self.n_shots_ += 1
            if effective_sample_size(self.cloud_) < self.ess_threshold * self.n_particles:
                self.cloud_ = resample_liu_west(self.cloud_, self.resampler_, self.rng_, model)
                self.n_resamples_ += 1
        return self

    @property
    def summary_(self):
        check_is_fitted(self, "cloud_")
        return summarize(self.cloud_, self.model_.groups, self.model_.param_names)

    @property
    def mean_(self) -> np.ndarray:
        return self.summary_.mean

    @property
    def covariance_(self) -> np.ndarray:
        return self.summary_.covariance

    def predict_proba(self, X) -> np.ndarray:
        """Posterior predictive ``[Pr(0), Pr(1)]`` per control."""
        check_is_fitted(self, "cloud_")
        taus = check_controls(X)
        p0, p1 = self.model_.likelihood_grid(self.cloud_.locations, taus, np.float64)
        out = np.column_stack([p0 @ self.cloud_.weights, p1 @ self.cloud_.weights])
        return out / out.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y) -> float:
        """Mean log posterior-predictive probability of the observed outcomes."""
        y = check_outcomes(y)
        proba = self.predict_proba(X)
        check_consistent_length(proba, y)
        return float(np.mean(np.log(proba[np.arange(y.size), y])))

    def suggest(self, n=None) -> np.ndarray:
        """Next controls, sampled from the utility table of the current posterior."""
        check_is_fitted(self, "cloud_")
        policy = BatchPolicy(n or self.n_batch, self.p_exponent, self.floor)
        grid = self._grid()
        table = eig_table(self.cloud_, self.model_, grid, utility=self.utility,
                          precision=self.precision)
        return sample_batch(table, grid, policy, self.rng_)
