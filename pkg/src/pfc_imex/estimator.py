"""scikit-learn style wrapper: each sample is a field, ``transform`` evolves it."""

from __future__ import annotations

import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import model, spectral
from .stepper import ImexStepper
from .tableau import load_tableau


class PFCEvolver(TransformerMixin, BaseEstimator):
    """Evolve PFC fields from time 0 to ``t_final``.

    ``X`` is either ``(n_samples, n_nodes)`` with each row a field flattened
    x-fastest, or ``(n_samples, *dims)``. The output has the same shape as
    the input. ``fit`` ignores its data: it only binds the grid, tableau and
    certificate. ``m0="auto"`` is resolved per sample.
    """

    def __init__(self, dims=(64, 64), lengths=(64.0, 64.0), tableau="imex43", tau=0.1,
                 t_final=1.0, epsilon=0.025, a=0.001, alpha=0.0, beta=1.0, r=0.0,
                 m0="auto", strict=False):
        self.dims = dims
        self.lengths = lengths
        self.tableau = tableau
        self.tau = tau
        self.t_final = t_final
        self.epsilon = epsilon
        self.a = a
        self.alpha = alpha
        self.beta = beta
        self.r = r
        self.m0 = m0
        self.strict = strict

    def _params(self, m0) -> model.ModelParams:
        return model.ModelParams(epsilon=self.epsilon, a=self.a, alpha=self.alpha,
                                 beta=self.beta, r=self.r, m0=float(m0))

    def fit(self, X=None, y=None):
        self.grid_ = spectral.make_grid(self.dims, self.lengths)
        self.tableau_ = load_tableau(self.tableau)
        base = self._params(math.inf if self.m0 == "auto" else self.m0)
        self.n_features_in_ = self.grid_.n_nodes
        self.certified_ = self.m0 != "auto" and ImexStepper(
            self.grid_, self.tableau_, base, strict=self.strict).certificate.admissible
        return self

    def _as_fields(self, X):
        X = np.asarray(X, dtype=float)
        dims = tuple(self.grid_.dims)
        if X.ndim == 2 and X.shape[1] == self.grid_.n_nodes and len(dims) > 1:
            X = check_array(X)
            return X.reshape((X.shape[0],) + dims, order="F"), True
        if X.shape[1:] != dims:
            raise ValueError(f"expected samples of shape {dims} or {self.grid_.n_nodes} nodes, "
                             f"got {X.shape[1:]}")
        if not np.isfinite(X).all():
            raise ValueError("input contains non-finite values")
        return X, False

    def transform(self, X):
        check_is_fitted(self, "grid_")
        fields, flat = self._as_fields(X)
        out = np.empty_like(fields)
        for i, phi0 in enumerate(fields):
            m0 = model.default_m0(phi0) if self.m0 == "auto" else self.m0
            with warnings.catch_warnings():
                if not self.strict:
                    warnings.simplefilter("ignore")
                stepper = ImexStepper(self.grid_, self.tableau_, self._params(m0), strict=self.strict)
            out[i] = stepper.run(phi0, self.tau, self.t_final).phi
        if flat:
            return out.reshape((out.shape[0], -1), order="F")
        return out

    def score(self, X, y=None):
        """Negative mean final energy (higher means more relaxed)."""
        check_is_fitted(self, "grid_")
        fields, _ = self._as_fields(self.transform(X))
        p = self._params(math.inf)
        return -float(np.mean([model.energy(phi, self.grid_, p) for phi in fields]))
