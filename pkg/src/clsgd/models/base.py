"""Contract shared by every composite-likelihood model.

A model owns the parameter layout (a flat vector of length `dim`), a fixed
number K of sub-log-likelihood components per observation, and analytic
gradients. All operations are pure functions of (theta, data); model objects
hold structure only (dimensions, index maps) and are safe to share across
threads.

Sign convention: everything here is the maximization form, i.e. components
return log-likelihood values and gradients of the log-likelihood. The SGD
engine negates internally where the descent formulation needs it.
"""

from __future__ import annotations

import numpy as np


class CompositeModel:
    """Base class; concrete models override the per-component operations.

    Attributes:
        dim: length d of the flat parameter vector.
        n_components: number K of sub-log-likelihoods per observation.
        param_names: length-d list naming each flat coordinate.
        objective_weight: uniform component weight w_k baked into the fitted
            objective (1.0 unless the model rescales, like the pairwise
            frailty objective).
    """

    dim: int
    n_components: int
    param_names: list
    objective_weight: float = 1.0

    # -- single-component contract ------------------------------------
    def sub_loglik(self, theta, y_row, comp) -> float:
        raise NotImplementedError

    def sub_grad(self, theta, y_row, comp) -> np.ndarray:
        raise NotImplementedError

    # -- batched hooks (defaults loop; models override vectorized) -----
    def selection_grad_sum(self, theta, rows, obs_idx, comp_idx) -> np.ndarray:
        """Sum of sub-log-likelihood gradients over selected (obs, comp) cells."""
        g = np.zeros(self.dim)
        for i, k in zip(np.asarray(obs_idx), np.asarray(comp_idx)):
            g += self.sub_grad(theta, rows[i], int(k))
        return g

    def component_gradient_blocks(self, theta, rows):
        """Yield (comp, col_idx, block) triples covering all components.

        `block` holds the gradients of component `comp` for every row,
        restricted to the columns `col_idx` the component can touch
        (shape: len(rows) x len(col_idx)). Used by the sandwich estimators.
        """
        cols = np.arange(self.dim)
        for k in range(self.n_components):
            block = np.empty((len(rows), self.dim))
            for i in range(len(rows)):
                block[i] = self.sub_grad(theta, rows[i], k)
            yield k, cols, block

    def loglik_matrix(self, theta, rows) -> np.ndarray:
        """Per-(row, component) log-likelihood values, shape (n, K)."""
        out = np.empty((len(rows), self.n_components))
        for i in range(len(rows)):
            for k in range(self.n_components):
                out[i, k] = self.sub_loglik(theta, rows[i], k)
        return out


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise ValueError(f"theta must have shape ({model.dim},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def full_loglik(model, theta, data, weights=None) -> float:
    """Composite log-likelihood sum_i sum_k w_k l_k(theta; y_i) over fit rows.

    `weights` is a length-K vector of fixed component weights (default all 1);
    holdout rows never contribute.
    """
    theta = _check_theta(model, theta)
    if weights is None:
        weights = np.ones(model.n_components)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (model.n_components,):
        raise ValueError("weights must have one entry per component")
    ll = model.loglik_matrix(theta, data.fit_rows())
    return float(ll.sum(axis=0) @ weights)


def full_grad(model, theta, data) -> np.ndarray:
    """Gradient of the (unit-weight) composite log-likelihood over fit rows."""
    theta = _check_theta(model, theta)
    rows = data.fit_rows()
    g = np.zeros(model.dim)
    for _, cols, block in model.component_gradient_blocks(theta, rows):
        g[cols] += block.sum(axis=0)
    return g


def holdout_negative_loglik(model, theta, data, weights=None) -> float:
    """Average negative composite log-likelihood on the holdout rows."""
    rows = data.holdout_rows()
    if len(rows) == 0:
        raise ValueError("dataset has no holdout rows")
    if weights is None:
        weights = np.full(model.n_components, model.objective_weight)
    ll = model.loglik_matrix(np.asarray(theta, float), rows)
    return float(-(ll.sum(axis=0) @ np.asarray(weights)) / len(rows))
