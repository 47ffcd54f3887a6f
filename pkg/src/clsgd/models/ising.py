"""Ising model for binary vectors: exact pmf, exact sampler, and the Besag
node-conditional (pseudolikelihood) components with analytic gradients.

Parameter layout (d = p + p(p-1)/2): node intercepts first, then the upper
triangle of the symmetric edge matrix in lexicographic order
(0,1), (0,2), ..., (p-2, p-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from ..data import Dataset
from ..errors import CapabilityError
from .base import CompositeModel

ENUMERATION_MAX_P = 25
_CHUNK_BITS = 18  # states are enumerated in chunks of 2**_CHUNK_BITS


@dataclass(frozen=True)
class IsingParams:
    """Structured view of the flat parameter vector.

    intercepts: shape (p,); edges: symmetric (p, p) with zero diagonal.
    """

    intercepts: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.intercepts, dtype=float)
        w = np.asarray(self.edges, dtype=float)
        p = b.shape[0]
        if w.shape != (p, p):
            raise ValueError("edges must be p x p")
        if not np.allclose(w, w.T):
            raise ValueError("edges must be symmetric")
        if np.any(np.diag(w) != 0):
            raise ValueError("edges must have zero diagonal")
        object.__setattr__(self, "intercepts", b)
        object.__setattr__(self, "edges", w)

    @property
    def p(self) -> int:
        return self.intercepts.shape[0]

    def to_flat(self) -> np.ndarray:
        iu = np.triu_indices(self.p, k=1)
        return np.concatenate([self.intercepts, self.edges[iu]])

    @staticmethod
    def from_flat(theta, p) -> "IsingParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (p + p * (p - 1) // 2,):
            raise ValueError("flat vector has wrong length for this p")
        b = theta[:p]
        w = np.zeros((p, p))
        iu = np.triu_indices(p, k=1)
        w[iu] = theta[p:]
        w = w + w.T
        return IsingParams(b, w)


def grid_truth(p) -> IsingParams:
    """True parameters of the two-row grid used in the simulation studies.

    Nodes are numbered column-major over the 2 x (p/2) grid; with 1-based
    numbering, odd nodes get intercept -0.5 and even nodes +0.5, edges within
    a row (horizontal) are +0.5 and within a column (vertical) -0.5.
    """
    if p % 2 != 0 or p < 2:
        raise ValueError("grid truth needs an even p >= 2")
    cols = p // 2
    b = np.where(np.arange(1, p + 1) % 2 == 1, -0.5, 0.5)
    w = np.zeros((p, p))
    for c in range(cols):
        top, bottom = 2 * c, 2 * c + 1
        w[top, bottom] = w[bottom, top] = -0.5
        if c + 1 < cols:
            w[top, 2 * c + 2] = w[2 * c + 2, top] = 0.5
            w[bottom, 2 * c + 3] = w[2 * c + 3, bottom] = 0.5
    return IsingParams(b, w)


def _states_chunk(start, stop, p) -> np.ndarray:
    """Binary state matrix for integer states start..stop-1 (bit j = node j)."""
    ints = np.arange(start, stop, dtype=np.int64)
    return ((ints[:, None] >> np.arange(p)) & 1).astype(np.float64)


def _check_p(p):
    if p > ENUMERATION_MAX_P:
        raise CapabilityError(
            f"exact enumeration supports p <= {ENUMERATION_MAX_P}, got p = {p}"
        )


def _chunk_energies(params: IsingParams):
    p = params.p
    total = 1 << p
    step = min(total, 1 << _CHUNK_BITS)
    for start in range(0, total, step):
        y = _states_chunk(start, min(start + step, total), p)
        yield y @ params.intercepts + 0.5 * np.einsum("ij,ij->i", y @ params.edges, y)


def log_partition(params: IsingParams) -> float:
    """log Z by streaming log-sum-exp over all 2^p states (p <= 25)."""
    _check_p(params.p)
    pieces = [logsumexp(e) for e in _chunk_energies(params)]
    return float(logsumexp(pieces))


def pmf_table(params: IsingParams) -> np.ndarray:
    """Exact probabilities of all 2^p states, in integer-state order."""
    _check_p(params.p)
    energies = np.concatenate(list(_chunk_energies(params)))
    energies -= energies.max()
    probs = np.exp(energies)
    probs /= probs.sum()
    return probs


def exact_sample(params: IsingParams, n, rng) -> Dataset:
    """n i.i.d. draws from the exact pmf by inverse-CDF over the state table."""
    probs = pmf_table(params)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    states = np.searchsorted(cdf, rng.random(n), side="right")
    rows = ((states[:, None] >> np.arange(params.p)) & 1).astype(np.int64)
    return Dataset(rows, "binary")


class IsingModel(CompositeModel):
    """Besag pseudolikelihood: K = p node-conditional logistic components."""

    def __init__(self, p):
        if p < 2:
            raise ValueError("need p >= 2")
        self.p = int(p)
        self.dim = self.p + self.p * (self.p - 1) // 2
        self.n_components = self.p
        iu = np.triu_indices(self.p, k=1)
        names = [f"beta_{j + 1}0" for j in range(self.p)]
        names += [f"beta_{a + 1}{b + 1}" for a, b in zip(*iu)]
        self.param_names = names
        # edge_index[j, j'] = flat index of edge (j, j'); diagonal points at a
        # scratch slot (index dim) so vectorized scatters can drop self terms.
        eidx = np.full((self.p, self.p), self.dim, dtype=np.int64)
        flat = np.arange(self.dim - self.p) + self.p
        eidx[iu] = flat
        eidx[iu[1], iu[0]] = flat
        self.edge_index = eidx

    # -- layout helpers -------------------------------------------------
    def structured(self, theta) -> IsingParams:
        return IsingParams.from_flat(theta, self.p)

    def flat(self, params: IsingParams) -> np.ndarray:
        if params.p != self.p:
            raise ValueError("parameter p mismatch")
        return params.to_flat()

    def _split(self, theta):
        theta = np.asarray(theta, dtype=float)
        b = theta[: self.p]
        w = np.zeros((self.p, self.p))
        iu = np.triu_indices(self.p, k=1)
        w[iu] = theta[self.p:]
        return b, w + w.T

    # -- node-conditional components ------------------------------------
    def sub_loglik(self, theta, y_row, comp) -> float:
        b, w = self._split(theta)
        y = np.asarray(y_row, dtype=float)
        a = b[comp] + w[comp] @ y
        return float(y[comp] * a - np.logaddexp(0.0, a))

    def sub_grad(self, theta, y_row, comp) -> np.ndarray:
        b, w = self._split(theta)
        y = np.asarray(y_row, dtype=float)
        a = b[comp] + w[comp] @ y
        r = y[comp] - expit(a)
        g = np.zeros(self.dim + 1)
        g[comp] = r
        g[self.edge_index[comp]] = r * y
        return g[: self.dim]

    def selection_grad_sum(self, theta, rows, obs_idx, comp_idx) -> np.ndarray:
        obs = np.asarray(obs_idx)
        comps = np.asarray(comp_idx)
        if obs.size == 0:
            return np.zeros(self.dim)
        b, w = self._split(theta)
        y = rows[obs].astype(np.float64)
        a = b[comps] + np.einsum("mp,mp->m", y, w[comps])
        r = y[np.arange(len(obs)), comps] - expit(a)
        g = np.zeros(self.dim + 1)
        np.add.at(g, comps, r)
        np.add.at(g, self.edge_index[comps].ravel(), (r[:, None] * y).ravel())
        return g[: self.dim]

    # -- vectorized whole-dataset paths ----------------------------------
    def _residual_matrix(self, theta, rows):
        b, w = self._split(theta)
        y = rows.astype(np.float64)
        return y, y - expit(y @ w + b)

    def loglik_matrix(self, theta, rows) -> np.ndarray:
        b, w = self._split(theta)
        y = rows.astype(np.float64)
        a = y @ w + b
        return y * a - np.logaddexp(0.0, a)

    def component_gradient_blocks(self, theta, rows):
        y, resid = self._residual_matrix(theta, rows)
        for j in range(self.p):
            cols = np.concatenate(([j], self.edge_index[j][self.edge_index[j] < self.dim]))
            others = np.flatnonzero(np.arange(self.p) != j)
            block = np.empty((len(rows), self.p))
            block[:, 0] = resid[:, j]
            block[:, 1:] = resid[:, [j]] * y[:, others]
            yield j, cols, block

    # dedicated fast full gradient (used by the GD baseline)
    def full_grad_rows(self, theta, rows) -> np.ndarray:
        y, resid = self._residual_matrix(theta, rows)
        g = np.empty(self.dim)
        g[: self.p] = resid.sum(axis=0)
        cross = resid.T @ y
        iu = np.triu_indices(self.p, k=1)
        g[self.p:] = cross[iu] + cross.T[iu]
        return g


def conditional_loglik(params: IsingParams, y_row, j) -> float:
    """log P(Y_j = y_j | rest) under the logistic full conditional."""
    model = IsingModel(params.p)
    return model.sub_loglik(params.to_flat(), y_row, j)


def conditional_grad(params: IsingParams, y_row, j) -> np.ndarray:
    model = IsingModel(params.p)
    return model.sub_grad(params.to_flat(), y_row, j)
