"""Shared toy models and oracle helpers for the test suite."""

import numpy as np
import pytest

from clsgd import CompositeModel, Dataset


class ZeroGradModel(CompositeModel):
    """All components constant: the optimizer must sit still."""

    def __init__(self, dim=3, K=2):
        self.dim = dim
        self.n_components = K
        self.param_names = [f"t{i}" for i in range(dim)]

    def sub_loglik(self, theta, y_row, comp):
        return 0.0

    def sub_grad(self, theta, y_row, comp):
        return np.zeros(self.dim)


class MeanModel(CompositeModel):
    """1-d quadratic component l(theta; y) = -(theta - y)^2 / 2, K = 1.

    The composite-likelihood estimate is the sample mean.
    """

    dim = 1
    n_components = 1
    param_names = ["mu"]

    def sub_loglik(self, theta, y_row, comp):
        return -0.5 * float((theta[0] - y_row[0]) ** 2)

    def sub_grad(self, theta, y_row, comp):
        return np.array([float(y_row[0]) - theta[0]])


class LinearGaussianModel(CompositeModel):
    """K linear-Gaussian components on a shared d-dim parameter.

    l_k(theta; y) = -(a_k . theta - y_k b_k)^2 / 2 with fixed random designs;
    rows carry K integer responses.
    """

    def __init__(self, d=3, K=5, seed=7):
        rng = np.random.default_rng(seed)
        self.dim = d
        self.n_components = K
        self.param_names = [f"t{i}" for i in range(d)]
        self.A = rng.normal(size=(K, d))
        self.b = rng.normal(size=K)

    def sub_loglik(self, theta, y_row, comp):
        resid = self.A[comp] @ theta - y_row[comp] * self.b[comp]
        return -0.5 * float(resid**2)

    def sub_grad(self, theta, y_row, comp):
        resid = self.A[comp] @ theta - y_row[comp] * self.b[comp]
        return -resid * self.A[comp]


def finite_difference_grad(fun, theta, h=1e-6):
    """Central-difference gradient oracle."""
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fun(up) - fun(dn)) / (2 * h)
    return g


def count_dataset(rng, n, p, lam=2.0):
    return Dataset(rng.poisson(lam, size=(n, p)).astype(np.int64), "count")


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
