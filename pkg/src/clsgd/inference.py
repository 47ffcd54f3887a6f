"""Sandwich variance machinery for the averaged stochastic estimator.

Two plug-in matrices are estimated from the fitted sample at the returned
average: the sensitivity H (sum over components of gradient outer products,
valid through the second Bartlett identity applied per component) and the
variability J (outer products of per-observation composite scores). The
scheme-dependent optimization-noise matrix V_P combines them through the
inclusion moments, and the three asymptotic regimes turn (H, J, V_P) into a
covariance for the averaged estimate, from which Wald tests, confidence
intervals and Holm-adjusted p-values follow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import norm

from .errors import ConditioningError
from .samplers import SchemeMoments

REGIMES = ("R1", "R2", "R3")


@dataclass(frozen=True)
class SandwichEstimate:
    H_hat: np.ndarray
    J_hat: np.ndarray
    V_P: np.ndarray
    regime: str
    cov_theta_bar: np.ndarray
    T_n: int
    n: int


@dataclass(frozen=True)
class TestResult:
    estimate: float
    std_error: float
    z: float
    p_value: float
    p_adjusted: float
    reject: bool


def _symmetrize(M):
    return (M + M.T) / 2.0


def _gradient_pass(model, theta, rows):
    """One pass over components accumulating H-hat and per-row scores."""
    n = len(rows)
    d = model.dim
    H = np.zeros((d, d))
    scores = np.zeros((n, d))
    for _, cols, block in model.component_gradient_blocks(theta, rows):
        H[np.ix_(cols, cols)] += block.T @ block
        scores[:, cols] += block
    return _symmetrize(H / n), scores


def estimate_H(model, theta, data) -> np.ndarray:
    """H-hat = (1/n) sum_i sum_k grad_k grad_k^T at theta, over fit rows."""
    H, _ = _gradient_pass(model, np.asarray(theta, float), data.fit_rows())
    return H


def estimate_J(model, theta, data) -> np.ndarray:
    """J-hat = (1/n) sum_i s_i s_i^T with s_i the per-observation score."""
    rows = data.fit_rows()
    _, scores = _gradient_pass(model, np.asarray(theta, float), rows)
    return _symmetrize(scores.T @ scores / len(rows))


def estimate_H_J(model, theta, data):
    """Both sample matrices from a single gradient pass."""
    rows = data.fit_rows()
    H, scores = _gradient_pass(model, np.asarray(theta, float), rows)
    return H, _symmetrize(scores.T @ scores / len(rows))


def v_p(moments: SchemeMoments, H_hat, J_hat, n) -> np.ndarray:
    """Finite-n plug-in of the optimization-noise matrix:
    V_P = gamma1^-2 n^-1 (gamma1 - gamma3) H + n^-1 (gamma1^-2 gamma3 - 1) J."""
    g1, g3 = moments.gamma1, moments.gamma3
    coef_h = (g1 - g3) / (g1 * g1 * n)
    coef_j = (g3 / (g1 * g1) - 1.0) / n
    return coef_h * np.asarray(H_hat) + coef_j * np.asarray(J_hat)


def _solve_spd(H, rhs):
    """Symmetric solve with a one-shot diagonal jitter fallback."""
    H = np.asarray(H, float)
    try:
        cf = linalg.cho_factor(H, lower=True)
        return linalg.cho_solve(cf, rhs)
    except linalg.LinAlgError:
        jitter = 1e-8 * float(np.mean(np.diag(H)))
        try:
            cf = linalg.cho_factor(H + jitter * np.eye(H.shape[0]), lower=True)
            return linalg.cho_solve(cf, rhs)
        except linalg.LinAlgError as exc:
            raise ConditioningError(
                "H-hat is numerically singular even after diagonal jitter; "
                "the fit is likely too short for inference"
            ) from exc


def cov_theta_bar(H_hat, J_hat, V_P, regime, T_n, n) -> np.ndarray:
    """Covariance of the averaged estimate under the three regimes.

    R1: H^-1 J H^-1 / n (data noise only); R2: H^-1 V_P H^-1 / T_n
    (optimization noise only); R3: their sum, the compound form.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}")
    d = np.asarray(H_hat).shape[0]
    Hinv = _solve_spd(H_hat, np.eye(d))
    data_part = Hinv @ np.asarray(J_hat) @ Hinv / n
    opt_part = Hinv @ np.asarray(V_P) @ Hinv / T_n
    if regime == "R1":
        cov = data_part
    elif regime == "R2":
        cov = opt_part
    else:
        cov = data_part + opt_part
    return (cov + cov.T) / 2.0


def sandwich(model, theta_bar, data, scheme_moments, T_n, regime="R3") -> SandwichEstimate:
    """Full pipeline: H-hat, J-hat, V_P and the regime covariance at theta_bar."""
    n = data.n_fit
    H, J = estimate_H_J(model, theta_bar, data)
    V = v_p(scheme_moments, H, J, n)
    cov = cov_theta_bar(H, J, V, regime, T_n, n)
    return SandwichEstimate(H, J, V, regime, cov, int(T_n), int(n))


def confidence_intervals(theta_bar, cov, level=0.95):
    """Per-coordinate Wald intervals theta_j +/- z * sqrt(cov_jj)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    theta_bar = np.asarray(theta_bar, float)
    var = np.diag(np.asarray(cov, float))
    if np.any(var < 0):
        raise ArithmeticError("covariance has negative diagonal entries")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(var)
    return np.column_stack([theta_bar - half, theta_bar + half])


def holm_adjust(p_values) -> np.ndarray:
    """Step-down Holm adjustment, returned in the input order.

    Sorted ascending, p~_(i) = max_{j<=i} min(1, (m-j+1) p_(j)).
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError("p_values must be a vector")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = (m - np.arange(m)) * p[order]
    adjusted = np.minimum(1.0, np.maximum.accumulate(scaled))
    out = np.empty(m)
    out[order] = adjusted
    return out


def wald_tests(theta_bar, cov, level=0.95, null=0.0):
    """Two-sided Wald tests of each coordinate against `null`, with Holm
    familywise adjustment; rejection uses the adjusted p-values."""
    theta_bar = np.asarray(theta_bar, float)
    se = np.sqrt(np.diag(np.asarray(cov, float)))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (theta_bar - null) / se
    p = 2.0 * norm.sf(np.abs(z))
    p_adj = holm_adjust(p)
    alpha = 1.0 - level
    return [
        TestResult(float(t), float(s), float(zz), float(pp), float(pa), bool(pa < alpha))
        for t, s, zz, pp, pa in zip(theta_bar, se, z, p, p_adj)
    ]
