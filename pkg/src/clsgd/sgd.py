"""Averaged stochastic gradient descent on the composite log-likelihood.

Each iteration draws a sparse cell selection, forms the unbiased stochastic
gradient of the negative objective, takes a Robbins-Monro step

    theta_t = theta_{t-1} - (eta_t / n) * S_t,      eta_t = eta0 * t^(-c),

and the estimator returned is the average of the post-burn-in iterates.
Optional extras: trajectory recording, snapshot averages at checkpoints, and
holdout-based early stopping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .models.base import holdout_negative_loglik
from .samplers import SchemeSpec, make_sampler, replication_rng

DIVERGENCE_BOUND = 1e8


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm inputs: stepsize schedule, run length, burn-in, extras.

    holdout_check, when set, is a (period, rel_tol) pair: every `period`
    iterations past burn-in the holdout negative composite log-likelihood is
    evaluated at the running average, and the run stops once the relative
    improvement falls below rel_tol.
    """

    eta0: float
    max_iters: int
    burn_in: int | None = None    # None: floor(0.25 * n) at fit time
    c_exponent: float = 0.501
    record_every: int | None = None
    holdout_check: tuple[int, float] | None = None
    profile_steps: bool = False   # time the sampling/approximation/update steps

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not 0.5 < self.c_exponent < 1.0:
            raise ValueError("stepsize exponent must lie in (1/2, 1)")
        if self.burn_in is not None and not 0 <= self.burn_in < self.max_iters:
            raise ValueError("need 0 <= burn_in < max_iters")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.holdout_check is not None:
            period, tol = self.holdout_check
            if period < 1 or tol < 0:
                raise ValueError("holdout_check needs period >= 1 and rel_tol >= 0")


@dataclass
class FitResult:
    theta_bar: np.ndarray
    theta_last: np.ndarray
    iterations_run: int
    scheme: SchemeSpec
    trajectory: list = field(default_factory=list)
    holdout_curve: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    step_seconds: dict | None = None   # totals when profile_steps was on


def stepsize(config: OptimizerConfig, t) -> float:
    """eta_t = eta0 * t^(-c) for t >= 1."""
    if t < 1:
        raise ValueError("iterations are 1-based")
    return config.eta0 * float(t) ** (-config.c_exponent)


def stochastic_gradient(model, theta, rows, selection, gamma1) -> np.ndarray:
    """Unbiased estimate of the negative composite score:
    -(1/gamma1) * sum of component gradients over the selected cells."""
    g = model.selection_grad_sum(theta, rows, selection.obs, selection.comps)
    return -g / gamma1


def holdout_stop_check(curve, rel_tol) -> bool:
    """True once the latest holdout negative log-likelihood improves on the
    previous evaluation by less than rel_tol (relative)."""
    if len(curve) < 2:
        return False
    prev, last = curve[-2][1], curve[-1][1]
    denom = max(abs(prev), 1e-300)
    return (prev - last) / denom < rel_tol


def fit(
    model,
    data,
    scheme: SchemeSpec,
    config: OptimizerConfig,
    theta0=None,
    rng=None,
    seed=None,
    replication=0,
    checkpoints=None,
) -> FitResult:
    """Run Algorithm-1-style averaged SGD and return the trajectory average.

    The optimization randomness comes from `rng` (or a Philox stream derived
    from (seed, replication)); identical inputs give bit-identical results.
    `checkpoints` requests snapshot averages at intermediate iteration counts
    within a single run.
    """
    if rng is None:
        if seed is None:
            raise ValueError("pass either rng or seed")
        rng = replication_rng(seed, replication)
    rows = data.fit_rows()
    n = len(rows)
    if scheme.n != n:
        raise ValueError(f"scheme is sized for n={scheme.n} but data has {n} fit rows")
    if config.holdout_check is not None and data.holdout_mask is None:
        raise ValueError("holdout_check configured but dataset has no holdout rows")
    theta = np.zeros(model.dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if theta.shape != (model.dim,):
        raise ValueError("theta0 has the wrong dimension")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    burn_in = config.burn_in if config.burn_in is not None else n // 4
    if not burn_in < config.max_iters:
        raise ValueError("burn-in must be shorter than the run")
    sampler = make_sampler(scheme, rng)
    weight = model.objective_weight
    inv_gamma1 = float(n)  # gamma1 is pinned at 1/n for every scheme
    # compensated (Kahan) accumulation so theta_bar matches the plain mean of
    # the recorded iterates to ~machine precision even over long runs
    avg_sum = np.zeros(model.dim)
    avg_comp = np.zeros(model.dim)
    n_avg = 0

    def _running_mean():
        return (avg_sum / n_avg) if n_avg else theta.copy()
    result = FitResult(theta, theta.copy(), 0, scheme)
    checkpoints = sorted(set(int(t) for t in checkpoints)) if checkpoints else []
    profile = config.profile_steps
    if profile:
        result.step_seconds = {"sampling": 0.0, "approximation": 0.0, "update": 0.0}
        clock = time.perf_counter
    for t in range(1, config.max_iters + 1):
        if profile:
            t0 = clock()
            sel = sampler()
            t1 = clock()
            g = model.selection_grad_sum(theta, rows, sel.obs, sel.comps)
            s_t = -inv_gamma1 * weight * g
            t2 = clock()
            theta = theta - (stepsize(config, t) / n) * s_t
            t3 = clock()
            result.step_seconds["sampling"] += t1 - t0
            result.step_seconds["approximation"] += t2 - t1
            result.step_seconds["update"] += t3 - t2
        else:
            sel = sampler()
            g = model.selection_grad_sum(theta, rows, sel.obs, sel.comps)
            s_t = -inv_gamma1 * weight * g
            theta = theta - (stepsize(config, t) / n) * s_t
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > DIVERGENCE_BOUND:
            raise DivergenceError(t, result.theta_last)
        result.theta_last = theta
        if config.record_every and t % config.record_every == 0:
            result.trajectory.append((t, theta.copy()))
        if t > burn_in:
            n_avg += 1
            y = theta - avg_comp
            s = avg_sum + y
            avg_comp = (s - avg_sum) - y
            avg_sum = s
        if checkpoints and t == checkpoints[0]:
            checkpoints.pop(0)
            result.snapshots[t] = _running_mean()
        if (
            config.holdout_check is not None
            and t > burn_in
            and t % config.holdout_check[0] == 0
        ):
            value = holdout_negative_loglik(model, _running_mean(), data)
            result.holdout_curve.append((t, value))
            if holdout_stop_check(result.holdout_curve, config.holdout_check[1]):
                result.iterations_run = t
                break
        result.iterations_run = t
    result.theta_bar = _running_mean()
    return result
