"""Replication studies: MSE trajectories, confidence-interval coverage,
stepsize tuning by halving, and the synthetic large-survey pipeline.

Every experiment is driven by a plan plus a base seed, uses one Philox stream
per (setting, replication, purpose) so replications are independent and
parallelizable, and emits fixed-schema CSVs with 17-significant-digit floats:
re-running with the same plan and seed reproduces the files byte for byte.
Wall-clock profiling, when requested, goes to a separate timings file so the
result CSVs stay deterministic.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset
from .errors import DivergenceError, NumericDomainError, TuningError
from .gd import GDConfig, gd_fit
from .inference import confidence_intervals, cov_theta_bar, estimate_H_J, v_p, wald_tests
from .models.frailty import GammaFrailtyModel, frailty_truth, simulate_frailty
from .models.ising import IsingModel, IsingParams, exact_sample, grid_truth
from .samplers import SchemeSpec, moments
from .sgd import OptimizerConfig, fit

MSE_COLUMNS = [
    "model", "n", "p", "eta0", "scheme", "checkpoint_pass", "T_n",
    "replications", "diverged", "mse", "var_trace",
]
COVERAGE_COLUMNS = [
    "model", "n", "p", "eta0", "scheme", "regime", "checkpoint_pass", "T_n",
    "param_index", "param_name", "replications", "diverged", "covered", "coverage",
]
EDGE_COLUMNS = [
    "param_index", "name", "kind", "node_a", "node_b", "estimate",
    "std_error", "z", "p_value", "p_holm", "significant",
]


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid of settings for the replication studies."""

    model: str                      # "ising" | "frailty"
    n_list: tuple
    p_list: tuple
    schemes: tuple                  # labels, e.g. ("standard", "recycle_hyper:500")
    eta0: float
    passes_checkpoints: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    replications: int = 50
    level: float = 0.95
    base_seed: int = 0
    c_exponent: float = 0.501
    burn_in_frac: float = 0.25
    include_gd_baseline: bool = True

    def __post_init__(self):
        if self.model not in ("ising", "frailty"):
            raise ValueError("model must be 'ising' or 'frailty'")
        if self.replications < 2:
            raise ValueError("need at least 2 replications for variance-type output")
        if list(self.passes_checkpoints) != sorted(self.passes_checkpoints):
            raise ValueError("checkpoints must be sorted ascending")


def parse_scheme(label, n, K) -> SchemeSpec:
    """Turn an experiment label into a SchemeSpec.

    Labels: standard | bernoulli | hyper, optionally prefixed with recycle_
    and suffixed with :<window> (default window 500).
    """
    name = label
    window = None
    if name.startswith("recycle_"):
        name = name[len("recycle_"):]
        window = 500
    if ":" in name:
        name, w = name.split(":", 1)
        window = int(w)
    return SchemeSpec(name, n, K, recycle_window=window)


def _key_rng(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(x) for x in parts])))


def make_model(kind, p):
    return IsingModel(p) if kind == "ising" else GammaFrailtyModel(p)


def true_theta(kind, p) -> np.ndarray:
    if kind == "ising":
        return grid_truth(p).to_flat()
    return frailty_truth(p).to_unconstrained()


def simulate(kind, p, n, rng) -> Dataset:
    if kind == "ising":
        return exact_sample(grid_truth(p), n, rng)
    return simulate_frailty(frailty_truth(p), n, rng)


def mse_from_sq_errors(sq_errors, d) -> float:
    """(1/(dR)) sum_r ||theta_bar^(r) - theta*||^2 from per-replication
    squared norms."""
    sq_errors = list(sq_errors)
    if not sq_errors:
        return float("nan")
    return sum(sq_errors) / (d * len(sq_errors))


def select_from_halving_chain(chain, improve_tol=0.0):
    """Apply the halving stopping rule to (eta, criterion) pairs in halving
    order; `None` criteria mark diverged candidates.

    Keeps halving while the criterion strictly improves by more than
    improve_tol (relative); returns the best stepsize seen, preferring the
    larger step on ties. Raises TuningError if nothing converged.
    """
    best = None
    for eta, value in chain:
        if value is None:
            continue
        if best is None:
            best = (eta, value)
            continue
        if (best[1] - value) / max(abs(best[1]), 1e-300) > improve_tol:
            best = (eta, value)
        else:
            break
    if best is None:
        raise TuningError("every stepsize candidate in the halving chain diverged")
    return best[0]


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return value


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_manifest(path, plan_dict, base_seed):
    payload = {
        "seed": base_seed,
        "config": plan_dict,
        "versions": {"clsgd": __version__, "numpy": np.__version__},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _replication_fits(plan, n, p, rep, checkpoints_iters, collect_timings=None):
    """One replication: fresh data, one fit per scheme with shared data,
    optional GD baseline. Returns (snapshots_by_scheme, gd_theta, truth)."""
    kind = plan.model
    model = make_model(kind, p)
    truth = true_theta(kind, p)
    data = simulate(kind, p, n, _key_rng(plan.base_seed, n, p, rep, 0))
    burn = int(plan.burn_in_frac * n)
    config = OptimizerConfig(
        eta0=plan.eta0,
        max_iters=max(checkpoints_iters),
        burn_in=burn,
        c_exponent=plan.c_exponent,
        profile_steps=collect_timings is not None,
    )
    out = {}
    for s_idx, label in enumerate(plan.schemes):
        scheme = parse_scheme(label, n, model.n_components)
        rng = _key_rng(plan.base_seed, n, p, rep, 1 + s_idx)
        t0 = time.perf_counter()
        try:
            res = fit(model, data, scheme, config, rng=rng, checkpoints=checkpoints_iters)
            out[label] = res.snapshots
            steps = res.step_seconds or {}
        except (DivergenceError, NumericDomainError):
            # a numeric-domain escape is a divergence symptom: flag, don't abort
            out[label] = None
            steps = {}
        if collect_timings is not None:
            collect_timings.append((
                label, n, p, rep, time.perf_counter() - t0,
                steps.get("sampling", float("nan")),
                steps.get("approximation", float("nan")),
                steps.get("update", float("nan")),
            ))
    gd_theta = None
    if plan.include_gd_baseline:
        gd_theta = gd_fit(model, data, GDConfig(grad_tol=1e-9), theta0=None).theta
    return out, gd_theta, truth, model, data


def variance_trace(estimates) -> float:
    """Trace of the across-replication covariance of the estimates."""
    arr = np.asarray(list(estimates), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        return float("nan")
    return float(np.trace(np.cov(arr.T)))


def run_mse_experiment(plan: ExperimentPlan, out_csv=None, timings_csv=None):
    """Average squared distance to the truth, per scheme and checkpoint:
    MSE = (1/(dR)) sum_r ||theta_bar^(r,t) - theta*||^2, plus the trajectory
    of the across-replication variance trace, with the GD numerical estimate
    as a horizontal reference series."""
    rows = []
    timings = [] if timings_csv else None
    for n in plan.n_list:
        for p in plan.p_list:
            d = make_model(plan.model, p).dim
            checkpoints = [int(round(f * n)) for f in plan.passes_checkpoints]
            sq = {label: {t: [] for t in checkpoints} for label in plan.schemes}
            kept = {label: {t: [] for t in checkpoints} for label in plan.schemes}
            diverged = {label: 0 for label in plan.schemes}
            gd_sq = []
            gd_kept = []
            for rep in range(plan.replications):
                snaps, gd_theta, truth, _, _ = _replication_fits(
                    plan, n, p, rep, checkpoints, collect_timings=timings
                )
                for label, snap in snaps.items():
                    if snap is None:
                        diverged[label] += 1
                        continue
                    for t in checkpoints:
                        err = snap[t] - truth
                        sq[label][t].append(float(err @ err))
                        kept[label][t].append(snap[t])
                if gd_theta is not None:
                    err = gd_theta - truth
                    gd_sq.append(float(err @ err))
                    gd_kept.append(gd_theta)
            for label in plan.schemes:
                for f, t in zip(plan.passes_checkpoints, checkpoints):
                    vals = sq[label][t]
                    rows.append({
                        "model": plan.model, "n": n, "p": p, "eta0": plan.eta0,
                        "scheme": label, "checkpoint_pass": f, "T_n": t,
                        "replications": len(vals), "diverged": diverged[label],
                        "mse": mse_from_sq_errors(vals, d),
                        "var_trace": variance_trace(kept[label][t]),
                    })
            if gd_sq:
                for f, t in zip(plan.passes_checkpoints, checkpoints):
                    rows.append({
                        "model": plan.model, "n": n, "p": p, "eta0": plan.eta0,
                        "scheme": "gd", "checkpoint_pass": f, "T_n": t,
                        "replications": len(gd_sq), "diverged": 0,
                        "mse": mse_from_sq_errors(gd_sq, d),
                        "var_trace": variance_trace(gd_kept),
                    })
    if out_csv:
        write_csv(out_csv, MSE_COLUMNS, rows)
        write_manifest(Path(out_csv).with_suffix(".manifest.json"), plan.__dict__, plan.base_seed)
    if timings_csv:
        cols = ["scheme", "n", "p", "replication", "seconds",
                "sampling_seconds", "approximation_seconds", "update_seconds"]
        write_csv(timings_csv, cols, [dict(zip(cols, t)) for t in timings])
    return rows


def run_coverage_experiment(plan: ExperimentPlan, regime="R3", out_csv=None):
    """Empirical per-parameter coverage of Wald intervals built from the
    regime covariance at each checkpoint. `regime` may be a single label or a
    tuple of labels evaluated from the same fits."""
    regimes = (regime,) if isinstance(regime, str) else tuple(regime)
    rows = []
    for n in plan.n_list:
        for p in plan.p_list:
            model = make_model(plan.model, p)
            d = model.dim
            checkpoints = [int(round(f * n)) for f in plan.passes_checkpoints]
            covered = {
                (label, rg, t): np.zeros(d)
                for label in plan.schemes for rg in regimes for t in checkpoints
            }
            used = {label: 0 for label in plan.schemes}
            diverged = {label: 0 for label in plan.schemes}
            for rep in range(plan.replications):
                snaps, _, truth, model, data = _replication_fits(plan, n, p, rep, checkpoints)
                for label, snap in snaps.items():
                    if snap is None:
                        diverged[label] += 1
                        continue
                    used[label] += 1
                    mom = moments(parse_scheme(label, n, model.n_components))
                    for t in checkpoints:
                        H, J = estimate_H_J(model, snap[t], data)
                        V = v_p(mom, H, J, n)
                        for rg in regimes:
                            cov = cov_theta_bar(H, J, V, rg, t, n)
                            ci = confidence_intervals(snap[t], cov, plan.level)
                            hit = (ci[:, 0] <= truth) & (truth <= ci[:, 1])
                            covered[(label, rg, t)] += hit
            for label in plan.schemes:
                for rg in regimes:
                    for f, t in zip(plan.passes_checkpoints, checkpoints):
                        for j in range(d):
                            cnt = covered[(label, rg, t)][j]
                            rows.append({
                                "model": plan.model, "n": n, "p": p, "eta0": plan.eta0,
                                "scheme": label, "regime": rg, "checkpoint_pass": f,
                                "T_n": t, "param_index": j,
                                "param_name": model.param_names[j],
                                "replications": used[label], "diverged": diverged[label],
                                "covered": int(cnt),
                                "coverage": cnt / used[label] if used[label] else float("nan"),
                            })
    if out_csv:
        write_csv(out_csv, COVERAGE_COLUMNS, rows)
        write_manifest(Path(out_csv).with_suffix(".manifest.json"), plan.__dict__, plan.base_seed)
    return rows


def tune_eta0(
    model,
    data,
    scheme_label,
    eta0_init,
    seed,
    passes=1.0,
    burn_in_frac=0.25,
    improve_tol=0.0,
    max_halvings=10,
    c_exponent=0.501,
):
    """Halve an initial stepsize proposal until the holdout criterion stops
    improving; return the best stepsize seen (ties prefer the larger step).

    The criterion is the holdout negative composite log-likelihood of the
    averaged estimate after `passes` passes. Diverging candidates are skipped;
    if every candidate diverges a TuningError is raised.
    """
    if data.holdout_mask is None:
        raise ValueError("stepsize tuning needs a dataset with a holdout split")
    from .models.base import holdout_negative_loglik

    n = data.n_fit
    scheme = parse_scheme(scheme_label, n, model.n_components)
    T = int(round(passes * n))

    def chain():
        for k in range(max_halvings + 1):
            eta = eta0_init / 2.0**k
            config = OptimizerConfig(
                eta0=eta, max_iters=T, burn_in=int(burn_in_frac * n), c_exponent=c_exponent
            )
            try:
                res = fit(model, data, scheme, config, rng=_key_rng(seed, k))
            except (DivergenceError, NumericDomainError):
                yield eta, None
                continue
            yield eta, holdout_negative_loglik(model, res.theta_bar, data)

    return select_from_halving_chain(chain(), improve_tol)


def block_grid_truth(p, block_p) -> IsingParams:
    """Block-diagonal Ising truth: independent two-row-grid blocks.

    Cross-block edges are exactly zero, giving a sparse known graph whose
    null edges feed the familywise-error oracle.
    """
    if p % block_p != 0:
        raise ValueError("p must be a multiple of block_p")
    blocks = p // block_p
    base = grid_truth(block_p)
    b = np.tile(base.intercepts, blocks)
    w = np.zeros((p, p))
    for bi in range(blocks):
        sl = slice(bi * block_p, (bi + 1) * block_p)
        w[sl, sl] = base.edges
    return IsingParams(b, w)


def simulate_block_ising(p, block_p, n, rng) -> Dataset:
    """Exact sampling from the block truth, one enumerable block at a time."""
    blocks = p // block_p
    base = grid_truth(block_p)
    parts = [exact_sample(base, n, rng).rows for _ in range(blocks)]
    return Dataset(np.hstack(parts), "binary")


@dataclass
class SurveyRunResult:
    eta0: float
    stopped_at: int
    theta_bar: np.ndarray
    tests: list
    edge_rows: list = field(default_factory=list)
    significant_edge_fraction: float = 0.0


def run_nesarc_style(
    out_csv=None,
    p=32,
    block_p=16,
    n_total=31826,
    holdout_frac=0.1,
    recycle=1000,
    eta0=None,
    eta0_init=16.0,
    alpha=0.01,
    base_seed=2026,
    max_passes=3.0,
):
    """Synthetic large-survey pipeline on a known sparse graph: simulate,
    split a holdout, tune the stepsize by halving (unless eta0 is given), fit
    with recycled hypergeometric sampling and holdout early stopping, then run
    compound-regime inference with Holm control at `alpha` and emit the edge
    report."""
    rng = _key_rng(base_seed, 0)
    data = simulate_block_ising(p, block_p, n_total, rng).with_holdout_fraction(
        holdout_frac, _key_rng(base_seed, 1)
    )
    model = IsingModel(p)
    n = data.n_fit
    label = f"recycle_hyper:{min(recycle, n)}"
    if eta0 is None:
        eta0 = tune_eta0(model, data, label, eta0_init, seed=base_seed + 2)
    period = max(1, int(round(0.25 * n)))
    config = OptimizerConfig(
        eta0=eta0,
        max_iters=int(round(max_passes * n)),
        burn_in=int(0.25 * n),
        holdout_check=(period, 0.001),
    )
    res = fit(model, data, parse_scheme(label, n, model.n_components), config,
              rng=_key_rng(base_seed, 3))
    mom = moments(parse_scheme(label, n, model.n_components))
    H, J = estimate_H_J(model, res.theta_bar, data)
    V = v_p(mom, H, J, n)
    cov = cov_theta_bar(H, J, V, "R3", res.iterations_run, n)
    tests = wald_tests(res.theta_bar, cov, level=1.0 - alpha)
    iu = np.triu_indices(p, k=1)
    rows = []
    n_edges = sig_edges = 0
    for j, t in enumerate(tests):
        is_edge = j >= p
        if is_edge:
            a, b = int(iu[0][j - p]) + 1, int(iu[1][j - p]) + 1
            n_edges += 1
            sig_edges += int(t.reject)
        else:
            a = b = j + 1
        rows.append({
            "param_index": j, "name": model.param_names[j],
            "kind": "edge" if is_edge else "intercept",
            "node_a": a, "node_b": b, "estimate": t.estimate,
            "std_error": t.std_error, "z": t.z, "p_value": t.p_value,
            "p_holm": t.p_adjusted, "significant": int(t.reject),
        })
    result = SurveyRunResult(
        eta0=eta0,
        stopped_at=res.iterations_run,
        theta_bar=res.theta_bar,
        tests=tests,
        edge_rows=rows,
        significant_edge_fraction=sig_edges / n_edges,
    )
    if out_csv:
        write_csv(out_csv, EDGE_COLUMNS, rows)
        write_manifest(
            Path(out_csv).with_suffix(".manifest.json"),
            {
                "p": p, "block_p": block_p, "n_total": n_total,
                "holdout_frac": holdout_frac, "recycle": recycle, "eta0": eta0,
                "alpha": alpha, "stopped_at": res.iterations_run,
                "significant_edge_fraction": result.significant_edge_fraction,
            },
            base_seed,
        )
    return result
