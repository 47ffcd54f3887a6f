"""Acceptance gate: one test per criterion, each printing a PASS line.

The statistical criteria run at desk scale with fixed seeds; Monte Carlo
tolerances follow the stated oracle margins (multiples of the exact or
empirical standard errors).
"""

import itertools

import numpy as np
import pytest
from scipy.special import expit

from clsgd import (
    Dataset,
    FrailtyParams,
    GDConfig,
    GammaFrailtyModel,
    IsingModel,
    OptimizerConfig,
    SchemeSpec,
    cov_theta_bar,
    draw,
    estimate_H_J,
    exact_sample,
    fit,
    frailty_truth,
    full_grad,
    gd_fit,
    grid_truth,
    holm_adjust,
    moments,
    pair_loglik,
    pmf_table,
    simulate_frailty,
    stochastic_gradient,
    v_p,
)
from clsgd.experiments import ExperimentPlan, run_coverage_experiment, run_mse_experiment
from conftest import LinearGaussianModel, finite_difference_grad


def announce(num, name):
    print(f"\n[acceptance] criterion {num:>2} ({name}): PASS")


def all_states(p):
    return ((np.arange(2**p)[:, None] >> np.arange(p)) & 1).astype(np.int64)


# -------------------------------------------------------------------------
def test_criterion_01_gradient_correctness():
    """Analytic sub-gradients match central finite differences."""
    rng = np.random.default_rng(1001)
    ising = IsingModel(6)
    for _ in range(100):
        theta = rng.normal(0, 0.8, size=ising.dim)
        y = rng.integers(0, 2, size=6)
        j = int(rng.integers(6))
        g = ising.sub_grad(theta, y, j)
        fd = finite_difference_grad(lambda t: ising.sub_loglik(t, y, j), theta)
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(1.0, np.abs(fd)))
    frail = GammaFrailtyModel(4)
    big_count_cases = 0
    for i in range(100):
        theta = np.concatenate([
            rng.normal(0, 0.4, size=4),
            [rng.normal(-1.0, 0.5), rng.uniform(0.1, 1.0)],
        ])
        lam = 25.0 if i % 10 == 0 else 2.0   # exercise the counts > 20 branch
        y = rng.poisson(lam, size=4)
        k = int(rng.integers(frail.n_components))
        g = frail.sub_grad(theta, y, k)
        fd = finite_difference_grad(lambda t: frail.sub_loglik(t, y, k), theta)
        j1, j2 = frail.pair_left[k], frail.pair_right[k]
        tol = 1e-4 if max(y[j1], y[j2]) > 20 else 1e-5
        big_count_cases += int(max(y[j1], y[j2]) > 20)
        assert np.all(np.abs(g - fd) <= tol * np.maximum(1.0, np.abs(fd)))
    assert big_count_cases >= 5
    announce(1, "gradient correctness")


# -------------------------------------------------------------------------
def test_criterion_02_ising_exactness():
    rng = np.random.default_rng(1002)
    for p in (2, 3, 6, 10, 12):
        if p == 10:
            params = grid_truth(10)
        else:
            from test_ising import random_params

            params = random_params(rng, p)
        assert abs(pmf_table(params).sum() - 1.0) < 1e-12
    # conditional components equal Bayes conditionals from the exact pmf
    from test_ising import random_params

    for p in (2, 4, 6):
        params = random_params(rng, p)
        model = IsingModel(p)
        theta = params.to_flat()
        probs = pmf_table(params)
        states = all_states(p)
        codes = states @ (1 << np.arange(p))
        for j in range(p):
            flip = states.copy()
            flip[:, j] = 1 - flip[:, j]
            cond = probs[codes] / (probs[codes] + probs[flip @ (1 << np.arange(p))])
            for idx in range(2**p):
                assert abs(np.exp(model.sub_loglik(theta, states[idx], j)) - cond[idx]) < 1e-10
    announce(2, "Ising exactness")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_03_frailty_density():
    # (a) independence factorization at rho = 0
    from test_frailty import nb_logpmf

    y = np.arange(31)
    Y1, Y2 = np.meshgrid(y, y, indexing="ij")
    for xi in (0.25, 1.0):
        ll = pair_loglik(FrailtyParams([-0.25, 0.25], xi, 0.0), Y1, Y2)
        target = nb_logpmf(Y1, -0.25, xi) + nb_logpmf(Y2, 0.25, xi)
        assert np.max(np.abs(ll - target)) < 1e-8
    # (b) closed forms
    assert abs(np.exp(pair_loglik(FrailtyParams([0.0, 0.0], 1.0, 0.0), 0, 0)) - 0.25) < 1e-10
    assert abs(
        np.exp(pair_loglik(None, 0, 0, lambdas=[0.0, 0.0], xi=1.0, rho=1.0)) - 1.0 / 3.0
    ) < 1e-10
    # (c) simulator joint table vs the closed form at the study truth
    rng = np.random.default_rng(1003)
    params = frailty_truth(2)
    n = 10**6
    data = simulate_frailty(params, n, rng)
    grid = np.arange(11)
    G1, G2 = np.meshgrid(grid, grid, indexing="ij")
    model_p = np.exp(pair_loglik(params, G1, G2))
    counts = np.zeros((11, 11))
    inside = (data.rows[:, 0] <= 10) & (data.rows[:, 1] <= 10)
    np.add.at(counts, (data.rows[inside, 0], data.rows[inside, 1]), 1)
    freq = counts / n
    se = np.sqrt(model_p * (1 - model_p) / n)
    dev = np.abs(freq - model_p) / se
    assert dev.max() < 4.0, f"worst cell deviation {dev.max():.2f} SEs"
    announce(3, "frailty density correctness")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_04_stochastic_gradient_unbiased():
    rng = np.random.default_rng(1004)
    n, K = 50, 10
    model = LinearGaussianModel(d=3, K=K, seed=17)
    rows = rng.integers(0, 5, size=(n, K))
    data = Dataset(rows, "count")
    theta = rng.normal(size=model.dim)
    target = -full_grad(model, theta, data)
    reps = 10**5
    for kind in ("standard", "bernoulli", "hyper"):
        spec = SchemeSpec(kind, n=n, K=K)
        draws = np.empty((reps, model.dim))
        for r in range(reps):
            draws[r] = stochastic_gradient(model, theta, rows, draw(spec, rng), spec.gamma1)
        se = draws.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(draws.mean(axis=0) - target) <= 4 * se), kind
    announce(4, "stochastic-gradient unbiasedness")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_05_scheme_moments():
    rng = np.random.default_rng(1005)
    n, K = 4, 3
    reps = 10**6
    for kind in ("standard", "bernoulli", "hyper"):
        spec = SchemeSpec(kind, n=n, K=K)
        m = moments(spec)
        w00 = np.zeros(reps, dtype=bool)   # cell (0, 0)
        w01 = np.zeros(reps, dtype=bool)   # same obs, other comp
        w10 = np.zeros(reps, dtype=bool)   # other obs, same comp
        for r in range(reps):
            sel = draw(spec, rng)
            cells = sel.obs * K + sel.comps
            w00[r] = 0 in cells
            w01[r] = 1 in cells
            w10[r] = K in cells
        for name, emp, exact in [
            ("gamma1", w00.mean(), m.gamma1),
            ("gamma3", (w00 & w01).mean(), m.gamma3),
            ("gamma2", (w00 & w10).mean(), m.gamma2),
        ]:
            se = np.sqrt(max(exact * (1 - exact), 1e-12) / reps)
            assert abs(emp - exact) <= 4 * se + 1e-12, (kind, name, emp, exact)
    # hypergeometric closed form and the exhaustive n = K = 2 enumeration
    m = moments(SchemeSpec("hyper", 10, 5))
    assert m.gamma3 == pytest.approx((1 / 100) * (1 - 9 / 49), abs=1e-15)
    pairs = list(itertools.combinations(range(4), 2))
    m22 = moments(SchemeSpec("hyper", 2, 2))
    assert m22.gamma1 == np.mean([0 in s for s in pairs])
    assert m22.gamma3 == pytest.approx(np.mean([(0 in s) and (1 in s) for s in pairs]))
    assert m22.gamma2 == pytest.approx(np.mean([(0 in s) and (2 in s) for s in pairs]))
    announce(5, "scheme moments")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_06_bartlett_sandwich_consistency():
    rng = np.random.default_rng(1006)
    p = 4
    params = grid_truth(p)
    theta = params.to_flat()
    model = IsingModel(p)
    states = all_states(p)
    probs = pmf_table(params)
    d = model.dim
    # exact enumeration of H = sum_k E g_k g_k^T and J = E s s^T at theta*
    H_exact = np.zeros((d, d))
    J_exact = np.zeros((d, d))
    mean_score = np.zeros(d)
    H_hessian = np.zeros((d, d))
    b, w = theta[:p], params.edges
    for state, prob in zip(states, probs):
        s_vec = np.zeros(d)
        for j in range(p):
            g = model.sub_grad(theta, state, j)
            H_exact += prob * np.outer(g, g)
            s_vec += g
            # negative Hessian of the node conditional: sigma'(a) x x^T
            a = b[j] + w[j] @ state
            x = np.zeros(d)
            x[j] = 1.0
            x[model.edge_index[j][model.edge_index[j] < d]] = state[np.arange(p) != j]
            H_hessian += prob * expit(a) * (1 - expit(a)) * np.outer(x, x)
        J_exact += prob * np.outer(s_vec, s_vec)
        mean_score += prob * s_vec
    # the second Bartlett identity per component, verified by enumeration
    assert np.max(np.abs(H_exact - H_hessian)) < 1e-12
    assert np.max(np.abs(mean_score)) < 1e-12
    # sample estimators at theta* on n = 1e5 exact draws
    n = 10**5
    data = exact_sample(params, n, rng)
    rows = data.fit_rows()
    G = np.zeros((n, d, p))
    for k, cols, block in model.component_gradient_blocks(theta, rows):
        G[:, cols, k] = block
    contrib_H = np.einsum("nak,nbk->nab", G, G)
    scores = G.sum(axis=2)
    contrib_J = scores[:, :, None] * scores[:, None, :]
    for contrib, exact in ((contrib_H, H_exact), (contrib_J, J_exact)):
        est = contrib.mean(axis=0)
        se = contrib.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(est - exact) <= 4 * se + 1e-12)
    # K = 1 makes the two estimators identical
    fmodel = GammaFrailtyModel(2)
    fdata = simulate_frailty(frailty_truth(2), 500, rng)
    H1, J1 = estimate_H_J(fmodel, fmodel.flat(frailty_truth(2)), fdata)
    assert np.array_equal(H1, J1)
    announce(6, "Bartlett/sandwich consistency")


# -------------------------------------------------------------------------
def test_criterion_07_corollary_limits():
    rng = np.random.default_rng(1007)
    A = rng.normal(size=(3, 3))
    H = A @ A.T + np.eye(3)
    B = rng.normal(size=(3, 3))
    J = B @ B.T + np.eye(3)
    K = 6
    for kind, target in (("standard", J), ("bernoulli", H), ("hyper", H)):
        errs = [
            np.linalg.norm(v_p(moments(SchemeSpec(kind, n, K)), H, J, n) - target)
            for n in (100, 1000, 10000)
        ]
        for e_coarse, e_fine in zip(errs, errs[1:]):
            ratio = e_coarse / e_fine
            assert 5.0 <= ratio <= 20.0, (kind, ratio)   # ~10x per decade
    announce(7, "Corollary-1 reproduction")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_08_regime_coverage():
    plan = ExperimentPlan(
        model="ising", n_list=(2500,), p_list=(10,), schemes=("standard",),
        eta0=1.0, passes_checkpoints=(1.0, 2.0, 3.0), replications=200,
        base_seed=1008, include_gd_baseline=False,
    )
    rows = run_coverage_experiment(plan, regime=("R2", "R3"))
    by_key = {}
    for r in rows:
        by_key.setdefault((r["regime"], r["checkpoint_pass"]), []).append(r["coverage"])
    for f in (1.0, 2.0, 3.0):
        med = np.median(by_key[("R3", f)])
        assert 0.90 <= med <= 0.98, (f, med)
    assert np.median(by_key[("R2", 3.0)]) < np.median(by_key[("R3", 3.0)])
    announce(8, "Theorem-1 desk-scale coverage")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_09_efficiency_ordering():
    # Ising: hyper beats standard at 3n in >= 9 of 10 independent repetitions
    wins = 0
    first_mse = None
    for seed in range(10):
        plan = ExperimentPlan(
            model="ising", n_list=(2500,), p_list=(10,), schemes=("standard", "hyper"),
            eta0=1.0, passes_checkpoints=(0.5, 3.0), replications=50,
            base_seed=2000 + seed, include_gd_baseline=False,
        )
        rows = run_mse_experiment(plan)
        mse = {(r["scheme"], r["checkpoint_pass"]): r["mse"] for r in rows}
        wins += int(mse[("hyper", 3.0)] <= mse[("standard", 3.0)])
        if first_mse is None:
            first_mse = mse
    assert wins >= 9, f"ordering held in only {wins}/10 repetitions"
    # decreasing-MSE shape from the same runs (Figure-1 analogue)
    for scheme in ("standard", "hyper"):
        assert first_mse[(scheme, 3.0)] < first_mse[(scheme, 0.5)]
    # frailty: recycled hyper at T_n = n already beats recycled standard at 3n
    plan = ExperimentPlan(
        model="frailty", n_list=(2500,), p_list=(20,),
        schemes=("recycle_standard:500", "recycle_hyper:500"),
        eta0=2.0, passes_checkpoints=(1.0, 3.0), replications=30,
        base_seed=3000, include_gd_baseline=False,
    )
    rows = run_mse_experiment(plan)
    mse = {(r["scheme"], r["checkpoint_pass"]): r["mse"] for r in rows}
    assert mse[("recycle_hyper:500", 1.0)] < mse[("recycle_standard:500", 3.0)]
    announce(9, "efficiency ordering")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_10_baseline_agreement():
    rng = np.random.default_rng(1010)
    n, p = 2500, 10
    model = IsingModel(p)
    data = exact_sample(grid_truth(p), n, rng)
    gd = gd_fit(model, data, GDConfig(grad_tol=1e-8 / n))
    assert gd.converged
    raw_norm = np.max(np.abs(full_grad(model, gd.theta, data)))
    assert raw_norm < 1e-8
    T = 3 * n
    res = fit(
        model, data, SchemeSpec("hyper", n, p),
        OptimizerConfig(eta0=1.0, max_iters=T, burn_in=int(0.25 * n)), seed=55,
    )
    H, J = estimate_H_J(model, res.theta_bar, data)
    V = v_p(moments(SchemeSpec("hyper", n, p)), H, J, n)
    cov = cov_theta_bar(H, J, V, "R3", T, n)
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(res.theta_bar - gd.theta) <= 4 * se)
    announce(10, "baseline agreement")


# -------------------------------------------------------------------------
def test_criterion_11_holm_exactness():
    from test_inference import brute_force_holm

    rng = np.random.default_rng(1011)
    for _ in range(1000):
        m = int(rng.integers(1, 51))
        p = rng.random(m)
        assert np.array_equal(holm_adjust(p), np.asarray(brute_force_holm(p)))
    announce(11, "Holm correction")


# -------------------------------------------------------------------------
def test_criterion_12_reproducibility(tmp_path):
    plan = ExperimentPlan(
        model="ising", n_list=(200,), p_list=(4,), schemes=("standard", "hyper"),
        eta0=1.0, passes_checkpoints=(0.5, 1.0), replications=3, base_seed=1012,
    )
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_mse_experiment(plan, out_csv=a)
    run_mse_experiment(plan, out_csv=b)
    assert a.read_bytes() == b.read_bytes()
    c, d_ = tmp_path / "c.csv", tmp_path / "d.csv"
    run_coverage_experiment(plan, regime="R3", out_csv=c)
    run_coverage_experiment(plan, regime="R3", out_csv=d_)
    assert c.read_bytes() == d_.read_bytes()
    announce(12, "reproducibility")


# -------------------------------------------------------------------------
@pytest.mark.slow
def test_scheme_variance_trace_ordering():
    """Engine invariant: across-replication variance of the averaged estimate
    under the hypergeometric scheme never exceeds the standard scheme's
    (one-sided, with Monte Carlo slack)."""
    n, p, R = 1000, 4, 40
    model = IsingModel(p)
    checkpoints = [int(f * n) for f in (0.5, 1.0, 2.0, 3.0)]
    snaps = {kind: {t: [] for t in checkpoints} for kind in ("standard", "hyper")}
    from clsgd.experiments import _key_rng

    for rep in range(R):
        data = exact_sample(grid_truth(p), n, _key_rng(77, rep, 0))
        for s_idx, kind in enumerate(("standard", "hyper")):
            res = fit(
                model, data, SchemeSpec(kind, n, p),
                OptimizerConfig(eta0=1.0, max_iters=checkpoints[-1], burn_in=n // 4),
                rng=_key_rng(77, rep, 1 + s_idx), checkpoints=checkpoints,
            )
            for t in checkpoints:
                snaps[kind][t].append(res.snapshots[t])
    for t in checkpoints:
        tr_std = np.trace(np.cov(np.array(snaps["standard"][t]).T))
        tr_hyp = np.trace(np.cov(np.array(snaps["hyper"][t]).T))
        assert tr_hyp <= tr_std * 1.15, (t, tr_hyp, tr_std)
