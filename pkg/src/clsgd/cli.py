"""Command-line entry points.

Subcommands: simulate-ising, simulate-frailty, fit, infer, and
experiment {mse, coverage, tune, nesarc}. Fit/infer options may come from a
JSON config file (--config) whose keys mirror the flags: eta0, c,
burn_in_frac, passes, scheme, recycle, seed, record_every,
holdout_period_frac, holdout_rel_tol.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_csv, save_csv
from .experiments import (
    ExperimentPlan,
    make_model,
    parse_scheme,
    run_coverage_experiment,
    run_mse_experiment,
    run_nesarc_style,
    tune_eta0,
    write_csv,
)
from .gd import GDConfig, gd_fit
from .inference import sandwich, wald_tests, confidence_intervals
from .models.frailty import FrailtyParams, frailty_truth, simulate_frailty
from .models.ising import exact_sample, grid_truth
from .samplers import moments
from .sgd import OptimizerConfig, fit as sgd_fit

FIT_CONFIG_KEYS = (
    "eta0", "c", "burn_in_frac", "passes", "scheme", "recycle", "seed",
    "record_every", "holdout_period_frac", "holdout_rel_tol",
)


def _write_theta_csv(path, names, theta):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["param_index", "name", "estimate"])
        for j, (name, value) in enumerate(zip(names, theta)):
            writer.writerow([j, name, format(float(value), ".17g")])


def _read_theta_csv(path):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        rows = sorted(reader, key=lambda r: int(r["param_index"]))
    return np.array([float(r["estimate"]) for r in rows])


def _load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
        unknown = set(cfg) - set(FIT_CONFIG_KEYS)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    for key in FIT_CONFIG_KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def cmd_simulate_ising(args):
    params = grid_truth(args.p)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed])))
    data = exact_sample(params, args.n, rng)
    save_csv(data, args.out)
    if args.truth_out:
        from .models.ising import IsingModel

        _write_theta_csv(args.truth_out, IsingModel(args.p).param_names, params.to_flat())
    print(f"wrote {args.n} x {args.p} binary rows to {args.out}")


def cmd_simulate_frailty(args):
    params = FrailtyParams(frailty_truth(args.p).lambdas, args.xi, args.rho)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed])))
    data = simulate_frailty(params, args.n, rng)
    save_csv(data, args.out)
    if args.truth_out:
        from .models.frailty import GammaFrailtyModel

        _write_theta_csv(
            args.truth_out, GammaFrailtyModel(args.p).param_names, params.to_unconstrained()
        )
    print(f"wrote {args.n} x {args.p} count rows to {args.out}")


def _scheme_label(cfg):
    label = cfg.get("scheme", "hyper")
    recycle = cfg.get("recycle")
    if recycle:
        label = f"recycle_{label}:{int(recycle)}"
    return label


def cmd_fit(args):
    cfg = _load_config(args)
    data = load_csv(args.data, kind=args.kind)
    if cfg.get("holdout_period_frac"):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.get("seed", 0)), 99])))
        data = data.with_holdout_fraction(args.holdout_frac, rng)
    model = make_model(args.model, data.p)
    if args.optimizer == "gd":
        res = gd_fit(model, data, GDConfig())
        _write_theta_csv(args.out, model.param_names, res.theta)
        print(f"gd: {res.iterations} iterations, grad gauge {res.grad_norm:.3e}, "
              f"converged={res.converged}")
        return
    n = data.n_fit
    holdout = None
    if cfg.get("holdout_period_frac"):
        holdout = (
            max(1, int(round(float(cfg["holdout_period_frac"]) * n))),
            float(cfg.get("holdout_rel_tol", 0.001)),
        )
    config = OptimizerConfig(
        eta0=float(cfg.get("eta0", 1.0)),
        max_iters=int(round(float(cfg.get("passes", 3.0)) * n)),
        burn_in=int(float(cfg.get("burn_in_frac", 0.25)) * n),
        c_exponent=float(cfg.get("c", 0.501)),
        record_every=cfg.get("record_every"),
        holdout_check=holdout,
    )
    label = _scheme_label(cfg)
    res = sgd_fit(
        model, data, parse_scheme(label, n, model.n_components), config,
        seed=int(cfg.get("seed", 0)),
    )
    _write_theta_csv(args.out, model.param_names, res.theta_bar)
    print(f"sgd ({label}): ran {res.iterations_run} iterations; wrote {args.out}")


def cmd_infer(args):
    data = load_csv(args.data, kind=args.kind)
    model = make_model(args.model, data.p)
    theta = _read_theta_csv(args.theta)
    label = _scheme_label({"scheme": args.scheme, "recycle": args.recycle})
    mom = moments(parse_scheme(label, data.n_fit, model.n_components))
    est = sandwich(model, theta, data, mom, T_n=args.tn, regime=args.regime)
    tests = wald_tests(theta, est.cov_theta_bar, level=args.level)
    ci = confidence_intervals(theta, est.cov_theta_bar, level=args.level)
    rows = []
    for j, t in enumerate(tests):
        rows.append({
            "param_index": j, "name": model.param_names[j], "estimate": t.estimate,
            "std_error": t.std_error, "z": t.z, "p_value": t.p_value,
            "p_holm": t.p_adjusted, "ci_low": float(ci[j, 0]), "ci_high": float(ci[j, 1]),
            "regime": args.regime,
        })
    write_csv(args.out, ["param_index", "name", "estimate", "std_error", "z",
                         "p_value", "p_holm", "ci_low", "ci_high", "regime"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")


def _plan_from_json(path):
    cfg = json.loads(Path(path).read_text())
    cfg["n_list"] = tuple(cfg["n_list"])
    cfg["p_list"] = tuple(cfg["p_list"])
    cfg["schemes"] = tuple(cfg["schemes"])
    if "passes_checkpoints" in cfg:
        cfg["passes_checkpoints"] = tuple(cfg["passes_checkpoints"])
    return ExperimentPlan(**cfg)


def cmd_experiment(args):
    if args.what == "mse":
        plan = _plan_from_json(args.config)
        run_mse_experiment(plan, out_csv=args.out, timings_csv=args.timings)
        print(f"wrote {args.out}")
    elif args.what == "coverage":
        plan = _plan_from_json(args.config)
        run_coverage_experiment(plan, regime=tuple(args.regimes), out_csv=args.out)
        print(f"wrote {args.out}")
    elif args.what == "tune":
        cfg = json.loads(Path(args.config).read_text())
        data = load_csv(cfg["data"], kind=cfg.get("kind"))
        if data.holdout_mask is None:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.get("seed", 0)), 99])))
            data = data.with_holdout_fraction(cfg.get("holdout_frac", 0.1), rng)
        model = make_model(cfg["model"], data.p)
        eta0 = tune_eta0(
            model, data, cfg.get("scheme", "hyper"), cfg.get("eta0_init", 16.0),
            seed=int(cfg.get("seed", 0)),
        )
        print(f"selected eta0 = {eta0}")
    else:
        res = run_nesarc_style(
            out_csv=args.out,
            p=args.p,
            n_total=args.n,
            recycle=args.recycle,
            base_seed=args.seed,
        )
        print(
            f"eta0={res.eta0}; stopped at T_n={res.stopped_at}; "
            f"{100 * res.significant_edge_fraction:.1f}% of edges significant; wrote {args.out}"
        )


def build_parser():
    parser = argparse.ArgumentParser(prog="clsgd", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-ising", help="sample the two-row-grid Ising truth")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth-out")
    s.set_defaults(func=cmd_simulate_ising)

    s = sub.add_parser("simulate-frailty", help="sample the correlated-count truth")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--xi", type=float, default=0.25)
    s.add_argument("--rho", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth-out")
    s.set_defaults(func=cmd_simulate_frailty)

    s = sub.add_parser("fit", help="fit by averaged SGD or the GD baseline")
    s.add_argument("--data", required=True)
    s.add_argument("--kind", choices=["binary", "count"])
    s.add_argument("--model", choices=["ising", "frailty"], required=True)
    s.add_argument("--optimizer", choices=["sgd", "gd"], default="sgd")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--scheme", choices=["standard", "bernoulli", "hyper"])
    s.add_argument("--recycle", type=int)
    s.add_argument("--eta0", type=float)
    s.add_argument("--c", type=float)
    s.add_argument("--passes", type=float)
    s.add_argument("--burn-in-frac", type=float, dest="burn_in_frac")
    s.add_argument("--seed", type=int)
    s.add_argument("--record-every", type=int, dest="record_every")
    s.add_argument("--holdout-period-frac", type=float, dest="holdout_period_frac")
    s.add_argument("--holdout-rel-tol", type=float, dest="holdout_rel_tol")
    s.add_argument("--holdout-frac", type=float, default=0.1)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("infer", help="sandwich inference at a fitted estimate")
    s.add_argument("--data", required=True)
    s.add_argument("--kind", choices=["binary", "count"])
    s.add_argument("--model", choices=["ising", "frailty"], required=True)
    s.add_argument("--theta", required=True, help="CSV written by `clsgd fit`")
    s.add_argument("--scheme", choices=["standard", "bernoulli", "hyper"], default="hyper")
    s.add_argument("--recycle", type=int)
    s.add_argument("--tn", type=int, required=True, help="iterations the fit ran")
    s.add_argument("--regime", choices=["R1", "R2", "R3"], default="R3")
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("experiment", help="replication studies and the survey pipeline")
    s.add_argument("what", choices=["mse", "coverage", "tune", "nesarc"])
    s.add_argument("--config", help="JSON plan (mse/coverage/tune)")
    s.add_argument("--out", help="results CSV")
    s.add_argument("--timings", help="optional wall-clock CSV (non-deterministic)")
    s.add_argument("--regimes", nargs="+", default=["R1", "R2", "R3"])
    s.add_argument("--p", type=int, default=32)
    s.add_argument("--n", type=int, default=31826)
    s.add_argument("--recycle", type=int, default=1000)
    s.add_argument("--seed", type=int, default=2026)
    s.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
