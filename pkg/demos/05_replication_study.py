"""A miniature replication study: MSE trajectories and interval coverage.

Runs the experiment harness at toy scale (the full desk-scale protocols live
in the acceptance tests, the paper-scale plans in configs/). Results land in
deterministic CSVs next to this script.
"""

from pathlib import Path

import numpy as np

from clsgd.experiments import ExperimentPlan, run_coverage_experiment, run_mse_experiment

out = Path(__file__).parent / "output"
plan = ExperimentPlan(
    model="ising",
    n_list=(400,),
    p_list=(4,),
    schemes=("standard", "hyper", "recycle_hyper:50"),
    eta0=1.0,
    passes_checkpoints=(0.5, 1.0, 2.0, 3.0),
    replications=20,
    base_seed=9,
)

rows = run_mse_experiment(plan, out_csv=out / "mse.csv")
print(f"wrote {out / 'mse.csv'}")
print("\nMSE by scheme and stopping time (gd = deterministic baseline):")
schemes = sorted({r["scheme"] for r in rows})
for scheme in schemes:
    series = [r for r in rows if r["scheme"] == scheme]
    vals = " ".join(f"{r['mse']:.5f}" for r in sorted(series, key=lambda r: r["T_n"]))
    print(f"  {scheme:>16}: {vals}")

cov_rows = run_coverage_experiment(plan, regime=("R2", "R3"), out_csv=out / "coverage.csv")
print(f"\nwrote {out / 'coverage.csv'}")
for regime in ("R2", "R3"):
    for f in (1.0, 3.0):
        sel = [r["coverage"] for r in cov_rows
               if r["regime"] == regime and r["checkpoint_pass"] == f
               and r["scheme"] == "hyper"]
        print(f"  hyper, regime {regime}, T_n = {f}n: median coverage "
              f"{np.median(sel):.2f} (nominal 0.95)")
