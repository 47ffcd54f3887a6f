"""The three cell-sampling schemes and their inclusion moments.

Each iteration of the stochastic optimizer selects (observation, component)
cells through one of three schemes sharing the same marginal inclusion
probability 1/n. Their co-inclusion moments gamma2/gamma3 differ, and those
moments are exactly what drives the optimization-noise covariance.
"""

import numpy as np

from clsgd import SchemeSpec, draw, make_sampler, moments, replication_rng

n, K = 8, 4
rng = replication_rng(seed=2)

for kind in ("standard", "bernoulli", "hyper"):
    spec = SchemeSpec(kind, n, K)
    m = moments(spec)
    sel = draw(spec, rng)
    print(f"{kind:>9}: gamma1={m.gamma1:.4f} gamma2={m.gamma2:.4f} "
          f"gamma3={m.gamma3:.4f}  example draw size={len(sel)}")

# Empirical inclusion frequency of one cell matches gamma1 for every scheme.
reps = 20000
for kind in ("standard", "bernoulli", "hyper"):
    spec = SchemeSpec(kind, n, K)
    hits = 0
    for _ in range(reps):
        sel = draw(spec, rng)
        hits += int(np.any((sel.obs == 0) & (sel.comps == 0)))
    print(f"{kind:>9}: empirical P(cell selected) = {hits / reps:.4f} "
          f"(target {1 / n:.4f})")

# Recycling reuses one scramble across a window of iterations.
spec = SchemeSpec("hyper", n, K, recycle_window=3)
sampler = make_sampler(spec, replication_rng(seed=3))
print("\nrecycled hypergeometric, window of 3 (disjoint K-blocks per window):")
for t in range(6):
    sel = sampler()
    cells = np.sort(sel.obs * K + sel.comps)
    print(f"  iteration {sel.iteration}: cells {cells.tolist()}")
