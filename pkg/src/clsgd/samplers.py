"""Sampling schemes for the random weight matrix selecting (observation,
component) cells at each stochastic-gradient iteration.

Three schemes are provided, all with marginal cell-inclusion probability
gamma1 = 1/n so their per-iteration cost matches:

  standard    one observation uniformly at random, all K of its components;
  bernoulli   every cell independently with probability 1/n (random size);
  hyper       exactly K cells drawn without replacement from the n*K grid.

Recycled variants amortize the sampling cost: one scramble serves a window of
l consecutive iterations (not available for bernoulli, whose selection size
is random).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedSchemeError

KINDS = ("standard", "bernoulli", "hyper")


@dataclass(frozen=True)
class SchemeSpec:
    """Which scheme generates the weights, for an n x K component grid."""

    kind: str
    n: int
    K: int
    recycle_window: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1 or self.K < 1:
            raise ValueError("need n >= 1 and K >= 1")
        if self.recycle_window is not None:
            if self.kind == "bernoulli":
                raise UnsupportedSchemeError(
                    "recycling is not possible for the bernoulli scheme: the "
                    "number of components drawn per iteration is not deterministic"
                )
            if not 1 <= self.recycle_window <= self.n:
                raise ValueError("recycle window must satisfy 1 <= l <= n")

    @property
    def gamma1(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True)
class SchemeMoments:
    """Inclusion moments of the weight matrix.

    gamma1 = P(w_ik = 1); gamma2 = E[w_ik w_jk] for i != j (same component,
    different observations); gamma3 = E[w_ik w_ih] for k != h (same
    observation, different components).
    """

    gamma1: float
    gamma2: float
    gamma3: float

    def __post_init__(self):
        if not 0.0 <= self.gamma3 <= self.gamma1 <= 1.0:
            raise ValueError("moments must satisfy 0 <= gamma3 <= gamma1 <= 1")


@dataclass(frozen=True)
class ComponentSelection:
    """Realized draw: parallel arrays of observation and component indices."""

    obs: np.ndarray
    comps: np.ndarray
    iteration: int = 0

    @property
    def pairs(self):
        return list(zip(self.obs.tolist(), self.comps.tolist()))

    def __len__(self):
        return len(self.obs)


def moments(spec: SchemeSpec) -> SchemeMoments:
    """Closed-form gamma1, gamma2, gamma3 for the three schemes."""
    n, K = spec.n, spec.K
    if n < 2 or K < 2:
        raise ValueError("moments need n >= 2 and K >= 2")
    g1 = 1.0 / n
    if spec.kind == "standard":
        return SchemeMoments(g1, 0.0, 1.0 / n)
    if spec.kind == "bernoulli":
        return SchemeMoments(g1, 1.0 / n**2, 1.0 / n**2)
    g = (1.0 / n**2) * (1.0 - (n - 1.0) / (n * K - 1.0))
    return SchemeMoments(g1, g, g)


def _distinct_cells(rng, total, m) -> np.ndarray:
    """m distinct integers uniform over range(total), order-insensitive."""
    if m >= total:
        return np.arange(total)
    if 4 * m >= total:
        return rng.permutation(total)[:m]
    # rejection by uniqueness: first-occurrence order keeps the subset uniform
    extra = 16
    while True:
        draws = rng.integers(0, total, size=m + m // 4 + extra)
        uniq, first = np.unique(draws, return_index=True)
        if len(uniq) >= m:
            return uniq[np.argsort(first)][:m]
        extra *= 2


def draw(spec: SchemeSpec, rng, iteration=0) -> ComponentSelection:
    """One fresh draw of the weight matrix, as a sparse cell selection."""
    n, K = spec.n, spec.K
    if spec.kind == "standard":
        i = int(rng.integers(n))
        return ComponentSelection(np.full(K, i), np.arange(K), iteration)
    if spec.kind == "bernoulli":
        size = int(rng.binomial(n * K, 1.0 / n))
        cells = _distinct_cells(rng, n * K, size)
        return ComponentSelection(cells // K, cells % K, iteration)
    cells = _distinct_cells(rng, n * K, K)
    return ComponentSelection(cells // K, cells % K, iteration)


class RecycleBuffer:
    """Holds the current scramble and cursor for a recycled sampling window."""

    def __init__(self):
        self.perm = None
        self.pos = 0


def draw_recycled(spec: SchemeSpec, rng, buffer: RecycleBuffer, iteration=0) -> ComponentSelection:
    """Next selection from the recycled window, rescrambling every l calls.

    standard: one scramble of (0..n-1); the window's calls use its first l
    entries as the selected observations. hyper: one scramble of the n*K cell
    grid; call m takes the m-th K-block.
    """
    if spec.kind == "bernoulli":
        raise UnsupportedSchemeError("bernoulli selections cannot be recycled")
    if spec.recycle_window is None:
        raise ValueError("scheme has no recycle window configured")
    n, K, l = spec.n, spec.K, spec.recycle_window
    if buffer.perm is None or buffer.pos >= l:
        buffer.perm = rng.permutation(n if spec.kind == "standard" else n * K)
        buffer.pos = 0
    m = buffer.pos
    buffer.pos += 1
    if spec.kind == "standard":
        i = int(buffer.perm[m])
        return ComponentSelection(np.full(K, i), np.arange(K), iteration)
    cells = buffer.perm[m * K:(m + 1) * K]
    return ComponentSelection(cells // K, cells % K, iteration)


def make_sampler(spec: SchemeSpec, rng):
    """Callable () -> ComponentSelection honoring the spec's recycle setting."""
    counter = {"t": 0}
    if spec.recycle_window is None:

        def sample():
            counter["t"] += 1
            return draw(spec, rng, counter["t"])

    else:
        buffer = RecycleBuffer()

        def sample():
            counter["t"] += 1
            return draw_recycled(spec, rng, buffer, counter["t"])

    return sample


def replication_rng(seed, replication=0, stream=0) -> np.random.Generator:
    """Counter-based (Philox) generator for one replication's stream.

    Distinct (seed, replication, stream) triples give independent streams, so
    replications can run in parallel while staying bit-reproducible.
    """
    ss = np.random.SeedSequence([int(seed), int(replication), int(stream)])
    return np.random.Generator(np.random.Philox(ss))
