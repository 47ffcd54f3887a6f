import itertools

import numpy as np
import pytest

from clsgd import (
    RecycleBuffer,
    SchemeMoments,
    SchemeSpec,
    UnsupportedSchemeError,
    draw,
    draw_recycled,
    make_sampler,
    moments,
    replication_rng,
)


# ---------------------------------------------------------------- specs


def test_spec_validation():
    with pytest.raises(UnsupportedSchemeError):
        SchemeSpec("bernoulli", n=10, K=3, recycle_window=5)
    with pytest.raises(ValueError):
        SchemeSpec("hyper", n=10, K=3, recycle_window=11)
    with pytest.raises(ValueError):
        SchemeSpec("uniform", n=10, K=3)
    assert SchemeSpec("standard", n=10, K=3).gamma1 == 0.1


def test_moments_closed_forms():
    assert moments(SchemeSpec("standard", 100, 5)) == SchemeMoments(0.01, 0.0, 0.01)
    assert moments(SchemeSpec("bernoulli", 100, 5)) == SchemeMoments(0.01, 0.0001, 0.0001)
    m = moments(SchemeSpec("hyper", 10, 5))
    assert m.gamma1 == 0.1
    assert m.gamma3 == pytest.approx((1 / 100) * (1 - 9 / 49), abs=1e-15)
    assert m.gamma2 == m.gamma3


def test_moments_invariant_bounds():
    for kind in ("standard", "bernoulli", "hyper"):
        for n in (2, 5, 50):
            for K in (2, 7):
                m = moments(SchemeSpec(kind, n, K))
                assert 0.0 <= m.gamma3 <= m.gamma1 <= 1.0
                assert m.gamma1 == 1.0 / n


def test_moments_exhaustive_enumeration_n2_K2():
    """All selections at n = K = 2 enumerated by hand match moments()."""
    # standard: two equally likely rows
    m = moments(SchemeSpec("standard", 2, 2))
    assert (m.gamma1, m.gamma2, m.gamma3) == (0.5, 0.0, 0.5)
    # bernoulli: cells i.i.d. with p = 1/2
    m = moments(SchemeSpec("bernoulli", 2, 2))
    assert (m.gamma1, m.gamma2, m.gamma3) == (0.5, 0.25, 0.25)
    # hyper: all C(4,2)=6 cell pairs equally likely
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    pairs = list(itertools.combinations(range(4), 2))
    gamma1 = np.mean([0 in s for s in pairs])
    gamma3 = np.mean([(0 in s) and (1 in s) for s in pairs])   # same obs, comps 0 and 1
    gamma2 = np.mean([(0 in s) and (2 in s) for s in pairs])   # same comp, obs 0 and 1
    m = moments(SchemeSpec("hyper", 2, 2))
    assert m.gamma1 == pytest.approx(gamma1)
    assert m.gamma3 == pytest.approx(gamma3)
    assert m.gamma2 == pytest.approx(gamma2)
    assert cells[0][0] == 0  # layout sanity: cell index c -> (c // K, c % K)


# ---------------------------------------------------------------- draws


def test_standard_forced_outcome(rng):
    spec = SchemeSpec("standard", n=1, K=4)
    for _ in range(10):
        sel = draw(spec, rng)
        assert np.array_equal(sel.obs, np.zeros(4, dtype=int))
        assert np.array_equal(sel.comps, np.arange(4))


def test_standard_covers_components_once(rng):
    spec = SchemeSpec("standard", n=7, K=5)
    for _ in range(50):
        sel = draw(spec, rng)
        assert len(set(sel.obs.tolist())) == 1
        assert sorted(sel.comps.tolist()) == list(range(5))


def test_hyper_no_duplicates(rng):
    spec = SchemeSpec("hyper", n=6, K=4)
    for _ in range(300):
        sel = draw(spec, rng)
        cells = sel.obs * spec.K + sel.comps
        assert len(np.unique(cells)) == spec.K


def test_hyper_marginals(rng):
    spec = SchemeSpec("hyper", n=3, K=2)
    hits = np.zeros((3, 2))
    reps = 2 * 10**5
    for _ in range(reps):
        sel = draw(spec, rng)
        hits[sel.obs, sel.comps] += 1
    freq = hits / reps
    se = np.sqrt((1 / 3) * (2 / 3) / reps)
    assert np.all(np.abs(freq - 1 / 3) < 4 * se)


def test_bernoulli_mean_size(rng):
    spec = SchemeSpec("bernoulli", n=4, K=5)
    reps = 2 * 10**5
    sizes = np.array([len(draw(spec, rng)) for _ in range(reps)])
    se = np.sqrt(20 * 0.25 * 0.75 / reps)
    assert abs(sizes.mean() - 5.0) < 4 * se


def test_bernoulli_n1_selects_everything(rng):
    sel = draw(SchemeSpec("bernoulli", n=1, K=3), rng)
    assert len(sel) == 3


# ---------------------------------------------------------------- recycling


def test_recycle_window_one_matches_draw_marginals(rng):
    spec = SchemeSpec("hyper", n=4, K=2, recycle_window=1)
    buffer = RecycleBuffer()
    hits = np.zeros((4, 2))
    reps = 10**5
    for _ in range(reps):
        sel = draw_recycled(spec, rng, buffer)
        hits[sel.obs, sel.comps] += 1
    se = np.sqrt(0.25 * 0.75 / reps)
    assert np.all(np.abs(hits / reps - 0.25) < 4 * se)


def test_recycled_hyper_blocks_disjoint(rng):
    spec = SchemeSpec("hyper", n=2, K=2, recycle_window=2)
    buffer = RecycleBuffer()
    a = draw_recycled(spec, rng, buffer)
    b = draw_recycled(spec, rng, buffer)
    cells_a = set((a.obs * 2 + a.comps).tolist())
    cells_b = set((b.obs * 2 + b.comps).tolist())
    assert not cells_a & cells_b
    assert cells_a | cells_b == {0, 1, 2, 3}


def test_recycled_hyper_enumeration_marginal():
    """Over all 4! scrambles of the 2x2 grid, each cell lands in either
    K-block with probability exactly 1/n = 1/2."""
    n = K = 2
    counts = np.zeros((2, n * K))  # block index x cell
    perms = list(itertools.permutations(range(n * K)))
    for perm in perms:
        for block in range(2):
            for cell in perm[block * K:(block + 1) * K]:
                counts[block, cell] += 1
    assert np.all(counts / len(perms) == 1 / n)


def test_recycled_standard_sequence(rng):
    spec = SchemeSpec("standard", n=6, K=3, recycle_window=4)
    buffer = RecycleBuffer()
    first_window = [draw_recycled(spec, rng, buffer).obs[0] for _ in range(4)]
    assert len(set(first_window)) == 4  # distinct entries of one scramble
    # window refresh happened; marginals stay uniform
    hits = np.zeros(6)
    reps = 6 * 10**4
    for _ in range(reps):
        hits[draw_recycled(spec, rng, buffer).obs[0]] += 1
    se = np.sqrt((1 / 6) * (5 / 6) / reps)
    assert np.all(np.abs(hits / reps - 1 / 6) < 5 * se)


def test_recycled_cross_window_independence(rng):
    """Selections in consecutive windows are uncorrelated."""
    spec = SchemeSpec("standard", n=4, K=2, recycle_window=1)
    buffer = RecycleBuffer()
    seq = np.array([draw_recycled(spec, rng, buffer).obs[0] for _ in range(10**5)])
    x = (seq[:-1] == 0).astype(float)
    y = (seq[1:] == 0).astype(float)
    corr = np.corrcoef(x, y)[0, 1]
    assert abs(corr) < 4 / np.sqrt(len(x))


def test_recycled_bernoulli_rejected(rng):
    spec = SchemeSpec("bernoulli", n=4, K=2)
    with pytest.raises(UnsupportedSchemeError):
        draw_recycled(spec, rng, RecycleBuffer())


def test_make_sampler_recycles(rng):
    spec = SchemeSpec("hyper", n=4, K=2, recycle_window=2)
    sample = make_sampler(spec, rng)
    a, b = sample(), sample()
    assert a.iteration == 1 and b.iteration == 2
    cells_a = set((a.obs * 2 + a.comps).tolist())
    cells_b = set((b.obs * 2 + b.comps).tolist())
    assert not cells_a & cells_b


def test_replication_rng_reproducible():
    a = replication_rng(11, 3).random(5)
    b = replication_rng(11, 3).random(5)
    c = replication_rng(11, 4).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
