import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infectwalk.randomness import (
    Purpose,
    RecuperationClock,
    StreamKey,
    next_jump,
    replica_seed,
    sample_poisson_field,
    thin_clock,
)


def test_poisson_field_mean():
    sites = [(x, y) for x in range(100) for y in range(100)]
    field = sample_poisson_field(sites, 1.0, seed=11)
    mean = sum(field.values()) / len(field)
    # sd of the mean is 0.01; the window is six of them
    assert 0.94 <= mean <= 1.06


def test_poisson_field_deterministic_and_empty():
    sites = [(x,) for x in range(-50, 50)]
    assert sample_poisson_field(sites, 2.5, 3) == sample_poisson_field(sites, 2.5, 3)
    assert sample_poisson_field([], 1.0, 3) == {}
    with pytest.raises(ValueError):
        sample_poisson_field(sites, 0.0, 3)


def test_poisson_field_depends_only_on_site():
    a = sample_poisson_field([(1, 2), (3, 4)], 4.0, 9)
    b = sample_poisson_field([(3, 4), (7, 7), (1, 2)], 4.0, 9)
    assert a[(1, 2)] == b[(1, 2)] and a[(3, 4)] == b[(3, 4)]


def test_jump_gap_mean_and_directions():
    n = 100_000
    gaps = np.empty(n)
    dirs = {}
    for c in range(n):
        t, step = next_jump(uid=12345, current_time=0.0, D=1.0, d=2, seed=7, counter=c)
        gaps[c] = t
        dirs[step] = dirs.get(step, 0) + 1
    assert 0.99 <= gaps.mean() <= 1.01
    assert len(dirs) == 4
    for v in dirs.values():
        assert abs(v / n - 0.25) <= 0.01


def test_jump_deterministic():
    assert next_jump(5, 1.0, 2.0, 3, 1, 4) == next_jump(5, 1.0, 2.0, 3, 1, 4)
    with pytest.raises(ValueError):
        next_jump(5, 1.0, 0.0, 3, 1, 4)


def test_purpose_separates_streams():
    a = StreamKey(1, 2, Purpose.WALK, 0).uniform()
    b = StreamKey(1, 2, Purpose.RECUPERATION, 0).uniform()
    assert a != b


def test_replica_seeds_distinct():
    seeds = {replica_seed(0, r) for r in range(1000)}
    assert len(seeds) == 1000


def test_thin_identity_and_zero():
    c = RecuperationClock(3, 99, 2.0)
    assert thin_clock(c, 2.0).ticks(0, 200) == c.ticks(0, 200)
    assert thin_clock(c, 0.0).ticks(0, 200) == []
    with pytest.raises(ValueError):
        thin_clock(c, 3.0)
    with pytest.raises(ValueError):
        RecuperationClock(3, 99, 1e-300, base=1.0)


def test_thin_half():
    c = RecuperationClock(5, 17, 2.0)
    full = c.ticks(0.0, 50_000.0)
    kept = thin_clock(c, 1.0).ticks(0.0, 50_000.0)
    assert len(full) > 90_000
    assert set(kept) <= set(full)
    assert abs(len(kept) / len(full) - 0.5) <= 0.02


def test_clock_gaps_exponential():
    ticks = RecuperationClock(1, 4, 0.5).ticks(0.0, 200_000.0)
    gaps = np.diff([0.0] + ticks)
    assert np.all(gaps > 0)
    # mean 2, sd of mean 2/sqrt(n)
    assert abs(gaps.mean() - 2.0) < 6 * 2.0 / math.sqrt(len(gaps))
    # memorylessness: P(gap > 2) ~ e^-1
    assert abs(np.mean(gaps > 2.0) - math.exp(-1)) < 0.01


rates = st.one_of(st.just(0.0), st.floats(1e-6, 5.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**40), st.integers(0, 2**40), rates, rates, st.floats(0.0, 50.0))
def test_nested_rates(seed, uid, a, b, t0):
    lo, hi = sorted((a, b))
    c_hi = RecuperationClock(seed, uid, hi, base=5.0)
    c_lo = RecuperationClock(seed, uid, lo, base=5.0)
    t_hi = c_hi.ticks(t0, t0 + 20.0)
    t_lo = c_lo.ticks(t0, t0 + 20.0)
    assert set(t_lo) <= set(t_hi)
    assert all(x < y for x, y in zip(t_hi, t_hi[1:]))
    first = c_lo.first_at_or_after(t0)
    assert first >= t0
    if t_lo:
        assert first == t_lo[0]
