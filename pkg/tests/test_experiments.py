import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infectwalk import experiments as ex
from infectwalk.engine import B, SimConfig, init_world, run_variant
from infectwalk.randomness import RecuperationClock


def wilson_by_hand(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@given(st.integers(1, 3000), st.data())
def test_wilson_matches_formula(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = ex.wilson_interval(k, n)
    rlo, rhi = wilson_by_hand(k, n)
    assert lo == pytest.approx(max(rlo, 0.0), abs=1e-9)
    assert hi == pytest.approx(min(rhi, 1.0), abs=1e-9)
    assert lo <= k / n <= hi


def test_no_recuperation_always_survives():
    est = ex.estimate_survival(SimConfig(d=2, mu_A=1.0, L=8, T=20.0, lam=0.0), 20)
    assert est.p_hat == 1.0 and est.mean_ext_time is None


def test_lone_particle_matches_clock():
    cfg = SimConfig(d=2, mu_A=0.0, L=4, T=5.0, lam=0.2, seed=3)
    est = ex.estimate_survival(cfg, 200)
    expected = []
    for r in range(200):
        c = replace(cfg, replica=r)
        uid = int(init_world(c).uid[0])
        expected.append(RecuperationClock(c.run_seed, uid, c.lam).first_at_or_after(0.0) > c.T)
    assert est.indicators.tolist() == expected
    dead = est.ext_times[~est.indicators]
    assert np.all(dead <= cfg.T)


def test_replica_determinism_and_workers(monkeypatch):
    cfg = SimConfig(d=1, mu_A=1.0, L=30, T=30.0, lam=0.8, seed=2)
    a = ex.estimate_survival(cfg, 24)
    b = ex.estimate_survival(cfg, 24)
    monkeypatch.setenv(ex.WORKERS_ENV, "2")
    c = ex.estimate_survival(cfg, 24)
    assert a.survivors == b.survivors == c.survivors
    assert np.array_equal(a.indicators, c.indicators)
    assert np.array_equal(np.nan_to_num(a.ext_times), np.nan_to_num(c.ext_times))


def test_replicas_must_be_positive():
    with pytest.raises(ValueError):
        ex.estimate_survival(SimConfig(), 0)


def test_extinction_is_absorbing():
    cfg = SimConfig(d=1, mu_A=1.0, L=20, T=30.0, lam=1.0)
    for r in range(10):
        _, log, s = run_variant(replace(cfg, replica=r))
        if s.extinction_time is None:
            continue
        for t in np.linspace(s.extinction_time, cfg.T, 5):
            _, types = log.replay(t)
            assert not np.any(types == B)


def test_degenerate_grid():
    br = ex.bracket_lambda_c(SimConfig(d=1, mu_A=1.0, L=10, T=10.0), [0.0], 10)
    assert br.low == 0.0 and br.high is None and br.resolution is None


def test_bracket_and_bisection():
    cfg = SimConfig(d=1, mu_A=1.0, L=30, T=30.0)
    grid = [0.0, 0.5, 1.0, 2.0, 4.0]
    br = ex.bracket_lambda_c(cfg, grid, 60, bisections=2)
    assert br.monotone_violations == 0
    assert br.low is not None and br.high is not None and br.low < br.high
    step = max(b - a for a, b in zip(grid, grid[1:]))
    assert br.resolution <= step
    assert len(br.curve) == len(grid) + 2
    p = [e.p_hat for e in br.curve]
    assert p == sorted(p, reverse=True)


def test_alarm_on_rising_curve():
    cfg = SimConfig()
    low = ex.aggregate(replace(cfg, lam=0.1), np.zeros(100, bool), np.zeros(100))
    high = ex.aggregate(replace(cfg, lam=1.0), np.ones(100, bool), np.full(100, np.nan))
    with pytest.raises(ex.NonMonotoneCurve):
        ex._alarm([low, high])


def test_horizons_nonincreasing():
    cfg = SimConfig(d=1, mu_A=1.0, L=40, lam=0.5, seed=1)
    ests = ex.survival_over_horizons(cfg, [5.0, 10.0, 20.0], 50)
    p = [e.p_hat for e in ests]
    assert p == sorted(p, reverse=True)
    direct = ex.estimate_survival(replace(cfg, T=10.0), 50)
    assert direct.survivors == ests[1].survivors


def test_polyomino_counts():
    # fixed polyominoes with 1..8 cells
    counts = [len(s) for s in ex.polyominoes(8)[1:]]
    assert counts == [1, 2, 6, 19, 63, 216, 760, 2725]


def test_animals_through_origin():
    sets = ex.animals_through_origin(2, 2)
    assert len(sets) == 4 and all((0, 0) in s for s in sets)


def test_mass_check_decays():
    f = [ex.mass_violation_frequency(8.0, k0, 8, 300, 5) for k0 in (2, 4, 6)]
    assert f[0] >= f[1] >= f[2]
    assert f[2] < 0.05


def test_pedestal_decays_in_lambda():
    ests = [ex.pedestal_survival(lam, 1.0, 64.0, 60, 1) for lam in (0.05, 1.0)]
    assert ests[0].p_hat > ests[1].p_hat


def test_convergence_trivial_cases():
    cfg = SimConfig(d=1, mu_A=1.0, L=20, T=0.5, lam=0.5)
    rep = ex.convergence_checks(cfg, 30, ns=(4,))
    assert rep.L_disagreement == 0.0
    a = ex.estimate_survival(ex.discrete_config(cfg, math.inf), 30)
    b = ex.estimate_survival(ex.discrete_config(cfg, None), 30)
    assert np.array_equal(a.indicators, b.indicators)


def test_discrete_gap_decreasing():
    cfg = SimConfig(d=1, mu_A=1.0, L=100, T=50.0, lam=0.5, seed=1)
    rep = ex.convergence_checks(cfg, 500)
    g = [rep.gaps[n] for n in (4, 16, 64)]
    assert g[0] > g[1] > g[2]
    d = [rep.disagreement[n] for n in (4, 16, 64)]
    assert d[0] > d[1] > d[2]


def test_survival_csv(tmp_path):
    est = ex.estimate_survival(SimConfig(d=1, mu_A=1.0, L=10, T=5.0, lam=1.0), 10)
    path = tmp_path / "s.csv"
    ex.write_survival_csv(path, [est])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["lambda", "T", "L", "replicas", "survivors", "p_hat", "ci_lo", "ci_hi",
                       "mean_ext_time"]
    assert int(rows[1][4]) == est.survivors
