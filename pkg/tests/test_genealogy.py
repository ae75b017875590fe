import csv

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from infectwalk.engine import A, B, INFECTION, JUMP, SimConfig, build_world, run_variant, site_index, step_to
from infectwalk.genealogy import (
    GenealogicalPath,
    GenealogyError,
    LogIndex,
    brute_force_jpaths,
    jpath_values,
    max_jumps,
    online_max_jumps,
    reachable,
    reconstruct,
    validate,
    write_jsweep_csv,
)
from infectwalk.randomness import particle_uid, site_code


def _two_particle_log(T=60.0, lam=0.0, seed=0):
    cfg = SimConfig(d=1, mu_A=0.0, L=3, lam=lam, T=T, seed=seed, initial_B="explicit",
                    initial_sites=((0,),))
    uid = np.array([particle_uid(site_code((0,)), 1023), particle_uid(site_code((1,)), 0)],
                   dtype=np.uint64)
    sites = np.array([site_index((0,), 3), site_index((1,), 3)])
    w = build_world(cfg, uid, sites, np.array([B, A], dtype=np.int8), np.array([True, False]))
    _, log = step_to(w, T)
    return log


def test_seed_path_has_length_zero():
    _, log, _ = run_variant(SimConfig(d=2, mu_A=0.0, L=4, T=1.0))
    path = reconstruct(log, 0, 1e-9)
    assert path.length == 0 and path.carriers == (0,)
    assert validate(path, log) == []


def test_single_transmission():
    log = _two_particle_log()
    inf = [r for r in log.records() if r[1] == INFECTION]
    assert inf, "particles should meet on a 7-site torus"
    s1, _, rho1, src, *_ = inf[0]
    seed_pid = int(np.flatnonzero(log.start.seeded)[0])
    path = reconstruct(log, rho1, s1 + 1e-9 if s1 + 1e-9 <= log.end_time else s1)
    assert path.switch_times == (s1,)
    assert path.carriers == (seed_pid, rho1)
    assert src == seed_pid
    assert validate(path, log) == []


def test_non_b_query_raises():
    log = _two_particle_log(T=0.001)
    with pytest.raises(GenealogyError):
        reconstruct(log, 1, 0.0005)


def test_validate_flags_corruption():
    log = _two_particle_log()
    inf = [r for r in log.records() if r[1] == INFECTION]
    s1, _, rho1, *_ = inf[0]
    good = reconstruct(log, rho1, s1)
    bad = GenealogicalPath((s1 / 2,), good.carriers, rho1, s1)
    assert validate(bad, log)


@pytest.mark.parametrize("seed", range(6))
def test_all_terminal_b_validate(seed):
    cfg = SimConfig(d=1 + seed % 2, mu_A=1.0, L=12, lam=0.3, T=30.0, seed=seed)
    w, log, _ = run_variant(cfg)
    idx = LogIndex(log)
    for p in np.flatnonzero(w.ptype == B):
        path = reconstruct(log, int(p), cfg.T, idx)
        assert validate(path, log, idx) == []


def test_single_particle_jump_count():
    cfg = SimConfig(d=1, mu_A=0.0, L=50, T=7.0, seed=2)
    _, log, _ = run_variant(cfg)
    n = int(np.count_nonzero(log.kind == JUMP))
    assert max_jumps(log, (0,), 7.0) == n
    assert brute_force_jpaths(log, (0,), 7.0) == n


def test_unoccupied_origin():
    _, log, _ = run_variant(SimConfig(d=1, mu_A=0.0, L=5, T=3.0))
    assert max_jumps(log, (3,), 3.0) == 0
    assert brute_force_jpaths(log, (3,), 3.0) == 0


def test_never_meeting_pair():
    cfg = SimConfig(d=1, mu_A=0.0, L=100, T=3.0, initial_B="explicit", initial_sites=((0,), (60,)))
    _, log, _ = run_variant(cfg)
    p0 = int(np.flatnonzero(np.array(log.start.sites) == site_index((0,), 100))[0])
    own = sum(1 for r in log.records() if r[1] == JUMP and r[2] == p0)
    assert max_jumps(log, (0,), 3.0) == own


def test_horizon_rejection():
    _, log, _ = run_variant(SimConfig(d=1, mu_A=0.0, L=5, T=3.0))
    with pytest.raises(ValueError):
        max_jumps(log, (0,), 4.0)


small = st.builds(SimConfig, d=st.integers(1, 2), mu_A=st.sampled_from([0.5, 1.0, 2.0]),
                  L=st.integers(1, 3), T=st.floats(0.5, 3.0), seed=st.integers(0, 10**6))


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(small, st.booleans())
def test_dp_matches_brute_force(cfg, include_seed):
    _, log, _ = run_variant(cfg)
    jumps = int(np.count_nonzero(log.kind == JUMP))
    if jumps > 40:
        return
    for x in [(0,) * cfg.d, (1,) + (0,) * (cfg.d - 1)]:
        assert max_jumps(log, x, cfg.T, include_seed) == brute_force_jpaths(log, x, cfg.T, include_seed)


@settings(max_examples=30, deadline=None)
@given(small)
def test_j_monotone_in_t(cfg):
    _, log, _ = run_variant(cfg)
    ts = np.linspace(0, cfg.T, 6)
    js = [max_jumps(log, (0,) * cfg.d, t) for t in ts]
    assert js == sorted(js)


@settings(max_examples=30, deadline=None)
@given(small)
def test_jpath_reach_is_infected(cfg):
    cfg = SimConfig(**{**cfg.to_dict(), "variant": "no-recuperation-instant", "initial_sites": ()})
    _, log, _ = run_variant(cfg)
    for t in np.linspace(0, cfg.T, 4):
        _, types = log.replay(t)
        assert np.all(types[reachable(log, (0,) * cfg.d, t)] == B)


def test_online_matches_log():
    cfg = SimConfig(d=2, mu_A=1.0, L=10, T=40.0, seed=5)
    _, log, _ = run_variant(cfg)
    times = [10.0, 20.0, 40.0]
    online = online_max_jumps(cfg, times)
    assert list(online) == [max_jumps(log, (0, 0), t) for t in times]
    V = jpath_values(log, (0, 0), 40.0)
    assert V.max() == online[-1]


def test_jsweep_csv(tmp_path):
    path = tmp_path / "j.csv"
    write_jsweep_csv(path, [(100.0, 50), (200.0, 120)])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "J", "J_over_t"]
    assert float(rows[2][2]) == 0.6


def test_brute_force_budget():
    _, log, _ = run_variant(SimConfig(d=2, mu_A=2.0, L=5, T=10.0))
    with pytest.raises(ValueError):
        brute_force_jpaths(log, (0, 0), 10.0, max_events=5)
