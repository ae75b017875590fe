import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from infectwalk.engine import (
    A,
    B,
    IMMUNE,
    INFECTION,
    JUMP,
    RECOVERY,
    VARIANTS,
    SimConfig,
    build_world,
    init_world,
    run_variant,
    site_coords,
    site_index,
    snapshot,
    step_to,
)
from infectwalk.lattice import BlockGeometry, midpoint
from infectwalk.randomness import RecuperationClock, particle_uid, site_code

from reference_engine import reference_run


def _groups(log):
    """Yield (time, positions, types) after each group of simultaneous records."""
    sites = np.array(log.start.sites)
    types = np.array(log.start.types)
    recs = list(log.records())
    i = 0
    while i < len(recs):
        t = recs[i][0]
        while i < len(recs) and recs[i][0] == t:
            _, k, a, _, _, y = recs[i]
            if k == JUMP:
                sites[a] = y
            elif k == INFECTION:
                types[a] = B
            elif k == RECOVERY:
                types[a] = IMMUNE if log.removal else A
            i += 1
        yield t, sites, types


def test_single_particle_world():
    w = init_world(SimConfig(d=2, mu_A=0.0, L=5))
    assert w.n_particles == 1
    assert w.ptype[0] == B
    assert tuple(w.coords()[0]) == (0, 0)


def test_midpoint_seeding():
    cfg = SimConfig(d=1, mu_A=2.0, L=100, initial_B="midpoint", p=1, C0=2)
    snap = snapshot(init_world(cfg))
    m = midpoint((0,), 1, BlockGeometry(1, 2))
    assert snap.b_sites() == {m}
    assert snap.b_count() >= 1


def test_particle_count_d2():
    w = init_world(SimConfig(d=2, mu_A=1.0, L=32, seed=4))
    assert abs(w.n_particles - 65 ** 2) <= 0.03 * 65 ** 2


def test_lonely_b_without_recuperation():
    cfg = SimConfig(d=2, lam=0.0, mu_A=0.0, L=6, T=50.0)
    w, log, s = run_variant(cfg)
    assert s.survived and s.final_B == 1 and s.max_B == 1
    assert all(k == JUMP for _, k, *_ in log.records())


def test_lonely_b_recuperates_at_first_tick():
    cfg = SimConfig(d=1, lam=0.7, mu_A=0.0, L=10, T=40.0, seed=3)
    w, log, s = run_variant(cfg)
    first = RecuperationClock(cfg.run_seed, int(w.uid[0]), cfg.lam, cfg.base).first_at_or_after(0.0)
    recs = [r for r in log.records() if r[1] == RECOVERY]
    if first <= cfg.T:
        assert len(recs) == 1 and recs[0][0] == first
        assert not s.survived and s.extinction_time == first
    else:
        assert not recs and s.survived


def test_no_recuperation_instant_converts_cosited():
    cfg = SimConfig(d=1, mu_A=0.0, L=5, T=1.0, variant="no-recuperation-instant",
                    initial_B="explicit", initial_sites=((0,),), convert_at_seed=False)
    code = site_code((0,))
    uid = np.array([particle_uid(code, 0), particle_uid(code, 1023)], dtype=np.uint64)
    s0 = site_index((0,), 5)
    w = build_world(cfg, uid, np.array([s0, s0]), np.array([A, B], dtype=np.int8),
                    np.array([False, True]))
    assert list(w.ptype) == [B, B]
    w2 = build_world(SimConfig(d=1, mu_A=0.0, L=5, convert_at_seed=False), uid,
                     np.array([s0, s0]), np.array([A, B], dtype=np.int8), np.array([False, True]))
    assert list(w2.ptype) == [A, B]


def test_discrete_n_grid_and_rejection():
    with pytest.raises(ValueError):
        SimConfig(variant="discrete-n", n=2, D=3.0)
    cfg = SimConfig(d=1, mu_A=1.0, L=10, T=5.0, variant="discrete-n", n=8, lam=0.2)
    _, log, _ = run_variant(cfg)
    t = log.time[log.kind == JUMP]
    assert len(t) > 0
    assert np.allclose(t * 8, np.round(t * 8))


def test_snapshot_immutable_and_deterministic():
    cfg = SimConfig(d=2, mu_A=1.0, L=6, lam=0.3, T=5.0, seed=8)
    w = init_world(cfg)
    s0 = snapshot(w)
    with pytest.raises(ValueError):
        s0.sites[0] = 3
    step_to(w, 5.0)
    assert s0 == snapshot(init_world(cfg))
    w2 = init_world(cfg)
    step_to(w2, 5.0)
    assert snapshot(w) == snapshot(w2)


def test_summary_json_keys():
    _, _, s = run_variant(SimConfig(d=1, mu_A=1.0, L=8, lam=0.5, T=3.0))
    keys = set(json.loads(s.to_json_line()))
    assert keys == {"seed", "replica", "variant", "d", "D", "lambda", "muA", "L", "T",
                    "survived", "extinction_time", "max_B", "final_B"}


def test_config_round_trip_and_unknown_key():
    cfg = SimConfig(d=1, lam=0.25, initial_B="explicit", initial_sites=((2,),), L=4)
    assert SimConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(KeyError, match="colour"):
        SimConfig.from_dict({"colour": 1})


@pytest.mark.parametrize("variant", [v for v in VARIANTS if v != "discrete-n"] + ["discrete-n"])
@pytest.mark.parametrize("boundary", ["torus", "reflecting"])
def test_matches_reference(variant, boundary):
    for seed in range(4):
        cfg = SimConfig(d=1 + seed % 2, mu_A=0.8, L=3, T=6.0, lam=0.6, seed=seed,
                        variant=variant, boundary=boundary,
                        n=4 if variant == "discrete-n" else None)
        pos, typ, ref_log = reference_run(cfg)
        w, log, _ = run_variant(cfg)
        assert list(log.records()) == ref_log
        assert [tuple(x) for x in w.coords().tolist()] == pos
        assert w.ptype.tolist() == typ


configs = st.builds(
    SimConfig,
    d=st.integers(1, 2),
    lam=st.sampled_from([0.0, 0.1, 0.5, 2.0]),
    mu_A=st.sampled_from([0.0, 0.5, 1.5]),
    L=st.integers(2, 6),
    boundary=st.sampled_from(["torus", "reflecting"]),
    T=st.floats(0.5, 8.0),
    seed=st.integers(0, 10_000),
    variant=st.sampled_from([v for v in VARIANTS if v != "discrete-n"]),
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(configs)
def test_run_invariants(cfg):
    w, log, s = run_variant(cfg)
    w.check()
    n = log.start.sites.shape[0]
    assert w.n_particles == n
    sites, types = log.replay()
    assert np.array_equal(sites, w.site) and np.array_equal(types, w.ptype)
    assert np.all(np.diff(log.time) >= 0)
    assert np.all(np.abs(site_coords(sites, cfg.d, cfg.L)) <= cfg.L)
    coinc, frog, removal, _ = cfg.rules
    recs = list(log.records())
    jumps_at = {}
    for t, k, a, _, src, y in recs:
        if k == JUMP:
            jumps_at.setdefault(t, set()).add(y)
    extinct_at = None
    b_now = int(np.count_nonzero(log.start.types == B))
    for t, pos, typ in _groups(log):
        nb = int(np.count_nonzero(typ == B))
        if extinct_at is not None:
            assert nb == 0
        if nb == 0 and b_now > 0:
            extinct_at = t
        b_now = nb
        if coinc:
            bsites = set(pos[typ == B].tolist())
            assert not any(pos[q] in bsites for q in np.flatnonzero(typ == A))
    for t, k, a, p, src, y in recs:
        if k == INFECTION and not coinc:
            assert y in jumps_at.get(t, ())
    if removal:
        immune = set()
        for t, k, a, *_ in recs:
            if k == RECOVERY:
                immune.add(a)
            if k == INFECTION:
                assert a not in immune
    if frog:
        typ = np.array(log.start.types)
        for t, k, a, *_ in recs:
            if k == JUMP:
                assert typ[a] == B
            elif k == INFECTION:
                typ[a] = B
            elif k == RECOVERY:
                typ[a] = IMMUNE if removal else A
    if s.extinction_time is not None:
        assert s.extinction_time == extinct_at
    assert s.survived == (w.b_count > 0)


@settings(max_examples=20, deadline=None)
@given(configs, st.floats(0.1, 0.9))
def test_resumable_stepping(cfg, frac):
    w1, log1, _ = run_variant(cfg)
    w2 = init_world(cfg)
    _, la = step_to(w2, cfg.T * frac)
    _, lb = step_to(w2, cfg.T)
    assert list(la.records()) + list(lb.records()) == list(log1.records())
    assert snapshot(w1) == snapshot(w2)


def test_standard_recuperated_particle_waits_for_jump():
    """Search seeds for a B that recuperates while sharing a site with another B.

    It must stay A until some jump lands at or leaves from its site.
    """
    found = 0
    for seed in range(200):
        cfg = SimConfig(d=1, mu_A=2.0, L=4, lam=1.0, T=4.0, seed=seed)
        _, log, _ = run_variant(cfg)
        recs = list(log.records())
        sites = np.array(log.start.sites)
        types = np.array(log.start.types)
        for idx, (t, k, a, p, src, y) in enumerate(recs):
            if k == JUMP:
                sites[a] = y
            elif k == INFECTION:
                types[a] = B
            elif k == RECOVERY:
                types[a] = A
                mates = [q for q in np.flatnonzero(sites == sites[a]) if q != a and types[q] == B]
                if not mates:
                    continue
                found += 1
                # next infection of a must be simultaneous with a jump onto its site or by it
                for t2, k2, a2, p2, s2, y2 in recs[idx + 1:]:
                    if k2 == INFECTION and a2 == a:
                        assert any(r[1] == JUMP and r[0] == t2 and (r[2] == a or r[5] == y2)
                                   for r in recs)
                        break
        if found >= 3:
            break
    assert found >= 3


def test_coincidence_keeps_cosited_b():
    """Same search in the coincidence variant: a B sharing a site never turns A."""
    for seed in range(50):
        cfg = SimConfig(d=1, mu_A=2.0, L=4, lam=1.0, T=4.0, seed=seed, variant="coincidence-infection")
        _, log, _ = run_variant(cfg)
        sites = np.array(log.start.sites)
        for t, k, a, p, src, y in log.records():
            if k == JUMP:
                sites[a] = y
            elif k == RECOVERY:
                assert np.count_nonzero(sites == sites[a]) == 1


def test_frog_removal_d1_large_lambda_dies():
    dead = 0
    for r in range(30):
        _, _, s = run_variant(SimConfig(d=1, mu_A=1.0, L=50, lam=5.0, T=50.0, replica=r,
                                        variant="frog-removal"), log=False)
        dead += not s.survived
    assert dead == 30


def test_window_rejections():
    for bad in ({"L": 0}, {"D": 0.0}, {"lam": -1.0}, {"d": 4}, {"variant": "sir"},
                {"initial_B": "explicit"}, {"lam": 2.0, "clock_base": 1.0}):
        with pytest.raises(ValueError):
            SimConfig(**bad)
