"""Paired runs on shared randomness, checked for exact set inclusions.

Each check replays the two event logs merged by time.  After every group
of simultaneous events it asserts that shared particles sit on the same
sites and that every B of the dominated run is B in the dominating one.
Inclusions can only change at events, so this is an exact check.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    A,
    B,
    IMMUNE,
    INFECTION,
    JUMP,
    RECOVERY,
    EventLog,
    SimConfig,
    build_world,
    init_world,
    step_to,
)
from .randomness import hash_key_py, Purpose, u01_py

COUPLINGS = ("rate", "no-recuperation", "initial")


@dataclass
class DominanceReport:
    label: str
    seed: int
    T: float
    checks: int
    violation: dict | None = None

    @property
    def passed(self) -> bool:
        return self.violation is None

    def verdict_line(self) -> str:
        return json.dumps({"lemma": self.label, "seed": self.seed, "T": self.T,
                           "verdict": "pass" if self.passed else "fail",
                           "violation": self.violation})


def dominance_check(small: EventLog, big: EventLog, small_to_big: np.ndarray,
                    label: str = "", seed: int = 0) -> DominanceReport:
    """Replay both logs; ``small_to_big[i]`` is the partner of particle ``i`` of ``small``."""
    m = np.asarray(small_to_big, dtype=np.int64)
    nb = big.start.sites.shape[0]
    inv = np.full(nb, -1, dtype=np.int64)
    inv[m] = np.arange(m.shape[0])
    ss, ts = np.array(small.start.sites), np.array(small.start.types)
    sb, tb = np.array(big.start.sites), np.array(big.start.types)
    removal_s = IMMUNE if small.removal else A
    removal_b = IMMUNE if big.removal else A

    def bad(i):
        j = m[i]
        return int(ss[i] != sb[j]), int(ts[i] == B and tb[j] != B)

    pos_bad = int(np.count_nonzero(ss != sb[m]))
    typ_bad = int(np.count_nonzero((ts == B) & (tb[m] != B)))

    def violation(t):
        wrong = np.flatnonzero((ss != sb[m]) | ((ts == B) & (tb[m] != B)))
        i = int(wrong[0])
        what = "position" if ss[i] != sb[m[i]] else "type"
        return {"time": t, "kind": what, "particle": i, "partner": int(m[i]),
                "site_small": int(ss[i]), "site_big": int(sb[m[i]])}

    checks = 1
    if pos_bad or typ_bad:
        return DominanceReport(label, seed, small.end_time, checks, violation(0.0))

    def tagged(log, tag):
        for rec in log.records():
            yield rec[0], tag, rec

    current = None
    for t, tag, (_, k, a, _, _, y) in heapq.merge(tagged(small, 0), tagged(big, 1),
                                                   key=lambda r: (r[0], r[1])):
        if current is not None and t != current:
            checks += 1
            if pos_bad or typ_bad:
                return DominanceReport(label, seed, small.end_time, checks, violation(current))
        current = t
        i = a if tag == 0 else inv[a]
        if i >= 0:
            p0, t0 = bad(i)
        if tag == 0:
            if k == JUMP:
                ss[a] = y
            elif k == INFECTION:
                ts[a] = B
            elif k == RECOVERY:
                ts[a] = removal_s
        else:
            if k == JUMP:
                sb[a] = y
            elif k == INFECTION:
                tb[a] = B
            elif k == RECOVERY:
                tb[a] = removal_b
        if i >= 0:
            p1, t1 = bad(i)
            pos_bad += p1 - p0
            typ_bad += t1 - t0
    checks += 1
    if pos_bad or typ_bad:
        return DominanceReport(label, seed, small.end_time, checks, violation(current))
    return DominanceReport(label, seed, small.end_time, checks)


def _run(world, T):
    _, log = step_to(world, T, log=True)
    return log


def couple_lambda(cfg: SimConfig, lam1: float, lam2: float) -> DominanceReport:
    """Same walks, nested clocks: B's at the larger rate are B's at the smaller rate."""
    if not 0 <= lam1 <= lam2:
        raise ValueError(f"need 0 <= lambda1 <= lambda2, got {lam1}, {lam2}")
    c1 = replace(cfg, lam=lam1, clock_base=lam2)
    c2 = replace(cfg, lam=lam2, clock_base=lam2)
    lo = _run(init_world(c1), cfg.T)
    hi = _run(init_world(c2), cfg.T)
    ident = np.arange(lo.start.sites.shape[0])
    return dominance_check(hi, lo, ident, "rate", cfg.seed)


def couple_no_recuperation(cfg: SimConfig) -> DominanceReport:
    """The recuperating run is dominated by instant-infection without recuperation.

    The comparison run starts from the configuration in which every
    particle sharing a site with a B is B.
    """
    main = _run(init_world(replace(cfg, variant="standard")), cfg.T)
    comp = _run(init_world(replace(cfg, variant="no-recuperation-instant")), cfg.T)
    ident = np.arange(main.start.sites.shape[0])
    return dominance_check(main, comp, ident, "no-recuperation", cfg.seed)


def subset_configuration(cfg: SimConfig, drop: float, demote: float):
    """Particles of ``init_world(cfg)`` with some dropped and some B's demoted to A.

    Choices are keyed by particle uid and ``cfg``'s seed, so they are reproducible.
    """
    w = init_world(cfg)
    keep, types = [], []
    for p, u in enumerate(w.uid.tolist()):
        r1 = u01_py(hash_key_py(cfg.run_seed, u, int(Purpose.AUX), 1))
        r2 = u01_py(hash_key_py(cfg.run_seed, u, int(Purpose.AUX), 2))
        if r1 < drop and not w.seeded[p]:
            continue
        keep.append(p)
        t = int(w.ptype[p])
        types.append(A if (t == B and r2 < demote and not w.seeded[p]) else t)
    keep = np.array(keep, dtype=np.int64)
    return w, keep, np.array(types, dtype=np.int8)


def couple_initial(cfg: SimConfig, drop: float = 0.2, demote: float = 0.5,
                   keep: np.ndarray | None = None, types: np.ndarray | None = None) -> DominanceReport:
    """A sub-configuration (fewer particles, fewer B's) stays dominated.

    Pass ``keep`` (indices into ``init_world(cfg)``) and ``types`` to fix the
    sub-configuration explicitly; otherwise it is drawn from ``drop`` and
    ``demote`` probabilities.
    """
    if keep is None:
        big_world, keep, types = subset_configuration(cfg, drop, demote)
    else:
        big_world = init_world(cfg)
        keep = np.asarray(keep, dtype=np.int64)
        types = np.asarray(types, dtype=np.int8)
        if np.any((types == B) & (big_world.ptype[keep] != B)):
            raise ValueError("sub-configuration has a B that is not B in the full one")
    small_world = build_world(cfg, big_world.uid[keep], big_world.site[keep], types,
                              big_world.seeded[keep])
    small = _run(small_world, cfg.T)
    big = _run(big_world, cfg.T)
    return dominance_check(small, big, keep, "initial", cfg.seed)


def run_coupling(kind: str, cfg: SimConfig, lam1: float | None = None,
                 lam2: float | None = None) -> DominanceReport:
    if kind == "rate":
        return couple_lambda(cfg, cfg.lam if lam1 is None else lam1,
                             cfg.lam if lam2 is None else lam2)
    if kind == "no-recuperation":
        return couple_no_recuperation(cfg)
    if kind == "initial":
        return couple_initial(cfg)
    raise ValueError(f"unknown coupling {kind!r}; choose from {COUPLINGS}")
