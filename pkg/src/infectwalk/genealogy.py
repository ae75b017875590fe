"""Infection ancestry and maximal jump counts of particle-riding paths.

A genealogical path explains why a particle is B at time ``s``: carriers
``rho_0, ..., rho_l`` with switch times ``s_1 < ... < s_l``, where
``rho_0`` is B from time 0 and ``rho_i`` caught the infection from
``rho_{i-1}`` at ``s_i``.

A J-path rides some particle at every instant and may change mount only
when two particles share a site; ``max_jumps`` returns the largest number
of jumps such a path can make by time ``t``.  Types play no role here.
"""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .engine import B, INFECTION, JUMP, RECOVERY, EventLog, SimConfig, init_world, site_index, step_to


class GenealogyError(RuntimeError):
    """The log cannot explain a B-particle; points at an engine bug."""


@dataclass(frozen=True)
class GenealogicalPath:
    switch_times: tuple[float, ...]  # s_1 .. s_l
    carriers: tuple[int, ...]        # rho_0 .. rho_l
    particle: int
    time: float

    @property
    def length(self) -> int:
        return len(self.carriers) - 1


class LogIndex:
    """Per-particle views of an event log for fast lookups."""

    def __init__(self, log: EventLog):
        self.log = log
        n = log.start.sites.shape[0]
        self.infections: list[list[tuple[float, int]]] = [[] for _ in range(n)]
        self.recoveries: list[list[float]] = [[] for _ in range(n)]
        self.jump_times: list[list[float]] = [[] for _ in range(n)]
        self.jump_dst: list[list[int]] = [[] for _ in range(n)]
        for t, k, a, p, _, y in log.records():
            if k == JUMP:
                self.jump_times[a].append(t)
                self.jump_dst[a].append(y)
            elif k == INFECTION:
                self.infections[a].append((t, p))
            elif k == RECOVERY:
                self.recoveries[a].append(t)

    def site_at(self, p: int, t: float) -> int:
        """Site of ``p`` after all events at times <= t."""
        j = bisect.bisect_right(self.jump_times[p], t)
        return int(self.log.start.sites[p]) if j == 0 else self.jump_dst[p][j - 1]

    def recovered_in(self, p: int, a: float, b: float) -> bool:
        r = self.recoveries[p]
        j = bisect.bisect_left(r, a)
        return j < len(r) and r[j] <= b

    def jumped_at(self, p: int, t: float) -> bool:
        jt = self.jump_times[p]
        j = bisect.bisect_left(jt, t)
        return j < len(jt) and jt[j] == t

    def is_b(self, p: int, s: float) -> bool:
        """Type of ``p`` after all events at times <= s."""
        last_inf = max((t for t, _ in self.infections[p] if t <= s), default=None)
        start = self.log.start.types[p] == B
        if last_inf is None:
            return bool(start) and not self.recovered_in(p, 0.0, s)
        return not self.recovered_in(p, last_inf, s)


def reconstruct(log: EventLog, particle: int, s: float, index: LogIndex | None = None) -> GenealogicalPath:
    """Backward ancestry of ``particle``, which must be B at time ``s``."""
    idx = index or LogIndex(log)
    if s > log.end_time:
        raise ValueError(f"time {s} beyond log horizon {log.end_time}")
    carriers = [particle]
    times: list[float] = []
    rho, u = particle, s
    while True:
        onsets = [(t, p) for t, p in idx.infections[rho] if t <= u]
        if onsets:
            t1, partner = onsets[-1]
            if idx.recovered_in(rho, t1, u):
                raise GenealogyError(f"particle {rho} is not B at time {u}")
            if partner < 0:
                raise GenealogyError(f"infection of {rho} at {t1} has no source")
            times.append(t1)
            carriers.append(partner)
            rho, u = partner, t1
            continue
        if log.start.types[rho] != B or idx.recovered_in(rho, 0.0, u):
            raise GenealogyError(f"particle {rho} is B at {u} without infection provenance")
        break
    return GenealogicalPath(tuple(reversed(times)), tuple(reversed(carriers)), particle, s)


def validate(path: GenealogicalPath, log: EventLog, index: LogIndex | None = None) -> list[str]:
    """Problems with ``path`` against the log; empty means valid."""
    idx = index or LogIndex(log)
    errs = []
    rho = path.carriers
    s = (0.0,) + path.switch_times + (path.time,)
    if rho[-1] != path.particle:
        errs.append("last carrier is not the queried particle")
    if log.start.types[rho[0]] != B:
        errs.append(f"first carrier {rho[0]} is not B at time 0")
    sw = path.switch_times
    if any(b <= a for a, b in zip((0.0,) + sw, sw)) or (sw and sw[-1] > path.time):
        errs.append("switch times not strictly increasing")
    for i in range(1, len(rho)):
        si = s[i]
        if idx.site_at(rho[i], si) != idx.site_at(rho[i - 1], si):
            errs.append(f"carriers {rho[i - 1]} and {rho[i]} apart at {si}")
        if not (idx.jumped_at(rho[i], si) or idx.jumped_at(rho[i - 1], si)):
            errs.append(f"no jump of {rho[i - 1]} or {rho[i]} at {si}")
        if not any(t == si for t, _ in idx.infections[rho[i]]):
            errs.append(f"{rho[i]} not infected at {si}")
        if not idx.is_b(rho[i - 1], si):
            errs.append(f"{rho[i - 1]} not B when passing infection at {si}")
    for i in range(len(rho)):
        if idx.recovered_in(rho[i], s[i], s[i + 1]):
            errs.append(f"{rho[i]} recuperates during [{s[i]}, {s[i + 1]}]")
    return errs


# ------------------------------------------------------------------ J-paths

def _participants(log: EventLog, include_seed: bool) -> np.ndarray:
    if include_seed:
        return np.ones(log.start.sites.shape[0], dtype=bool)
    return ~np.asarray(log.start.seeded)


def _origin_site(log: EventLog, x: Sequence[int]) -> int:
    return site_index(tuple(x), log.start.L)


def jpath_values(log: EventLog, x: Sequence[int], t: float, include_seed: bool = True) -> np.ndarray:
    """Per-particle best jump counts at time ``t`` (-1 where unreachable)."""
    if t > log.end_time:
        raise ValueError(f"time {t} beyond log horizon {log.end_time}")
    live = _participants(log, include_seed)
    sites = np.array(log.start.sites)
    s0 = _origin_site(log, x)
    V = np.where((sites == s0) & live, 0, -1).astype(np.int64)
    occ: dict[int, set[int]] = {}
    for p in np.flatnonzero(live):
        occ.setdefault(int(sites[p]), set()).add(int(p))
    for tt, k, a, _, src, y in log.records():
        if tt > t:
            break
        if k != JUMP or not live[a]:
            continue
        occ[src].discard(a)
        occ.setdefault(y, set()).add(a)
        if V[a] >= 0:
            V[a] += 1
        here = list(occ[y])
        m = V[here].max()
        if m >= 0:
            V[here] = m
    return V


def max_jumps(log: EventLog, x: Sequence[int], t: float, include_seed: bool = True) -> int:
    """J(t, x): most jumps by time ``t`` of a path riding particles from ``(x, 0)``."""
    V = jpath_values(log, x, t, include_seed)
    return int(max(V.max(initial=-1), 0))


def reachable(log: EventLog, x: Sequence[int], t: float, include_seed: bool = True) -> np.ndarray:
    """Particles some J-path from ``(x, 0)`` can be riding at time ``t``."""
    return np.flatnonzero(jpath_values(log, x, t, include_seed) >= 0)


def brute_force_jpaths(log: EventLog, x: Sequence[int], t: float, include_seed: bool = True,
                       max_events: int = 64) -> int:
    """Exhaustive search over mount-switching schedules (small logs only).

    The schedule may switch to any co-located particle before every event.
    Subproblems ``(event, mount)`` are memoized, so the search is exact but
    polynomial in the number of events.
    """
    if t > log.end_time:
        raise ValueError(f"time {t} beyond log horizon {log.end_time}")
    live = _participants(log, include_seed)
    events = [(a, y) for tt, k, a, _, _, y in log.records() if k == JUMP and tt <= t and live[a]]
    if len(events) > max_events:
        raise ValueError(f"{len(events)} events exceed the enumeration budget {max_events}")
    # positions before each event
    pos = [tuple(int(s) for s in log.start.sites)]
    for a, y in events:
        cur = list(pos[-1])
        cur[a] = y
        pos.append(tuple(cur))
    riders = [p for p in range(len(live)) if live[p]]

    @lru_cache(maxsize=None)
    def best(i: int, h: int) -> int:
        if i == len(events):
            return 0
        out = 0
        for g in riders:
            if pos[i][g] != pos[i][h]:
                continue
            gain = 1 if events[i][0] == g else 0
            out = max(out, gain + best(i + 1, g))
        return out

    s0 = _origin_site(log, x)
    starts = [p for p in riders if pos[0][p] == s0]
    return max((best(0, h) for h in starts), default=0)


def online_max_jumps(cfg: SimConfig, times: Sequence[float], x: Sequence[int] | None = None) -> np.ndarray:
    """J(t, x) at each of ``times`` from a single unlogged run of ``cfg``."""
    times = np.asarray(sorted(times), dtype=np.float64)
    world = init_world(cfg)
    world.enable_jtrack(x)
    step_to(world, float(times[-1]), log=False, checkpoints=times)
    return world.j_values.copy()


def write_jsweep_csv(path, rows: Sequence[tuple[float, int]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "J", "J_over_t"])
        for t, J in rows:
            w.writerow([repr(float(t)), int(J), repr(J / t if t > 0 else 0.0)])
