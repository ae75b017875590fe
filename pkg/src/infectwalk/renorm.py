"""Block renormalization: the oriented graph of p-blocks and its boundary calculus.

Vertices ``(i, k)`` live in ``Z^d x Z`` (time last).  An oriented edge runs
from ``(i, k)`` to ``(j, k + 1)`` whenever ``||i - j||_inf <= 1``; the
undirected lattice graph joins any two distinct vertices at sup-distance 1.

Boundary operators take finite vertex sets (iterables of integer tuples)
and return Python sets.  They run flood fills on a dense grid around the
bounding box; the grid carries a one-cell wall so neighbour offsets need no
bounds checks.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from numba import njit

from .engine import (
    B,
    INFECTION,
    JUMP,
    EventLog,
    SimConfig,
    Snapshot,
    WorldState,
    build_sub_world,
    site_coords,
    site_index,
    snapshot,
    step_to,
)
from .lattice import BlockGeometry, bottom_box, midpoint, t_of
from .randomness import RecuperationClock

Vertex = tuple[int, ...]

EMPTY, FILLED, WALL = 0, 1, 2
ADJACENCIES = ("linf", "nn")


class WindowTooSmall(ValueError):
    """A block region reaches outside the simulated window."""


# ------------------------------------------------------------------ grid machinery

@njit(cache=True)
def _flood(grid, start, offs, blocked):
    """Cells reachable from ``start`` through non-wall, non-blocked cells."""
    n = grid.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    if grid[start] == WALL or blocked[start]:
        return seen
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[0] = start
    top = 1
    seen[start] = True
    while top > 0:
        top -= 1
        c = stack[top]
        for o in offs:
            e = c + o
            if grid[e] != WALL and not blocked[e] and not seen[e]:
                seen[e] = True
                stack[top] = e
                top += 1
    return seen


@njit(cache=True)
def _boundaries(grid, outer, full_offs, lower_offs, up):
    n = grid.shape[0]
    ext = np.zeros(n, dtype=np.bool_)
    plus = np.zeros(n, dtype=np.bool_)
    star = np.zeros(n, dtype=np.bool_)
    for c in range(n):
        if grid[c] != EMPTY or not outer[c]:
            continue
        adj = False
        for o in full_offs:
            if grid[c + o] == FILLED:
                adj = True
                break
        if not adj:
            continue
        ext[c] = True
        for o in lower_offs:
            if grid[c + o] == FILLED:
                plus[c] = True
                break
        if grid[c + up] == FILLED:
            star[c] = True
    return ext, plus, star


@njit(cache=True)
def _is_connected(mask, grid, offs):
    n = mask.shape[0]
    first = -1
    total = 0
    for c in range(n):
        if mask[c]:
            total += 1
            if first < 0:
                first = c
    if total <= 1:
        return True
    blocked = ~mask
    seen = _flood(grid, first, offs, blocked)
    got = 0
    for c in range(n):
        if seen[c]:
            got += 1
    return got == total


@njit(cache=True)
def _verify_grid(grid, corner, nn, full, lower, up, adj):
    filled = grid == FILLED
    outer = _flood(grid, corner, nn, filled)
    ext, plus, star = _boundaries(grid, outer, full, lower, up)
    a_conn = _is_connected(filled, grid, full)
    e_conn = _is_connected(ext, grid, adj)
    reach = _flood(grid, corner, nn, ext)
    sep = True
    ne = 0
    npl = 0
    ns = 0
    into = 0
    out_of = 0
    n = grid.shape[0]
    for c in range(n):
        if filled[c] and reach[c]:
            sep = False
        ne += ext[c]
        npl += plus[c]
        ns += star[c]
        if c + up < n:
            into += outer[c] and filled[c + up]
            out_of += filled[c] and outer[c + up]
    return a_conn, e_conn, sep, ne, npl, ns, into, out_of


class _Grid:
    """Dense box around a vertex set, inflated by ``pad`` plus a wall layer."""

    def __init__(self, pts: np.ndarray, pad: int = 2, extra: np.ndarray | None = None):
        allp = pts if extra is None or len(extra) == 0 else np.concatenate([pts, extra])
        self.dim = allp.shape[1]
        self.lo = allp.min(axis=0) - pad - 1
        hi = allp.max(axis=0) + pad + 1
        self.shape = tuple(int(h - l + 1) for l, h in zip(self.lo, hi))
        self.strides = np.array([int(np.prod(self.shape[a + 1:])) for a in range(self.dim)],
                                dtype=np.int64)
        g = np.full(self.shape, EMPTY, dtype=np.int8)
        wall = [slice(None)] * self.dim
        for a in range(self.dim):
            idx = list(wall)
            idx[a] = 0
            g[tuple(idx)] = WALL
            idx[a] = -1
            g[tuple(idx)] = WALL
        self.grid = g.ravel()
        self.corner = int(self.strides.sum())  # cell (1, ..., 1): inside the wall, outside everything
        self.fill(pts, FILLED)

    def flat(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts) - self.lo) @ self.strides

    def fill(self, pts: np.ndarray, value: int) -> None:
        if len(pts):
            self.grid[self.flat(pts)] = value

    def mask(self, pts: np.ndarray) -> np.ndarray:
        m = np.zeros(self.grid.shape[0], dtype=np.bool_)
        if len(pts):
            m[self.flat(pts)] = True
        return m

    def points(self, mask: np.ndarray) -> set[Vertex]:
        idx = np.flatnonzero(mask)
        coords = np.empty((idx.shape[0], self.dim), dtype=np.int64)
        rem = idx.copy()
        for a in range(self.dim):
            coords[:, a] = rem // self.strides[a]
            rem = rem % self.strides[a]
        coords += self.lo
        return set(map(tuple, coords.tolist()))

    def offsets(self, vectors: Iterable[Sequence[int]]) -> np.ndarray:
        return np.array([int(np.dot(v, self.strides)) for v in vectors], dtype=np.int64)


def _unit_vectors(dim: int) -> list[tuple[int, ...]]:
    out = []
    for a in range(dim):
        for s in (-1, 1):
            v = [0] * dim
            v[a] = s
            out.append(tuple(v))
    return out


def _linf_vectors(dim: int) -> list[tuple[int, ...]]:
    return [v for v in itertools.product((-1, 0, 1), repeat=dim) if any(v)]


def _adjacency_vectors(dim: int, adjacency: str) -> list[tuple[int, ...]]:
    if adjacency not in ADJACENCIES:
        raise ValueError(f"adjacency must be one of {ADJACENCIES}, got {adjacency!r}")
    return _linf_vectors(dim) if adjacency == "linf" else _unit_vectors(dim)


def _as_array(A: Iterable[Sequence[int]]) -> np.ndarray:
    pts = np.array(sorted({tuple(int(c) for c in v) for v in A}), dtype=np.int64)
    return pts


@dataclass(frozen=True)
class BoundarySets:
    ext: frozenset
    plus: frozenset
    star: frozenset


def boundary_sets(A: Iterable[Sequence[int]]) -> BoundarySets:
    """Exterior boundary of ``A`` and its upward (``plus``) and below-A (``star``) parts.

    ``ext``: vertices outside ``A``, sup-adjacent to ``A``, joined to infinity
    by a nearest-neighbour path avoiding ``A``.  ``plus``: those ``v`` with an
    oriented edge ``w -> v`` from some ``w`` in ``A``.  ``star``: those ``v``
    with ``v + e_time`` in ``A``.
    """
    pts = _as_array(A)
    if pts.size == 0:
        return BoundarySets(frozenset(), frozenset(), frozenset())
    dim = pts.shape[1]
    g = _Grid(pts)
    nn = g.offsets(_unit_vectors(dim))
    outer = _flood(g.grid, g.corner, nn, g.grid == FILLED)
    full = g.offsets(_linf_vectors(dim))
    lower = g.offsets([v + (-1,) for v in itertools.product((-1, 0, 1), repeat=dim - 1)])
    up = int(g.strides[-1])
    ext, plus, star = _boundaries(g.grid, outer, full, lower, up)
    return BoundarySets(frozenset(g.points(ext)), frozenset(g.points(plus)), frozenset(g.points(star)))


def ext_boundary(A) -> set[Vertex]:
    return set(boundary_sets(A).ext)


def ext_plus(A) -> set[Vertex]:
    return set(boundary_sets(A).plus)


def ext_star(A) -> set[Vertex]:
    return set(boundary_sets(A).star)


def is_connected(S: Iterable[Sequence[int]], adjacency: str = "linf") -> bool:
    pts = _as_array(S)
    if len(pts) <= 1:
        return True
    g = _Grid(pts, pad=0)
    offs = g.offsets(_adjacency_vectors(pts.shape[1], adjacency))
    return bool(_is_connected(g.mask(pts), g.grid, offs))


def separates(S: Iterable[Sequence[int]], A: Iterable[Sequence[int]]) -> bool:
    """True iff ``S`` misses ``A`` and every lattice path from ``A`` to infinity meets ``S``."""
    s_pts, a_pts = _as_array(S), _as_array(A)
    if a_pts.size == 0:
        return True
    if s_pts.size and set(map(tuple, s_pts.tolist())) & set(map(tuple, a_pts.tolist())):
        return False
    g = _Grid(a_pts, extra=s_pts)
    nn = g.offsets(_unit_vectors(a_pts.shape[1]))
    reach = _flood(g.grid, g.corner, nn, g.mask(s_pts))
    return not bool(reach[g.flat(a_pts)].any())


def vertical_transitions(A: Iterable[Sequence[int]]) -> tuple[int, int]:
    """Counts of upward steps from the unbounded complement into ``A`` and out of ``A`` into it.

    Summed over all vertical lines; the two counts agree for every finite set.
    """
    pts = _as_array(A)
    if pts.size == 0:
        return 0, 0
    g = _Grid(pts)
    nn = g.offsets(_unit_vectors(pts.shape[1]))
    outer = _flood(g.grid, g.corner, nn, g.grid == FILLED)
    filled = g.grid == FILLED
    up = int(g.strides[-1])
    body = np.arange(g.grid.shape[0] - up)
    into = int(np.count_nonzero(outer[body] & filled[body + up]))
    out_of = int(np.count_nonzero(filled[body] & outer[body + up]))
    return into, out_of


@dataclass
class BoundaryReport:
    passed: bool
    connected: bool
    separates: bool
    n_ext: int
    n_plus: int
    n_star: int
    transitions_balanced: bool
    witness: str = ""


def verify_boundary_bounds(A: Iterable[Sequence[int]], adjacency: str = "linf") -> BoundaryReport:
    """Check connectivity and separation of the exterior boundary and
    ``|ext| <= 6 |plus|``, ``|star| <= |plus|`` for a connected set above time 0."""
    pts = _as_array(A)
    if pts.size == 0:
        raise ValueError("set must be nonempty")
    if pts[:, -1].min() < 0:
        raise ValueError("set must lie at times >= 0")
    dim = pts.shape[1]
    g = _Grid(pts)
    lower = [v + (-1,) for v in itertools.product((-1, 0, 1), repeat=dim - 1)]
    a_conn, conn, sep, ne, npl, ns, into, out_of = _verify_grid(
        g.grid, g.corner, g.offsets(_unit_vectors(dim)), g.offsets(_linf_vectors(dim)),
        g.offsets(lower), int(g.strides[-1]), g.offsets(_adjacency_vectors(dim, adjacency)))
    if not a_conn:
        raise ValueError("set must be connected under sup-adjacency")
    ne, npl, ns, into, out_of = int(ne), int(npl), int(ns), int(into), int(out_of)
    ok = conn and sep and ne <= 6 * npl and ns <= npl and into == out_of
    why = []
    if not conn:
        why.append(f"boundary not connected under {adjacency}")
    if not sep:
        why.append("boundary does not separate")
    if ne > 6 * npl:
        why.append(f"|ext|={ne} > 6*|plus|={6 * npl}")
    if ns > npl:
        why.append(f"|star|={ns} > |plus|={npl}")
    if into != out_of:
        why.append(f"vertical transitions {into} != {out_of}")
    return BoundaryReport(bool(ok), bool(conn), bool(sep), ne, npl, ns, into == out_of, "; ".join(why))


# ------------------------------------------------------------------ set enumeration

def connected_subsets(box: Sequence[int], max_size: int) -> Iterable[tuple[Vertex, ...]]:
    """All sup-connected subsets of ``prod [0, box_a]`` with 1..max_size points."""
    cells = list(itertools.product(*[range(b + 1) for b in box]))
    index = {c: n for n, c in enumerate(cells)}
    nbr = [0] * len(cells)
    for n, c in enumerate(cells):
        for v in _linf_vectors(len(box)):
            w = tuple(a + b for a, b in zip(c, v))
            if w in index:
                nbr[n] |= 1 << index[w]
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(range(len(cells)), size):
            mask = 0
            for n in combo:
                mask |= 1 << n
            seen = 1 << combo[0]
            frontier = seen
            while frontier:
                grow = 0
                f = frontier
                while f:
                    low = f & -f
                    grow |= nbr[low.bit_length() - 1]
                    f ^= low
                grow &= mask & ~seen
                seen |= grow
                frontier = grow
            if seen == mask:
                yield tuple(cells[n] for n in combo)


def random_animal(size: int, dim: int, rng: np.random.Generator) -> set[Vertex]:
    """Random sup-connected set of ``size`` vertices, shifted to start at time 0."""
    pts = [(0,) * dim]
    have = {pts[0]}
    vecs = _linf_vectors(dim)
    while len(pts) < size:
        base = pts[rng.integers(len(pts))]
        v = vecs[rng.integers(len(vecs))]
        w = tuple(a + b for a, b in zip(base, v))
        if w not in have:
            have.add(w)
            pts.append(w)
    tmin = min(p[-1] for p in pts)
    return {p[:-1] + (p[-1] - tmin,) for p in pts}


# ------------------------------------------------------------------ block states

def _check_time(snap: Snapshot, t) -> None:
    if snap.time != t:
        raise ValueError(f"snapshot at time {snap.time}, expected {t}")


def good_bottom(snap: Snapshot, i: Sequence[int], k: int, p: int, gamma0: float, mu_A: float,
                geom: BlockGeometry) -> bool:
    """Every cube ``x + [0, C0**p)^d`` inside the bottom holds enough original particles.

    Counts skip the particles added as infection seeds.  The threshold is
    ``gamma0 * mu_A * C0**(d p)``.
    """
    _check_time(snap, t_of(k, p, geom))
    region = bottom_box(i, p, geom)
    if min(region.lo) < -snap.L or max(region.hi) - 1 > snap.L:
        raise WindowTooSmall(f"bottom {region.lo}..{region.hi} exceeds window radius {snap.L}")
    side = geom.C0 ** p
    shape = region.side_lengths
    counts = np.zeros(shape, dtype=np.int64)
    c = snap.coords[~np.asarray(snap.seeded)]
    lo = np.array(region.lo)
    inside = np.all((c >= lo) & (c < np.array(region.hi)), axis=1)
    np.add.at(counts, tuple((c[inside] - lo).T), 1)
    # box sums via a summed-area table
    S = np.pad(counts, [(1, 0)] * geom.d).cumsum(axis=0)
    for a in range(1, geom.d):
        S = S.cumsum(axis=a)
    sums = S
    for a in range(geom.d):
        upper = np.take(sums, np.arange(side, sums.shape[a]), axis=a)
        lower = np.take(sums, np.arange(0, sums.shape[a] - side), axis=a)
        sums = upper - lower
    threshold = gamma0 * mu_A * geom.C0 ** (geom.d * p)
    return bool(sums.size > 0 and sums.min() >= threshold)


def _b_coords(snap: Snapshot) -> np.ndarray:
    return snap.coords[np.asarray(snap.types) == B]


def is_active(snap: Snapshot, i: Sequence[int], k: int, p: int, geom: BlockGeometry) -> bool:
    """Some B-particle within sup-distance ``Delta_p // 8`` of the block midpoint."""
    _check_time(snap, t_of(k, p, geom))
    b = _b_coords(snap)
    if b.size == 0:
        return False
    m = np.array(midpoint(i, p, geom))
    return bool((np.abs(b - m).max(axis=1) <= geom.active_radius(p)).any())


def x_of(snap: Snapshot, i: Sequence[int], k: int, p: int, geom: BlockGeometry) -> Vertex | None:
    """Nearest B-occupied site to the midpoint; ties go to the lexicographically smallest."""
    _check_time(snap, t_of(k, p, geom))
    b = _b_coords(snap)
    if b.size == 0:
        return None
    m = np.array(midpoint(i, p, geom))
    dist = np.abs(b - m).max(axis=1)
    near = b[dist == dist.min()]
    return min(map(tuple, near.tolist()))


# ------------------------------------------------------------------ reset process

@dataclass(frozen=True)
class Witness:
    """Transmission chain: carriers ``rho_0..rho_l`` and pickup times ``s_1..s_l``."""

    times: tuple[float, ...]
    carriers: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.carriers) - 1

    def key(self):
        return (self.length, self.times, self.carriers)


@dataclass
class ResetOutcome:
    start: float
    end: float
    seed_particle: int
    members: np.ndarray
    b_sites: set
    final_b: np.ndarray
    a_event: dict
    witness: dict
    log: EventLog | None = None


def _chains(log: EventLog, seed_particle: int) -> dict[int, Witness]:
    """Least chain (by length, then times, then carriers) reaching each infected particle.

    Pickup times are infection onsets.  An A landing on several B's may
    have caught it from any of them; a B landing on A's passes it on itself.
    Extending chains by one link preserves their order, so keeping the
    least chain per particle suffices.
    """
    sites = np.array(log.start.sites)
    types = np.array(log.start.types)
    occ: dict[int, set[int]] = {}
    for pid, s in enumerate(sites.tolist()):
        occ.setdefault(s, set()).add(pid)
    best: dict[int, tuple] = {}
    for pid in np.flatnonzero(types == B).tolist():
        if pid == seed_particle:
            best[pid] = (0, (), (pid,))
    jumper = -1
    pending: list[int] = []
    for t, k, a, partner, src, y in log.records():
        if k == JUMP:
            occ[src].discard(a)
            occ.setdefault(y, set()).add(a)
            sites[a] = y
            jumper = a
            # B's present at the destination just before anything gets infected
            pending = sorted(q for q in occ[y] if q != a and types[q] == B)
            continue
        if k != INFECTION:
            continue
        if a == jumper:
            candidates = pending
        else:
            candidates = [jumper]
        opts = []
        for c in candidates:
            if c in best:
                l, ts, rs = best[c]
                opts.append((l + 1, ts + (t,), rs + (a,)))
        if opts:
            best[a] = min(opts)
        types[a] = B
    return {p: Witness(v[1], v[2]) for p, v in best.items()}


def run_reset_process(world: WorldState, i: Sequence[int], k: int, p: int, x: Sequence[int],
                      geom: BlockGeometry, horizon: float | None = None,
                      targets: Sequence[Sequence[int]] | None = None, keep_log: bool = False) -> ResetOutcome:
    """Restart from the particles in the bottom of block ``(i, k)`` with one B at ``x``.

    ``world`` must be the parent run at time ``t(k)``.  The restricted system
    reuses every particle's pending jump and walk stream and follows the
    jump-required infection rules without recuperation.  For each target
    ``j`` (default: the sup-neighbours of ``i``) the outcome records whether
    a B ends within ``Delta_p // 8`` of ``m(j)`` and, if so, the least chain
    reaching such a B.
    """
    t0 = t_of(k, p, geom)
    if world.clock != t0:
        raise ValueError(f"world at time {world.clock}, expected {t0}")
    t1 = t_of(k + 1, p, geom) if horizon is None else horizon
    cfg = world.config
    region = bottom_box(i, p, geom)
    if min(region.lo) < -cfg.L or max(region.hi) - 1 > cfg.L:
        raise WindowTooSmall(f"bottom of {tuple(i)} exceeds window radius {cfg.L}")
    coords = world.coords()
    inside = np.all((coords >= np.array(region.lo)) & (coords < np.array(region.hi)), axis=1)
    members = np.flatnonzero(inside)
    sx = site_index(tuple(x), cfg.L)
    at_x = [int(q) for q in members if world.site[q] == sx]
    if not at_x:
        raise ValueError(f"site {tuple(x)} holds no particle at time {t0}")
    bs = [q for q in at_x if world.ptype[q] == B]
    seed_particle = min(bs) if bs else min(at_x)
    types = np.zeros(members.shape[0], dtype=np.int8)
    local_seed = int(np.searchsorted(members, seed_particle))
    types[local_seed] = B
    sub = build_sub_world(world, members, types, variant="standard", lam=0.0)
    sub, log = step_to(sub, t1, log=True)
    chains = _chains(log, local_seed)

    final_sites = site_coords(sub.site, cfg.d, cfg.L)
    final_b = sub.ptype == B
    if targets is None:
        targets = [tuple(int(a) + b for a, b in zip(i, v))
                   for v in itertools.product((-1, 0, 1), repeat=geom.d)]
    rad = geom.active_radius(p)
    a_event, witness = {}, {}
    for j in targets:
        j = tuple(int(c) for c in j)
        m = np.array(midpoint(j, p, geom))
        hit = np.flatnonzero(final_b & (np.abs(final_sites - m).max(axis=1) <= rad))
        a_event[j] = bool(hit.size)
        cands = [chains[h] for h in hit.tolist() if h in chains]
        if cands:
            w = min(cands, key=Witness.key)
            witness[j] = Witness(w.times, tuple(int(members[c]) for c in w.carriers))
        else:
            witness[j] = None
    b_sites = set(map(tuple, final_sites[final_b].tolist()))
    return ResetOutcome(float(t0), float(t1), seed_particle, members, b_sites,
                        members[final_b], a_event, witness, log if keep_log else None)


# ------------------------------------------------------------------ edges

@dataclass
class EdgeCertificate:
    parent: tuple
    child: tuple
    active: bool
    x: Vertex | None
    a_event: bool | None = None
    witness: Witness | None = None
    b_event: bool | None = None
    failed: str = ""

    @property
    def open(self) -> bool:
        return bool(self.active and self.a_event and self.b_event)


def _check_edge(parent, child) -> None:
    (i, k), (j, k2) = parent, child
    if k2 != k + 1 or len(i) != len(j) or max(abs(a - b) for a, b in zip(i, j)) > 1:
        raise ValueError(f"{parent} -> {child} is not an oriented block edge")


def avoids_recuperation(world: WorldState, w: Witness, start: float, end: float) -> bool:
    """No clock tick of carrier ``rho_i`` inside ``[s_i, s_{i+1}]`` for any link."""
    cfg = world.config
    if cfg.lam <= 0 or not cfg.rules[3]:
        return True
    s = (start,) + w.times + (end,)
    for n, rho in enumerate(w.carriers):
        clock = RecuperationClock(cfg.run_seed, int(world.uid[rho]), cfg.lam, cfg.base)
        if clock.first_at_or_after(s[n], s[n + 1]) <= s[n + 1]:
            return False
    return True


def certify_parent(world: WorldState, i: Sequence[int], k: int, p: int,
                   geom: BlockGeometry) -> dict[tuple, EdgeCertificate]:
    """Certificates for every oriented edge out of ``(i, k)``; ``world`` sits at ``t(k)``."""
    i = tuple(int(c) for c in i)
    snap = snapshot(world)
    active = is_active(snap, i, k, p, geom)
    x = x_of(snap, i, k, p, geom)
    children = [(tuple(a + b for a, b in zip(i, v)), k + 1)
                for v in itertools.product((-1, 0, 1), repeat=geom.d)]
    certs = {}
    if not active:
        for c in children:
            certs[c] = EdgeCertificate((i, k), c, False, x, failed="parent inactive")
        return certs
    out = run_reset_process(world, i, k, p, x, geom, targets=[c[0] for c in children])
    for c in children:
        j = c[0]
        cert = EdgeCertificate((i, k), c, True, x, a_event=out.a_event[j], witness=out.witness[j])
        if not cert.a_event:
            cert.failed = "no transmission to child"
        else:
            cert.b_event = avoids_recuperation(world, cert.witness, out.start, out.end)
            if not cert.b_event:
                cert.failed = "carrier recuperation tick"
        certs[c] = cert
    return certs


def check_edge_open(world: WorldState, parent, child, p: int, geom: BlockGeometry) -> EdgeCertificate:
    parent = (tuple(parent[0]), int(parent[1]))
    child = (tuple(child[0]), int(child[1]))
    _check_edge(parent, child)
    return certify_parent(world, parent[0], parent[1], p, geom)[child]


@dataclass
class BlockRunResult:
    edges_tested: int = 0
    edges_open: int = 0
    violations: int = 0
    details: list = field(default_factory=list)


def block_experiment(cfg: SimConfig, p: int, geom: BlockGeometry, levels: int,
                     columns: Sequence[Sequence[int]]) -> BlockRunResult:
    """Certify all edges out of ``columns x {0..levels-1}`` and test activity propagation.

    Every open edge out of an active parent must land on a vertex that is
    active in the full run; misses are counted as violations.
    """
    from .engine import init_world

    world = init_world(cfg)
    res = BlockRunResult()
    for k in range(levels):
        step_to(world, float(t_of(k, p, geom)), log=False)
        certs = []
        for i in columns:
            certs.extend(certify_parent(world, i, k, p, geom).values())
        step_to(world, float(t_of(k + 1, p, geom)), log=False)
        snap = snapshot(world)
        for c in certs:
            child = c.child
            res.edges_tested += 1
            if c.open:
                res.edges_open += 1
                if not is_active(snap, child[0], child[1], p, geom):
                    res.violations += 1
                    res.details.append(c)
    return res


# ------------------------------------------------------------------ clusters and barriers

def oriented_children(v: Vertex) -> list[Vertex]:
    i, k = v[:-1], v[-1]
    return [tuple(a + b for a, b in zip(i, w)) + (k + 1,)
            for w in itertools.product((-1, 0, 1), repeat=len(i))]


def open_cluster(seeds: Iterable[Sequence[int]], edge_open: Callable[[Vertex, Vertex], bool],
                 max_level: int | None = None) -> set[Vertex]:
    """Vertices reachable from ``seeds`` along open oriented edges.

    ``max_level`` caps the time coordinate for oracles that may be open forever.
    """
    start = {tuple(int(c) for c in v) for v in seeds}
    seen = set(start)
    todo = deque(sorted(start))
    while todo:
        v = todo.popleft()
        if max_level is not None and v[-1] >= max_level:
            continue
        for w in oriented_children(v):
            if w not in seen and edge_open(v, w):
                seen.add(w)
                todo.append(w)
    return seen


def is_barrier(S: Iterable[Sequence[int]], c0: Iterable[Sequence[int]],
               c_flag: Mapping | Callable, adjacency: str = "linf") -> bool:
    """Connected, separating ``c0`` from infinity, and at least ``|S|/6`` members
    have a parent whose flag is set."""
    S = {tuple(int(c) for c in v) for v in S}
    c0 = {tuple(int(c) for c in v) for v in c0}
    if not S or S & c0:
        return False
    flag = c_flag if callable(c_flag) else (lambda u: bool(c_flag.get(u, False)))
    if not is_connected(S, adjacency) or not separates(S, c0):
        return False
    flagged = 0
    for v in S:
        j, k = v[:-1], v[-1]
        parents = [tuple(a + b for a, b in zip(j, w)) + (k - 1,)
                   for w in itertools.product((-1, 0, 1), repeat=len(j))]
        if any(flag(u) for u in parents):
            flagged += 1
    return 6 * flagged >= len(S)


# ------------------------------------------------------------------ covering sets

def covering_constant(d: int) -> int:
    return 2 * 7 * (8 * d + 5) ** d


def _doubling_walk(S: list[Vertex]) -> list[Vertex]:
    """Depth-first tour of a spanning tree of ``S`` (sup-adjacency); visits every vertex."""
    members = set(S)
    root = min(S)
    walk = [root]
    seen = {root}
    vecs = _linf_vectors(len(root))

    def visit(v):
        for w in sorted(tuple(a + b for a, b in zip(v, u)) for u in vecs):
            if w in members and w not in seen:
                seen.add(w)
                walk.append(w)
                visit(w)
                walk.append(v)

    visit(root)
    if len(seen) != len(members):
        raise ValueError("set is not connected")
    return walk


def star_blocks(S: Iterable[Sequence[int]], d: int) -> set[Vertex]:
    """Hat-block indices ``(i', k)`` with ``||i' - j|| <= 4d - 1`` for some ``(j, k + 1)`` in S."""
    r = 4 * d - 1
    out = set()
    for v in S:
        j, k = v[:-1], v[-1]
        for w in itertools.product(range(-r, r + 1), repeat=d):
            out.add(tuple(a + b for a, b in zip(j, w)) + (k - 1,))
    return out


@dataclass
class CoveringReport:
    size: int
    bound: float
    connected: bool
    covers: bool
    within_bound: bool
    walk_length: int
    samples: int

    @property
    def passed(self) -> bool:
        return self.connected and self.covers and self.within_bound


def covering_set(S: Iterable[Sequence[int]], p: int, r: int, nu: int,
                 geom: BlockGeometry) -> tuple[set[Vertex], CoveringReport]:
    """Connected set of coarse ``(nu * Delta_r)``-blocks covering the hat-blocks near ``S``."""
    if r < p:
        raise ValueError(f"need r >= p, got r={r}, p={p}")
    if nu < 1:
        raise ValueError("nu must be >= 1")
    S = sorted({tuple(int(c) for c in v) for v in S})
    if not S:
        raise ValueError("S must be nonempty")
    d = geom.d
    walk = _doubling_walk(S)
    a = len(walk) - 1
    mu = nu * geom.C0 ** (6 * (r - p))
    dp, dr = geom.delta(p), geom.delta(r)
    side = nu * dr
    tspan = p ** geom.q * dp
    rs, rt = 4 * d + 2, 3 * p ** geom.q
    lam: set[Vertex] = set()
    samples = 0
    for jj in range(a // mu + 1):
        v = walk[jj * mu]
        samples += 1
        m = tuple((c * dp) // side for c in v[:-1])
        u = (v[-1] * tspan) // side
        for w in itertools.product(range(-rs, rs + 1), repeat=d):
            base = tuple(x + y for x, y in zip(m, w))
            for du in range(-rt, rt + 1):
                lam.add(base + (u + du,))
    # coverage: every coarse block meeting a hat-block of the star set must be present
    covers = True
    for blk in star_blocks(S, d):
        i, k = blk[:-1], blk[-1]
        ranges = [range((c * dp) // side, ((c + 1) * dp - 1) // side + 1) for c in i]
        ranges.append(range((k * tspan) // side, ((k + 1) * tspan - 1) // side + 1))
        if any(cell not in lam for cell in itertools.product(*ranges)):
            covers = False
            break
    bound = covering_constant(d) * (len(S) * dp / (nu * dr) + 1) * p ** geom.q
    rep = CoveringReport(len(lam), bound, is_connected(lam, "nn"), covers, len(lam) <= bound,
                         a, samples)
    return lam, rep


def write_block_csv(path, rows: Sequence[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "lambda", "edges_tested", "edges_open", "lemma6_violations"])
        for r in rows:
            w.writerow([r["p"], repr(float(r["lambda"])), r["edges_tested"], r["edges_open"],
                        r["lemma6_violations"]])


# ------------------------------------------------------------------ batch drivers

@dataclass
class BoundarySuiteResult:
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def boundary_suite(dim: int, max_size: int, random_sets: int = 0, random_max: int = 12,
                   seed: int = 0, adjacency: str = "linf") -> BoundarySuiteResult:
    """Boundary bounds for every connected subset of ``[0,2]^dim x [0,2]`` with at most
    ``max_size`` points, then for ``random_sets`` random connected sets of up to
    ``random_max`` points."""
    res = BoundarySuiteResult()
    for A in connected_subsets((2,) * (dim + 1), max_size):
        rep = verify_boundary_bounds(A, adjacency)
        res.checked += 1
        if not rep.passed:
            res.failures.append((A, rep.witness))
    rng = np.random.default_rng(seed)
    for _ in range(random_sets):
        A = random_animal(int(rng.integers(1, random_max + 1)), dim + 1, rng)
        rep = verify_boundary_bounds(A, adjacency)
        res.checked += 1
        if not rep.passed:
            res.failures.append((tuple(sorted(A)), rep.witness))
    return res


def default_block_config(lam: float = 0.01, seed: int = 0, replica: int = 0) -> SimConfig:
    """d=1 window wide enough for columns -4..4 at p=1, C0=2 with the seed at m(0)."""
    return SimConfig(d=1, D=1.0, lam=lam, mu_A=1.0, L=640, T=1.0, seed=seed, replica=replica,
                     initial_B="midpoint", p=1, C0=2)


def block_runs(lam: float, runs: int, seed: int = 0, levels: int = 4,
               columns: Sequence[int] = tuple(range(-4, 5))) -> list[dict]:
    geom = BlockGeometry(1, 2)
    rows = []
    for r in range(runs):
        res = block_experiment(default_block_config(lam, seed, r), 1, geom, levels,
                               [(c,) for c in columns])
        rows.append({"p": 1, "lambda": lam, "edges_tested": res.edges_tested,
                     "edges_open": res.edges_open, "lemma6_violations": res.violations})
    return rows
