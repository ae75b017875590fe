"""Event-driven A/B infection dynamics on a finite window of Z^d.

The window is ``[-L, L]^d`` with torus or reflecting boundary.  Sites are
flattened to ``s = sum_a (x_a + L) * W**a`` with ``W = 2L + 1``.  Particles
are indexed ``0..N-1`` in increasing order of their stable ``uid``; that
index is the particle id used in logs and in the ``(time, id)`` tie-break.

Usage::

    cfg = SimConfig(d=2, lam=0.5, mu_A=1.0, L=16, T=50.0, seed=7)
    world, log, summary = run_variant(cfg)
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterator, Sequence

import numpy as np

from . import _kernel as K
from .lattice import BlockGeometry, midpoint
from .randomness import (
    MAX_SLOT,
    exp_gap,
    geometric_steps,
    next_tick,
    particle_uid,
    poisson_field,
    replica_seed,
    site_codes,
    walk_uniforms,
)

VARIANTS = (
    "standard",
    "coincidence-infection",
    "no-recuperation-instant",
    "frog-removal",
    "frog-reinsertion",
    "discrete-n",
)
BOUNDARIES = ("torus", "reflecting")
INITIAL_B = ("origin", "midpoint", "explicit")

A, B, IMMUNE = K.TYPE_A, K.TYPE_B, K.TYPE_IMMUNE
TYPE_NAMES = {A: "A", B: "B", IMMUNE: "Immune"}

JUMP, INFECTION, TICK, RECOVERY = K.EV_JUMP, K.EV_INFECTION, K.EV_TICK, K.EV_RECOVERY
KIND_NAMES = {JUMP: "jump", INFECTION: "infection", TICK: "recuperation-tick",
              RECOVERY: "recuperation-effective"}

# (coincidence, frog, removal, recuperation)
_RULES = {
    "standard": (0, 0, 0, 1),
    "coincidence-infection": (1, 0, 0, 1),
    "no-recuperation-instant": (1, 0, 0, 0),
    "frog-removal": (0, 1, 1, 1),
    "frog-reinsertion": (1, 1, 0, 1),
    "discrete-n": (0, 0, 0, 1),
}

MAX_DIM = 3


class InvariantViolation(RuntimeError):
    """A mathematical invariant failed; indicates a bug rather than bad luck."""


@dataclass(frozen=True)
class SimConfig:
    d: int = 2
    D: float = 1.0
    lam: float = 0.0
    mu_A: float = 0.0
    L: int = 16
    boundary: str = "torus"
    T: float = 10.0
    seed: int = 0
    replica: int = 0
    variant: str = "standard"
    n: int | None = None
    initial_B: str = "origin"
    initial_sites: tuple = ()
    convert_at_seed: bool = True
    # rate of the marked clock process that recuperation clocks are thinned from;
    # runs sharing it (and seeds) have nested clocks
    clock_base: float | None = None
    # scale and C0 for midpoint seeding
    p: int = 1
    C0: int = 2

    def __post_init__(self):
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"d must be in 1..{MAX_DIM}, got {self.d}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.L >= (1 << 17):
            raise ValueError("L too large for site identities")
        if not self.T >= 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.D > 0:
            raise ValueError(f"D must be > 0, got {self.D}")
        if not self.mu_A >= 0:
            raise ValueError(f"mu_A must be >= 0, got {self.mu_A}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.initial_B not in INITIAL_B:
            raise ValueError(f"initial_B must be one of {INITIAL_B}, got {self.initial_B!r}")
        if self.variant == "discrete-n":
            if self.n is None or int(self.n) < 1:
                raise ValueError("discrete-n needs a positive step granularity n")
            if self.D / self.n > 1:
                raise ValueError(f"D/n = {self.D / self.n} exceeds 1")
        if self.clock_base is not None and self.clock_base < self.lam:
            raise ValueError(f"clock_base {self.clock_base} below lambda {self.lam}")
        object.__setattr__(self, "initial_sites",
                           tuple(tuple(int(c) for c in x) for x in self.initial_sites))
        if self.initial_B == "explicit":
            if not self.initial_sites:
                raise ValueError("explicit initial_B needs initial_sites")
            for x in self.initial_sites:
                if len(x) != self.d or max(abs(c) for c in x) > self.L:
                    raise ValueError(f"initial site {x} outside the window")

    @property
    def W(self) -> int:
        return 2 * self.L + 1

    @property
    def n_sites(self) -> int:
        return self.W ** self.d

    @property
    def run_seed(self) -> int:
        return replica_seed(self.seed, self.replica)

    @property
    def base(self) -> float:
        return float(self.lam if self.clock_base is None else self.clock_base)

    @property
    def rules(self) -> tuple[int, int, int, int]:
        return _RULES[self.variant]

    def seed_sites(self) -> list[tuple[int, ...]]:
        if self.initial_B == "origin":
            return [(0,) * self.d]
        if self.initial_B == "midpoint":
            m = midpoint((0,) * self.d, self.p, BlockGeometry(self.d, self.C0))
            if max(m) > self.L:
                raise ValueError(f"midpoint {m} outside window of radius {self.L}")
            return [m]
        return list(self.initial_sites)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["initial_sites"] = [list(x) for x in self.initial_sites]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise KeyError(f"unknown config key {key!r}")
        data = dict(data)
        if "initial_sites" in data:
            data["initial_sites"] = tuple(tuple(x) for x in data["initial_sites"])
        return cls(**data)


# ------------------------------------------------------------------ geometry helpers

def site_index(x: Sequence[int], L: int) -> int:
    W = 2 * L + 1
    s = 0
    for a, c in enumerate(x):
        s += (int(c) + L) * W ** a
    return s


def site_coords(s, d: int, L: int) -> np.ndarray:
    """Coordinates of flattened site(s); shape ``(..., d)``."""
    s = np.asarray(s, dtype=np.int64)
    W = 2 * L + 1
    return np.stack([(s // W ** a) % W - L for a in range(d)], axis=-1)


# ------------------------------------------------------------------ immutable views

def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Snapshot:
    """Positions and types at one instant; arrays are read-only copies."""

    time: float
    d: int
    L: int
    sites: np.ndarray
    types: np.ndarray
    uids: np.ndarray
    seeded: np.ndarray

    @property
    def coords(self) -> np.ndarray:
        return site_coords(self.sites, self.d, self.L)

    def b_count(self) -> int:
        return int(np.count_nonzero(self.types == B))

    def occupancy(self) -> dict[tuple[int, ...], list[int]]:
        occ: dict[tuple[int, ...], list[int]] = {}
        for pid, x in enumerate(map(tuple, self.coords.tolist())):
            occ.setdefault(x, []).append(pid)
        return occ

    def b_sites(self) -> set[tuple[int, ...]]:
        c = self.coords[self.types == B]
        return set(map(tuple, c.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (self.time == other.time and self.d == other.d and self.L == other.L
                and np.array_equal(self.sites, other.sites)
                and np.array_equal(self.types, other.types)
                and np.array_equal(self.uids, other.uids)
                and np.array_equal(self.seeded, other.seeded))

    __hash__ = None


@dataclass(frozen=True)
class EventLog:
    """Ordered records ``(time, kind, actor, partner, src, dst)``.

    ``actor`` is the particle that jumped (jump), was infected (infection)
    or recuperated (recuperation-effective).  ``partner`` is the infecting
    particle of an infection record, else -1.  Sites are flattened indices.
    """

    start: Snapshot
    end_time: float
    time: np.ndarray
    kind: np.ndarray
    actor: np.ndarray
    partner: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    removal: bool = False

    def __len__(self) -> int:
        return int(self.time.shape[0])

    def records(self) -> Iterator[tuple[float, int, int, int, int, int]]:
        cols = (self.time.tolist(), self.kind.tolist(), self.actor.tolist(),
                self.partner.tolist(), self.src.tolist(), self.dst.tolist())
        return zip(*cols)

    def coords(self, s) -> np.ndarray:
        return site_coords(s, self.start.d, self.start.L)

    def replay(self, until: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Positions and types after all records with time <= ``until``."""
        sites = np.array(self.start.sites)
        types = np.array(self.start.types)
        for t, k, a, _, _, y in self.records():
            if until is not None and t > until:
                break
            if k == JUMP:
                sites[a] = y
            elif k == INFECTION:
                types[a] = B
            elif k == RECOVERY:
                types[a] = IMMUNE if self.removal else A
        return sites, types

    def to_rows(self) -> list[dict]:
        return [dict(time=t, kind=KIND_NAMES[k], actor=a, partner=p, src=s, dst=y)
                for t, k, a, p, s, y in self.records()]


def _concat_logs(start: Snapshot, end: float, parts: list[tuple], removal: bool) -> EventLog:
    cols = [np.concatenate([p[j] for p in parts]) if parts else np.empty(0)
            for j in range(6)]
    dtypes = (np.float64, np.int8, np.int64, np.int64, np.int64, np.int64)
    cols = [_frozen(c.astype(dt)) for c, dt in zip(cols, dtypes)]
    return EventLog(start, end, *cols, removal=removal)


@dataclass
class Summary:
    seed: int
    replica: int
    variant: str
    d: int
    D: float
    lam: float
    mu_A: float
    L: int
    T: float
    survived: bool
    extinction_time: float | None
    max_B: int
    final_B: int
    B_extent: int

    def to_json_line(self) -> str:
        rec = {"seed": self.seed, "replica": self.replica, "variant": self.variant,
               "d": self.d, "D": self.D, "lambda": self.lam, "muA": self.mu_A,
               "L": self.L, "T": self.T, "survived": self.survived,
               "extinction_time": self.extinction_time, "max_B": self.max_B,
               "final_B": self.final_B}
        return json.dumps(rec, sort_keys=False)


# ------------------------------------------------------------------ mutable world

_LOG_CHUNK = 1 << 16


@dataclass
class WorldState:
    config: SimConfig
    uid: np.ndarray
    site: np.ndarray
    ptype: np.ndarray
    seeded: np.ndarray
    jcount: np.ndarray
    jstep: np.ndarray
    evt: np.ndarray
    heap: np.ndarray
    hkey: np.ndarray
    hpos: np.ndarray
    head: np.ndarray
    nxt: np.ndarray
    prv: np.ndarray
    cnt: np.ndarray
    nb: np.ndarray
    pw: np.ndarray
    st: np.ndarray
    sf: np.ndarray
    V: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    j_origin: tuple | None = None
    j_values: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def clock(self) -> float:
        return float(self.sf[K.F_T])

    @property
    def b_count(self) -> int:
        return int(self.st[K.S_NB])

    @property
    def n_particles(self) -> int:
        return int(self.uid.shape[0])

    @property
    def extinction_time(self) -> float | None:
        t = float(self.sf[K.F_EXT])
        return None if t < 0 else t

    @property
    def jmax(self) -> int:
        return int(self.st[K.S_JMAX])

    def coords(self) -> np.ndarray:
        return site_coords(self.site, self.config.d, self.config.L)

    def occupancy(self) -> dict[tuple[int, ...], list[int]]:
        return snapshot(self).occupancy()

    def check(self) -> None:
        """Assert the structural invariants; raises InvariantViolation."""
        cfg = self.config
        if self.b_count != int(np.count_nonzero(self.ptype == B)):
            raise InvariantViolation("B-count out of sync with particle types")
        if np.any(self.site < 0) or np.any(self.site >= cfg.n_sites):
            raise InvariantViolation("particle outside the window")
        seen = np.zeros(self.n_particles, dtype=np.int64)
        for s in np.unique(self.site):
            q = self.head[s]
            while q >= 0:
                if self.site[q] != s:
                    raise InvariantViolation(f"particle {q} listed at wrong site")
                seen[q] += 1
                q = self.nxt[q]
        if np.any(seen != 1):
            raise InvariantViolation("particle missing from or repeated in occupancy")
        if not np.array_equal(np.bincount(self.site, minlength=cfg.n_sites), self.cnt):
            raise InvariantViolation("site counts out of sync")
        if cfg.variant != "frog-removal" and np.any(self.ptype == IMMUNE):
            raise InvariantViolation("Immune particle outside the frog-removal variant")

    def enable_jtrack(self, x: Sequence[int] | None = None) -> None:
        """Start tracking the maximal J-path jump count from ``(x, now)``."""
        x = (0,) * self.config.d if x is None else tuple(x)
        s0 = site_index(x, self.config.L)
        self.V = np.where(self.site == s0, 0, -1).astype(np.int64)
        self.st[K.S_JMAX] = 0
        self.st[K.S_CP] = 0
        self.j_origin = x


def _flags(cfg: SimConfig, log_on: bool, j_on: bool, stop: bool) -> np.ndarray:
    coinc, frog, removal, recup = cfg.rules
    ip = np.zeros(12, dtype=np.int64)
    ip[K.P_D] = cfg.d
    ip[K.P_W] = cfg.W
    ip[K.P_L] = cfg.L
    ip[K.P_BOUNDARY] = BOUNDARIES.index(cfg.boundary)
    ip[K.P_COINC] = coinc
    ip[K.P_FROG] = frog
    ip[K.P_REMOVAL] = removal
    ip[K.P_RECUP] = recup
    ip[K.P_NDISC] = int(cfg.n) if cfg.variant == "discrete-n" else 0
    ip[K.P_STOP] = int(stop)
    ip[K.P_LOG] = int(log_on)
    ip[K.P_JON] = int(j_on)
    return ip


def _fparams(cfg: SimConfig) -> np.ndarray:
    return np.array([cfg.D, cfg.lam, cfg.base], dtype=np.float64)


def _initial_particles(cfg: SimConfig):
    """Initial (uid, site, type, seeded) arrays, unsorted."""
    seed = np.uint64(cfg.run_seed)
    d, L, W = cfg.d, cfg.L, cfg.W
    S = cfg.n_sites
    idx = np.arange(S, dtype=np.int64)
    coords = site_coords(idx, d, L)
    codes = site_codes(coords)
    if cfg.mu_A > 0:
        counts = poisson_field(seed, codes, float(cfg.mu_A))
        if counts.max(initial=0) > MAX_SLOT - 8:
            raise ValueError("site occupancy exceeds the particle slot range")
    else:
        counts = np.zeros(S, dtype=np.int64)
    site = np.repeat(idx, counts)
    first = np.cumsum(counts) - counts
    slot = np.arange(site.shape[0], dtype=np.int64) - np.repeat(first, counts)
    uid = (np.repeat(codes.astype(np.uint64), counts) << np.uint64(10)) | slot.astype(np.uint64)
    ptype = np.zeros(site.shape[0], dtype=np.int8)
    seeded = np.zeros(site.shape[0], dtype=bool)

    extra_uid, extra_site = [], []
    per_site: dict[int, int] = {}
    for x in cfg.seed_sites():
        s = site_index(x, L)
        j = per_site.get(s, 0)
        per_site[s] = j + 1
        extra_uid.append(particle_uid(int(codes[s]), MAX_SLOT - j))
        extra_site.append(s)
    uid = np.concatenate([uid, np.array(extra_uid, dtype=np.uint64)])
    site = np.concatenate([site, np.array(extra_site, dtype=np.int64)])
    ptype = np.concatenate([ptype, np.full(len(extra_uid), B, dtype=np.int8)])
    seeded = np.concatenate([seeded, np.ones(len(extra_uid), dtype=bool)])
    if cfg.convert_at_seed and extra_site:
        ptype[np.isin(site, np.array(extra_site))] = B
    return uid, site, ptype, seeded


def build_world(cfg: SimConfig, uid, site, ptype, seeded, t0: float = 0.0,
                jcount=None, jstep=None, pending=None) -> WorldState:
    """World from explicit particles at time ``t0``.

    Without ``pending`` every mobile particle draws its first jump afresh.
    Passing ``jcount``, ``jstep`` and ``pending`` (next jump times) continues
    existing walks instead.  Coincidence variants start from the
    configuration in which every particle sharing a site with a B is B.
    """
    uid = np.asarray(uid, dtype=np.uint64)
    order = np.argsort(uid, kind="stable")
    uid = uid[order]
    if uid.shape[0] and np.any(uid[1:] == uid[:-1]):
        raise ValueError("duplicate particle uid")
    site = np.asarray(site, dtype=np.int64)[order]
    ptype = np.asarray(ptype, dtype=np.int8)[order].copy()
    seeded = np.asarray(seeded, dtype=bool)[order]
    if pending is not None:
        jcount = np.asarray(jcount, dtype=np.int64)[order].copy()
        jstep = np.asarray(jstep, dtype=np.int64)[order].copy()
        pending = np.asarray(pending, dtype=np.float64)[order]
    N = uid.shape[0]
    S = cfg.n_sites
    if S == 0:
        raise ValueError("empty window")
    if N and (site.min() < 0 or site.max() >= S):
        raise ValueError("particle outside window")
    coinc, frog, removal, recup = cfg.rules
    if coinc and N:
        bsites = np.unique(site[ptype == B])
        ptype[np.isin(site, bsites) & (ptype == A)] = B

    head = np.full(S, -1, dtype=np.int64)
    nxt = np.full(N, -1, dtype=np.int64)
    prv = np.full(N, -1, dtype=np.int64)
    # particles are already in increasing id order; build each site list in that order
    tail = np.full(S, -1, dtype=np.int64)
    for p in range(N):
        s = site[p]
        if tail[s] < 0:
            head[s] = p
        else:
            nxt[tail[s]] = p
            prv[p] = tail[s]
        tail[s] = p
    cnt = np.bincount(site, minlength=S).astype(np.int64)
    nb = np.bincount(site[ptype == B], minlength=S).astype(np.int64)

    seed = np.uint64(cfg.run_seed)
    evt = np.full(2 * N, np.inf)
    nd = int(cfg.n) if cfg.variant == "discrete-n" else 0
    if pending is None:
        jcount = np.zeros(N, dtype=np.int64)
        jstep = np.full(N, int(round(t0 * nd)) if nd else 0, dtype=np.int64)
    for p in range(N):
        mobile = ptype[p] != IMMUNE and not (frog and ptype[p] == A)
        if mobile and pending is not None:
            evt[2 * p] = pending[p]
        elif mobile:
            ug, _ = walk_uniforms(seed, uid[p], np.int64(0))
            if nd:
                jstep[p] += geometric_steps(ug, cfg.D / nd)
                evt[2 * p] = jstep[p] / nd
            else:
                evt[2 * p] = t0 + exp_gap(ug, cfg.D)
        if recup and ptype[p] == B and (not coinc or cnt[site[p]] == 1):
            evt[2 * p + 1] = next_tick(seed, uid[p], cfg.base, float(cfg.lam), float(t0),
                                       False, float(cfg.T))
    eids = np.arange(2 * N, dtype=np.int64)
    heap = np.lexsort((eids, evt)).astype(np.int64)
    hpos = np.empty(2 * N, dtype=np.int64)
    hpos[heap] = eids
    hkey = evt[heap].copy()

    nB = int(np.count_nonzero(ptype == B))
    st = np.zeros(6, dtype=np.int64)
    st[K.S_NB] = nB
    st[K.S_MAXB] = nB
    sf = np.array([t0, -1.0, 0.0])
    if nB == 0:
        sf[K.F_EXT] = t0
    else:
        sf[K.F_RAD] = float(np.abs(site_coords(site[ptype == B], cfg.d, cfg.L)).max())
    pw = np.array([cfg.W ** a for a in range(cfg.d)], dtype=np.int64)
    return WorldState(cfg, uid, site, ptype, seeded, jcount, jstep, evt, heap, hkey, hpos,
                      head, nxt, prv, cnt, nb, pw, st, sf)


def init_world(cfg: SimConfig) -> WorldState:
    return build_world(cfg, *_initial_particles(cfg))


def build_sub_world(world: WorldState, members, types, **changes) -> WorldState:
    """Restriction of ``world`` to particles ``members`` with new ``types``.

    Walks continue exactly as in ``world`` (same streams, same pending
    jumps).  ``changes`` override config fields, e.g. ``variant`` or ``lam``.
    """
    members = np.asarray(members, dtype=np.int64)
    if np.any(np.isinf(world.evt[2 * members])):
        raise ValueError("restriction needs every member to have a pending jump")
    cfg = replace(world.config, clock_base=None, **changes)
    return build_world(cfg, world.uid[members], world.site[members], types,
                       world.seeded[members], t0=world.clock, jcount=world.jcount[members],
                       jstep=world.jstep[members], pending=world.evt[2 * members])


def snapshot(world: WorldState) -> Snapshot:
    cfg = world.config
    return Snapshot(world.clock, cfg.d, cfg.L, _frozen(world.site), _frozen(world.ptype),
                    _frozen(world.uid), _frozen(world.seeded))


def step_to(world: WorldState, T: float, *, log: bool = True, stop_when_extinct: bool = False,
            checkpoints: Sequence[float] | None = None) -> tuple[WorldState, EventLog | None]:
    """Advance ``world`` in place to time ``T``.

    With ``stop_when_extinct`` the run halts at the extinction instant.
    ``checkpoints`` (increasing times) records the tracked J value at each
    time; see ``WorldState.enable_jtrack`` and ``world.j_values``.
    """
    cfg = world.config
    if T < world.clock:
        raise ValueError(f"cannot step back from {world.clock} to {T}")
    start = snapshot(world) if log else None
    j_on = world.j_origin is not None
    cps = np.asarray(checkpoints if checkpoints is not None else [], dtype=np.float64)
    if cps.size and np.any(np.diff(cps) < 0):
        raise ValueError("checkpoints must be increasing")
    jout = np.full(cps.shape[0], -1, dtype=np.int64)
    world.st[K.S_CP] = 0
    ip = _flags(cfg, log, j_on, stop_when_extinct)
    fp = _fparams(cfg)
    cap = _LOG_CHUNK if log else 1
    parts = []
    V = world.V if j_on else np.zeros(world.n_particles, dtype=np.int64)
    while True:
        bufs = (np.empty(cap), np.empty(cap, np.int8), np.empty(cap, np.int64),
                np.empty(cap, np.int64), np.empty(cap, np.int64), np.empty(cap, np.int64))
        world.st[K.S_LLEN] = 0
        status = K.run(ip, fp, np.uint64(cfg.run_seed), float(T),
                       world.uid, world.site, world.ptype, world.jcount, world.jstep, V,
                       world.evt, world.heap, world.hkey, world.hpos,
                       world.head, world.nxt, world.prv, world.cnt, world.nb, world.pw,
                       *bufs, cps, jout, world.st, world.sf)
        n = int(world.st[K.S_LLEN])
        if log:
            parts.append(tuple(b[:n] for b in bufs))
        if status != K.STATUS_LOG_FULL:
            break
        cap = min(cap * 2, 1 << 24)
    world.j_values = jout
    out = None
    if log:
        out = _concat_logs(start, world.clock, parts, cfg.rules[2] == 1)
    return world, out


def summarize(world: WorldState) -> Summary:
    cfg = world.config
    return Summary(cfg.seed, cfg.replica, cfg.variant, cfg.d, cfg.D, cfg.lam, cfg.mu_A, cfg.L,
                   cfg.T, world.b_count > 0, world.extinction_time, int(world.st[K.S_MAXB]),
                   world.b_count, int(world.sf[K.F_RAD]))


def run_variant(cfg: SimConfig, *, log: bool = True, stop_when_extinct: bool = False):
    """Run ``cfg`` from time 0 to ``cfg.T``; returns ``(world, log, summary)``."""
    world = init_world(cfg)
    world, ev = step_to(world, cfg.T, log=log, stop_when_extinct=stop_when_extinct)
    return world, ev, summarize(world)


def survives(cfg: SimConfig) -> tuple[bool, float | None]:
    """Fast survival indicator and extinction time (no log, stops at extinction)."""
    world, _, s = run_variant(cfg, log=False, stop_when_extinct=True)
    return s.survived, s.extinction_time


def with_replica(cfg: SimConfig, replica: int, **changes) -> SimConfig:
    return replace(cfg, replica=replica, **changes)
