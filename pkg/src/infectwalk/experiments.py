"""Monte Carlo survival estimates, coupled rate sweeps and diagnostic studies.

Replica ``r`` of a config runs with ``replica=r``; all of its randomness
derives from ``(seed, r)``, so every estimate is reproducible and the
aggregate does not depend on scheduling.  Set ``INFECTWALK_WORKERS`` to run
replicas in that many processes.
"""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.stats import binomtest

from .engine import SimConfig, _initial_particles, build_world, site_coords, step_to, summarize, survives
from .lattice import BlockGeometry, BlockIndex, block_region
from .randomness import poisson_field, site_codes

WORKERS_ENV = "INFECTWALK_WORKERS"


class NonMonotoneCurve(RuntimeError):
    """Survival rose with the recuperation rate beyond statistical noise."""


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def fingerprint(cfg: SimConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SurvivalEstimate:
    config: SimConfig
    replicas: int
    survivors: int
    ci_lo: float
    ci_hi: float
    mean_ext_time: float | None
    indicators: np.ndarray = field(repr=False, default=None)
    ext_times: np.ndarray = field(repr=False, default=None)

    @property
    def p_hat(self) -> float:
        return self.survivors / self.replicas

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.config)

    def row(self) -> dict:
        c = self.config
        return {"lambda": c.lam, "T": c.T, "L": c.L, "replicas": self.replicas,
                "survivors": self.survivors, "p_hat": self.p_hat, "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi, "mean_ext_time": self.mean_ext_time}


def _one(cfg: SimConfig) -> tuple[bool, float]:
    alive, t_ext = survives(cfg)
    return alive, (math.nan if t_ext is None else t_ext)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_replicas(configs: Sequence[SimConfig]) -> tuple[np.ndarray, np.ndarray]:
    """Survival indicator and extinction time (nan if alive) per config, in input order."""
    n = _workers()
    if n > 1 and len(configs) > 1:
        with ProcessPoolExecutor(n) as ex:
            out = list(ex.map(_one, configs, chunksize=max(1, len(configs) // (4 * n))))
    else:
        out = [_one(c) for c in configs]
    alive = np.array([a for a, _ in out], dtype=bool)
    ext = np.array([t for _, t in out], dtype=np.float64)
    return alive, ext


def aggregate(cfg: SimConfig, alive: np.ndarray, ext: np.ndarray) -> SurvivalEstimate:
    n = int(alive.shape[0])
    k = int(alive.sum())
    lo, hi = wilson_interval(k, n)
    dead = ext[~alive]
    mean_ext = float(dead.mean()) if dead.size else None
    return SurvivalEstimate(cfg, n, k, lo, hi, mean_ext, alive, ext)


def estimate_survival(cfg: SimConfig, replicas: int, T: float | None = None) -> SurvivalEstimate:
    """Fraction of replicas with a B-particle at time ``T`` (default ``cfg.T``)."""
    if replicas < 1:
        raise ValueError("need at least one replica")
    if T is not None:
        cfg = replace(cfg, T=float(T))
    alive, ext = run_replicas([replace(cfg, replica=r) for r in range(replicas)])
    return aggregate(cfg, alive, ext)


@dataclass
class CoupledSweep:
    lams: list[float]
    estimates: list[SurvivalEstimate]
    indicators: np.ndarray  # replicas x len(lams)
    violations: int          # replicas whose indicator rises with lambda


def coupled_sweep(cfg: SimConfig, lams: Sequence[float], replicas: int,
                  base: float | None = None) -> CoupledSweep:
    """Survival at each rate on shared walks and nested recuperation clocks."""
    lams = sorted(float(l) for l in lams)
    base = max(lams) if base is None else base
    if base < max(lams):
        raise ValueError("clock base must dominate every rate")
    ests = []
    for lam in lams:
        c = replace(cfg, lam=lam, clock_base=base if base > 0 else None)
        ests.append(estimate_survival(c, replicas))
    ind = np.stack([e.indicators for e in ests], axis=1)
    viol = int(np.count_nonzero(np.any(ind[:, 1:] & ~ind[:, :-1], axis=1))) if len(lams) > 1 else 0
    return CoupledSweep(lams, ests, ind, viol)


@dataclass
class LambdaBracket:
    low: float | None
    high: float | None
    curve: list[SurvivalEstimate]
    monotone_violations: int
    floor: float

    @property
    def resolution(self) -> float | None:
        if self.low is None or self.high is None:
            return None
        return self.high - self.low


def _alarm(curve: Sequence[SurvivalEstimate]) -> None:
    for a, b in zip(curve, curve[1:]):
        if b.ci_lo > a.ci_hi:
            raise NonMonotoneCurve(f"survival rises from {a.p_hat:.3f} at lambda={a.config.lam} "
                                   f"to {b.p_hat:.3f} at lambda={b.config.lam}")


def bracket_lambda_c(cfg: SimConfig, grid: Sequence[float], replicas: int,
                     bisections: int = 0, floor: float = 0.0) -> LambdaBracket:
    """Bracket the rate where finite-horizon survival stops being significantly above ``floor``.

    ``low`` is the largest evaluated rate whose Wilson lower bound exceeds
    ``floor``; ``high`` is the next evaluated rate above it.  Extra
    bisection steps reuse the same seeds and clock base as the grid.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty grid")
    base = max(grid)
    sweep = coupled_sweep(cfg, grid, replicas, base=base)
    curve = dict(zip(grid, sweep.estimates))
    violations = sweep.violations

    def split():
        lams = sorted(curve)
        alive = [l for l in lams if curve[l].ci_lo > floor]
        low = max(alive) if alive else None
        above = [l for l in lams if low is None or l > low]
        high = min(above) if above else None
        if low is None:
            high = None if not above or curve[above[0]].ci_lo > floor else above[0]
        return low, high

    for _ in range(bisections):
        low, high = split()
        if low is None or high is None:
            break
        mid = 0.5 * (low + high)
        est = estimate_survival(replace(cfg, lam=mid, clock_base=base), replicas)
        curve[mid] = est
        lams = sorted(curve)
        ind = np.stack([curve[l].indicators for l in lams], axis=1)
        violations = int(np.count_nonzero(np.any(ind[:, 1:] & ~ind[:, :-1], axis=1)))
    ordered = [curve[l] for l in sorted(curve)]
    _alarm(ordered)
    low, high = split()
    return LambdaBracket(low, high, ordered, violations, floor)


# ------------------------------------------------------------------ variant studies

def survival_over_horizons(cfg: SimConfig, horizons: Sequence[float], replicas: int) -> list[SurvivalEstimate]:
    """One run per replica to the longest horizon, read off at each horizon."""
    Tmax = max(horizons)
    alive, ext = run_replicas([replace(cfg, T=float(Tmax), replica=r) for r in range(replicas)])
    out = []
    for T in horizons:
        a = np.isnan(ext) | (ext > T)
        e = np.where(a, np.nan, ext)
        out.append(aggregate(replace(cfg, T=float(T)), a, e))
    return out


def polyominoes(max_size: int) -> list[list[frozenset]]:
    """Fixed nearest-neighbour lattice animals in Z^2 by size, anchored at their least cell.

    Redelmeier's enumeration; ``out[n]`` holds the animals with ``n`` cells.
    """
    out: list[list[frozenset]] = [[] for _ in range(max_size + 1)]

    def ok(c):
        return c[1] > 0 or (c[1] == 0 and c[0] >= 0)

    def nbrs(c):
        x, y = c
        return [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]

    def grow(cells, untried, seen):
        out[len(cells)].append(frozenset(cells))
        if len(cells) == max_size:
            return
        untried = list(untried)
        while untried:
            c = untried.pop()
            new = [n for n in nbrs(c) if ok(n) and n not in seen]
            grow(cells + [c], untried + new, seen | set(new))

    grow([], [(0, 0)], {(0, 0)})
    out[0] = []
    return out


def animals_through_origin(k0: int, cap: int) -> list[frozenset]:
    shapes = polyominoes(cap)
    sets = set()
    for n in range(max(k0, 1), cap + 1):
        for s in shapes[n]:
            for c in s:
                sets.add(frozenset((x - c[0], y - c[1]) for x, y in s))
    return sorted(sets, key=lambda s: (len(s), sorted(s)))


def mass_violation_frequency(mu_A: float, k0: int, cap: int, samples: int, seed: int) -> float:
    """Frequency of Poisson fields with a connected set ``C`` through 0,
    ``k0 <= |C| <= cap``, holding fewer than ``mu_A |C| / 2`` particles."""
    animals = animals_through_origin(k0, cap)
    if not animals:
        return 0.0
    R = cap
    cells = [(x, y) for x in range(-R, R + 1) for y in range(-R, R + 1)]
    col = {c: n for n, c in enumerate(cells)}
    rows, cols = [], []
    for r, a in enumerate(animals):
        for c in a:
            rows.append(r)
            cols.append(col[c])
    M = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(animals), len(cells)))
    sizes = np.array([len(a) for a in animals], dtype=np.float64)
    codes = site_codes(np.array(cells))
    bad = 0
    for s in range(samples):
        counts = poisson_field(np.uint64(seed * 1_000_003 + s), codes, float(mu_A)).astype(np.float64)
        mass = M @ counts
        bad += bool(np.any(mass < 0.5 * mu_A * sizes))
    return bad / samples


def pedestal_survival(lam: float, mu_A: float, T: float, replicas: int, seed: int,
                      r: int = 1, C0: int = 2, D: float = 1.0) -> SurvivalEstimate:
    """d=1 system made only of the particles of one pedestal plus a B at its centre."""
    geom = BlockGeometry(1, C0)
    reg = block_region(BlockIndex((0,), 1, r, "pedestal"), geom)
    lo, hi = reg.lo[0], reg.hi[0]
    centre = (lo + hi) // 2
    L = max(abs(lo), abs(hi)) + 1
    cfg = SimConfig(d=1, D=D, lam=lam, mu_A=mu_A, L=L, T=T, seed=seed,
                    initial_B="explicit", initial_sites=((centre,),), convert_at_seed=False)
    alive, ext = [], []
    for rep in range(replicas):
        c = replace(cfg, replica=rep)
        uid, site, ptype, seeded = _initial_particles(c)
        x = site_coords(site, 1, L)[:, 0]
        keep = ((x >= lo) & (x < hi)) | seeded
        w = build_world(c, uid[keep], site[keep], ptype[keep], seeded[keep])
        step_to(w, T, log=False, stop_when_extinct=True)
        s = summarize(w)
        alive.append(s.survived)
        ext.append(math.nan if s.extinction_time is None else s.extinction_time)
    return aggregate(cfg, np.array(alive), np.array(ext))


@dataclass
class StudySettings:
    replicas: int = 500
    seed: int = 1
    # (a) frog model with removal, d=1
    removal_mu: float = 3.0
    removal_lams: tuple = (0.1,)
    removal_horizons: tuple = (100.0, 300.0, 500.0)
    removal_L: int = 1000
    # (b) frog model with reinsertion, d=2
    reinsertion_mu: float = 8.0
    reinsertion_lams: tuple = (1.0, 10.0, 100.0)
    reinsertion_T: float = 20.0
    reinsertion_L: int = 12
    # (c) mass of connected sets
    mass_mu: float = 8.0
    mass_k0s: tuple = (2, 4, 6)
    mass_cap: int = 8
    mass_samples: int = 500
    # (d) isolated pedestal
    pedestal_lams: tuple = (0.05, 0.2, 1.0)
    pedestal_mu: float = 1.0
    pedestal_T: float = 64.0


def variant_studies(settings: StudySettings | None = None, which: Iterable[str] = "abcd") -> dict:
    s = settings or StudySettings()
    rep: dict = {}
    if "a" in which:
        rows = {}
        for lam in s.removal_lams:
            cfg = SimConfig(d=1, lam=lam, mu_A=s.removal_mu, L=s.removal_L, seed=s.seed,
                            variant="frog-removal")
            rows[lam] = survival_over_horizons(cfg, s.removal_horizons, s.replicas)
        rep["a"] = rows
    if "b" in which:
        rows = {}
        for lam in s.reinsertion_lams:
            cfg = SimConfig(d=2, lam=lam, mu_A=s.reinsertion_mu, L=s.reinsertion_L,
                            T=s.reinsertion_T, seed=s.seed, variant="frog-reinsertion")
            rows[lam] = estimate_survival(cfg, s.replicas)
        rep["b"] = rows
    if "c" in which:
        rep["c"] = {k0: mass_violation_frequency(s.mass_mu, k0, s.mass_cap, s.mass_samples, s.seed)
                    for k0 in s.mass_k0s}
    if "d" in which:
        rep["d"] = {lam: pedestal_survival(lam, s.pedestal_mu, s.pedestal_T, s.replicas, s.seed)
                    for lam in s.pedestal_lams}
    return rep


# ------------------------------------------------------------------ convergence

@dataclass
class ConvergenceReport:
    L_pair: tuple[SurvivalEstimate, SurvivalEstimate]
    L_disagreement: float
    discrete: dict           # n -> SurvivalEstimate
    continuous: SurvivalEstimate
    gaps: dict               # n -> |p_n - p_cont|
    disagreement: dict       # n -> fraction of replicas whose indicator differs


def discrete_config(cfg: SimConfig, n) -> SimConfig:
    """``n = inf`` (or None) means the continuous-time engine."""
    if n is None or n == math.inf:
        return replace(cfg, variant="standard", n=None)
    return replace(cfg, variant="discrete-n", n=int(n))


def convergence_checks(cfg: SimConfig, replicas: int, ns: Sequence = (4, 16, 64)) -> ConvergenceReport:
    small = estimate_survival(cfg, replicas)
    big = estimate_survival(replace(cfg, L=2 * cfg.L), replicas)
    Ldis = float(np.mean(small.indicators != big.indicators))
    cont = estimate_survival(discrete_config(cfg, None), replicas)
    disc, gaps, dis = {}, {}, {}
    for n in ns:
        e = estimate_survival(discrete_config(cfg, n), replicas)
        disc[n] = e
        gaps[n] = abs(e.p_hat - cont.p_hat)
        dis[n] = float(np.mean(e.indicators != cont.indicators))
    return ConvergenceReport((small, big), Ldis, disc, cont, gaps, dis)


# ------------------------------------------------------------------ output

CSV_FIELDS = ["lambda", "T", "L", "replicas", "survivors", "p_hat", "ci_lo", "ci_hi", "mean_ext_time"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_survival_csv(path, estimates: Iterable[SurvivalEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for e in estimates:
            r = e.row()
            w.writerow([_fmt(r[k]) for k in CSV_FIELDS])
