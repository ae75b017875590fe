"""Counter-based random streams.

Every draw is a pure function of ``(seed, uid, purpose, counters...)``: the
key is folded through a chain of SplitMix64 finalizers.  Nothing is sequential,
so two simulations that share a seed see identical per-particle randomness no
matter how their events interleave.

Recuperation clocks are marked Poisson processes on ``[0, inf) x [0, base)``.
The rate-``lam`` clock keeps the points whose mark is below ``lam``; thinning
to a smaller rate is therefore an exact subset.  The mark axis is cut into
dyadic strips and each strip is binned in time, which gives random access to
"first tick at or after s" without replaying earlier ticks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIN_RATE_RATIO = 2.0 ** -40
N_STRIPS = 20  # dyadic strips; the last one covers marks in [0, base * 2**-N_STRIPS)


class Purpose(IntEnum):
    WALK = 1
    RECUPERATION = 2
    INIT_FIELD = 3
    REPLICA = 4
    AUX = 5


# ---------------------------------------------------------------- pure Python reference

def mix64_py(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_key_py(seed: int, uid: int, purpose: int, a: int = 0, b: int = 0, c: int = 0) -> int:
    h = mix64_py((seed & MASK64) ^ GOLDEN)
    for part in (uid, purpose, a, b, c):
        h = mix64_py((h + GOLDEN) ^ (part & MASK64))
    return h


def u01_py(h: int) -> float:
    return (h >> 11) * 2.0**-53


# ---------------------------------------------------------------- compiled primitives

@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def hash_key(seed, uid, purpose, a, b, c):
    g = np.uint64(GOLDEN)
    h = mix64(np.uint64(seed) ^ g)
    h = mix64((h + g) ^ np.uint64(uid))
    h = mix64((h + g) ^ np.uint64(purpose))
    h = mix64((h + g) ^ np.uint64(a))
    h = mix64((h + g) ^ np.uint64(b))
    h = mix64((h + g) ^ np.uint64(c))
    return h


@njit(cache=True)
def u01(h):
    """Uniform on [0, 1) with 53 bits."""
    return np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def u01_open(h):
    """Uniform on (0, 1]; safe under ``log``."""
    return 1.0 - u01(h)


@njit(cache=True)
def poisson_from_u(u, mean):
    # inverse CDF; means here are O(1)-O(10)
    p = math.exp(-mean)
    cdf = p
    k = 0
    while u > cdf and k < 100000:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0:
            break
    return k


@njit(cache=True)
def walk_uniforms(seed, uid, counter):
    """The two uniforms behind jump ``counter`` of a particle: (gap, direction)."""
    ug = u01_open(hash_key(seed, uid, 1, counter, 0, 0))
    ud = u01(hash_key(seed, uid, 1, counter, 1, 0))
    return ug, ud


@njit(cache=True)
def exp_gap(ug, rate):
    return -math.log(ug) / rate


@njit(cache=True)
def geometric_steps(ug, prob):
    """Number of lazy steps (>= 1) up to and including the next move."""
    if prob >= 1.0:
        return 1
    g = math.ceil(math.log(ug) / math.log1p(-prob))
    if g < 1:
        g = 1
    return g


@njit(cache=True)
def direction_index(ud, d):
    k = int(ud * 2 * d)
    if k >= 2 * d:
        k = 2 * d - 1
    return k


@njit(cache=True)
def strip_bounds(base, j):
    if j >= N_STRIPS:
        return 0.0, base * 2.0 ** (-N_STRIPS)
    return base * 2.0 ** (-(j + 1)), base * 2.0 ** (-j)


@njit(cache=True)
def next_tick(seed, uid, base, lam, s, strict, cap):
    """First clock point with mark < ``lam`` at time >= s (> s if ``strict``).

    Returns ``inf`` if there is none up to ``cap``.
    """
    if lam <= 0.0 or base <= 0.0:
        return np.inf
    best = np.inf
    for j in range(N_STRIPS + 1):
        lo, hi = strip_bounds(base, j)
        if lo >= lam:
            continue
        width = hi - lo
        w = 1.0 / width
        b = int(math.floor(s / w))
        if b < 0:
            b = 0
        while True:
            start = b * w
            if start >= best or start > cap:
                break
            k = poisson_from_u(u01(hash_key(seed, uid, 2, j, b, 0)), 1.0)
            found = False
            for m in range(k):
                t = (b + u01(hash_key(seed, uid, 2, j, b, 2 * m + 1))) * w
                if t < s or (strict and t <= s) or t >= best:
                    continue
                mark = lo + u01(hash_key(seed, uid, 2, j, b, 2 * m + 2)) * width
                if mark < lam:
                    best = t
                    found = True
            if found:
                break
            b += 1
    if best > cap:
        return np.inf
    return best


@njit(cache=True)
def poisson_field(seed, codes, mean):
    out = np.zeros(codes.shape[0], dtype=np.int64)
    for n in range(codes.shape[0]):
        out[n] = poisson_from_u(u01(hash_key(seed, codes[n], 3, 0, 0, 0)), mean)
    return out


# ---------------------------------------------------------------- site / particle identities

COORD_BITS = 18
COORD_OFFSET = 1 << (COORD_BITS - 1)
SLOT_BITS = 10
MAX_SLOT = (1 << SLOT_BITS) - 1


def site_code(x) -> int:
    """Injective 54-bit code of a site with ``|x_s| < 2**17`` and ``d <= 3``."""
    code = 0
    for s, c in enumerate(x):
        c = int(c)
        if not -COORD_OFFSET < c < COORD_OFFSET:
            raise ValueError(f"coordinate {c} outside the encodable range")
        code |= (c + COORD_OFFSET) << (COORD_BITS * s)
    return code


def site_codes(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2 or coords.shape[1] > 3:
        raise ValueError("site codes support 1 <= d <= 3")
    if coords.size and np.abs(coords).max() >= COORD_OFFSET:
        raise ValueError("coordinate outside the encodable range")
    code = np.zeros(coords.shape[0], dtype=np.int64)
    for s in range(coords.shape[1]):
        code |= (coords[:, s] + COORD_OFFSET) << (COORD_BITS * s)
    return code


def particle_uid(code: int, slot: int) -> int:
    """Stable id of the ``slot``-th particle at a site; seed-added particles count down from MAX_SLOT."""
    if not 0 <= slot <= MAX_SLOT:
        raise ValueError(f"slot {slot} out of range")
    return (int(code) << SLOT_BITS) | slot


def replica_seed(seed: int, replica: int) -> int:
    """Per-replica master seed; every stream of a replica is keyed by it."""
    h = hash_key_py(seed, replica, Purpose.REPLICA)
    return h & ((1 << 63) - 1)


# ---------------------------------------------------------------- public draw API

@dataclass(frozen=True)
class StreamKey:
    seed: int
    uid: int
    purpose: Purpose
    counter: int = 0

    def uniform(self) -> float:
        return u01_py(hash_key_py(self.seed, self.uid, int(self.purpose), self.counter))


def sample_poisson_field(sites, mu_a: float, seed: int) -> dict[tuple[int, ...], int]:
    """I.i.d. Poisson(``mu_a``) counts on ``sites`` keyed by site identity."""
    if not mu_a > 0:
        raise ValueError(f"mu_A must be positive, got {mu_a}")
    sites = [tuple(int(c) for c in x) for x in sites]
    if not sites:
        return {}
    counts = poisson_field(np.uint64(seed), site_codes(np.array(sites)), float(mu_a))
    return dict(zip(sites, counts.tolist()))


def next_jump(uid: int, current_time: float, D: float, d: int, seed: int, counter: int):
    """Time and unit step of jump number ``counter`` of particle ``uid``.

    The direction is returned as a length-``d`` tuple with one entry of +-1.
    """
    if not D > 0:
        raise ValueError(f"jump rate must be positive, got {D}")
    ug, ud = walk_uniforms(np.uint64(seed), np.uint64(uid), np.int64(counter))
    k = direction_index(ud, d)
    step = [0] * d
    step[k // 2] = 1 if k % 2 else -1
    return current_time + exp_gap(ug, D), tuple(step)


@dataclass(frozen=True)
class RecuperationClock:
    """Potential recuperation times of one particle.

    ``base`` is the rate of the underlying marked process; the clock ticks at
    the points with mark below ``rate``.  Clocks with the same
    ``(seed, uid, base)`` are nested by rate.
    """

    seed: int
    uid: int
    rate: float
    base: float | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if self.base is None:
            object.__setattr__(self, "base", float(self.rate))
        if self.rate > self.base:
            raise ValueError(f"rate {self.rate} exceeds base rate {self.base}")
        if 0 < self.rate < self.base * MIN_RATE_RATIO:
            # the catch-all strip would need ~base/rate empty bins per search
            raise ValueError(f"rate {self.rate} too small relative to base {self.base}")

    def first_at_or_after(self, s: float, cap: float = np.inf) -> float:
        return next_tick(np.uint64(self.seed), np.uint64(self.uid), float(self.base),
                         float(self.rate), float(s), False, float(cap))

    def ticks(self, t0: float, t1: float) -> list[float]:
        """All ticks in ``[t0, t1]``, increasing."""
        out = []
        t = self.first_at_or_after(t0, t1)
        while t <= t1:
            out.append(t)
            t = next_tick(np.uint64(self.seed), np.uint64(self.uid), float(self.base),
                          float(self.rate), t, True, float(t1))
        return out


def thin_clock(clock: RecuperationClock, lam1: float) -> RecuperationClock:
    """Rate-``lam1`` clock whose ticks are a subset of ``clock``'s ticks.

    Each tick of ``clock`` survives independently with probability
    ``lam1 / clock.rate`` (its mark is uniform below ``clock.rate``).
    """
    if lam1 > clock.rate:
        raise ValueError(f"cannot thin rate {clock.rate} up to {lam1}")
    if lam1 < 0:
        raise ValueError("rate must be nonnegative")
    return RecuperationClock(clock.seed, clock.uid, float(lam1), clock.base)
