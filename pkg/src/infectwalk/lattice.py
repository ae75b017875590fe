"""Integer-lattice geometry: sup-norm, cubes and space-time blocks at every scale.

All regions are products of half-open integer intervals, so membership is a
handful of integer comparisons.  Time coordinates of block regions are
integers as well (``k * p**q * Delta_p`` and friends).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

KINDS = ("r-block", "hat-block", "bottom", "pedestal")


def linf_norm(x: Sequence[int]) -> int:
    return max((abs(int(c)) for c in x), default=0)


def cube_contains(m: int, x: Sequence[int]) -> bool:
    """True iff ``x`` lies in the cube ``[-m, m]^d``."""
    return linf_norm(x) <= m


@dataclass(frozen=True)
class BlockGeometry:
    """Scale constants shared by every block construction.

    ``C0`` must be an even integer >= 2.  Small values keep block experiments
    tractable; the asymptotic arguments need ``C0`` large.
    """

    d: int
    C0: int = 2

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.C0 < 2 or self.C0 % 2:
            raise ValueError(f"C0 must be an even integer >= 2, got {self.C0}")

    @property
    def q(self) -> int:
        return 2 * self.d + 1

    def delta(self, r: int) -> int:
        if r < 1:
            raise ValueError(f"scale must be positive, got {r}")
        return self.C0 ** (6 * r)

    def time_span(self, p: int) -> int:
        """Temporal height ``p**q * Delta_p`` of a hat-block."""
        return p ** self.q * self.delta(p)

    def active_radius(self, p: int) -> int:
        # Delta_p / 8, floored; Delta_p is a multiple of 8 only when C0 >= 2 (2**6 = 64)
        return self.delta(p) // 8


@dataclass(frozen=True)
class BlockIndex:
    i: tuple[int, ...]
    k: int
    scale: int
    kind: str = "hat-block"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        object.__setattr__(self, "i", tuple(int(c) for c in self.i))


@dataclass(frozen=True)
class Region:
    """Half-open box ``prod [lo_s, hi_s)`` times a time set.

    The time set is ``[t_lo, t_hi)`` or, when ``instant`` is set, the single
    time ``t_lo``.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]
    t_lo: int
    t_hi: int
    instant: bool = False

    def contains_site(self, x: Sequence[int]) -> bool:
        return all(a <= c < b for a, c, b in zip(self.lo, x, self.hi))

    def contains(self, x: Sequence[int], t) -> bool:
        if self.instant:
            in_time = t == self.t_lo
        else:
            in_time = self.t_lo <= t < self.t_hi
        return in_time and self.contains_site(x)

    @property
    def side_lengths(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def sites(self) -> np.ndarray:
        """Materialize the spatial part as an ``(n, d)`` integer array (tests only)."""
        axes = [np.arange(a, b) for a, b in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


def block_region(b: BlockIndex, geom: BlockGeometry) -> Region:
    if len(b.i) != geom.d:
        raise ValueError(f"block index has {len(b.i)} coordinates, geometry has d={geom.d}")
    s = b.scale
    delta = geom.delta(s)
    if b.kind == "hat-block":
        span = geom.time_span(s)
        return Region(
            tuple(c * delta for c in b.i),
            tuple((c + 1) * delta for c in b.i),
            b.k * span,
            (b.k + 1) * span,
        )
    if b.kind == "r-block":
        return Region(
            tuple(c * delta for c in b.i),
            tuple((c + 1) * delta for c in b.i),
            b.k * delta,
            (b.k + 1) * delta,
        )
    if b.kind == "bottom":
        w = 4 * geom.d
        t = b.k * geom.time_span(s)
        return Region(
            tuple((c - w - 1) * delta for c in b.i),
            tuple((c + w + 2) * delta for c in b.i),
            t,
            t,
            instant=True,
        )
    # pedestal
    t = (b.k - 1) * delta
    return Region(
        tuple((c - 3) * delta for c in b.i),
        tuple((c + 4) * delta for c in b.i),
        t,
        t,
        instant=True,
    )


def bottom_box(i: Sequence[int], p: int, geom: BlockGeometry) -> Region:
    """Spatial set ``Z_p(i)`` (time fields are zero)."""
    r = block_region(BlockIndex(tuple(i), 0, p, "bottom"), geom)
    return Region(r.lo, r.hi, 0, 0, instant=True)


def midpoint(i: Sequence[int], p: int, geom: BlockGeometry) -> tuple[int, ...]:
    delta = geom.delta(p)
    # C0 even makes Delta_p even, so the half-offset is integral
    return tuple(int(c) * delta + delta // 2 for c in i)


def t_of(k: int, p: int, geom: BlockGeometry) -> int:
    return k * geom.time_span(p)


def r_block_of(x: Sequence[int], t, r: int, geom: BlockGeometry) -> BlockIndex:
    """The unique r-block containing the space-time point ``(x, t)``."""
    delta = geom.delta(r)
    return BlockIndex(tuple(int(c) // delta for c in x), int(np.floor(t / delta)), r, "r-block")
