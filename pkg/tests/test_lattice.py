import pytest
from hypothesis import given, strategies as st

from infectwalk.lattice import (
    BlockGeometry,
    BlockIndex,
    block_region,
    bottom_box,
    cube_contains,
    linf_norm,
    midpoint,
    r_block_of,
    t_of,
)

G1 = BlockGeometry(1, 2)


@pytest.mark.parametrize("x,expected", [((0, 0), 0), ((3, -5), 5), ((-2, -2, -2), 2)])
def test_linf_norm(x, expected):
    assert linf_norm(x) == expected


@pytest.mark.parametrize("m,x,expected", [(1, (1, 1), True), (1, (2, 0), False), (0, (0,), True)])
def test_cube_contains(m, x, expected):
    assert cube_contains(m, x) is expected


def test_hat_block_d1():
    r = block_region(BlockIndex((0,), 0, 1, "hat-block"), G1)
    assert (r.lo, r.hi, r.t_lo, r.t_hi) == ((0,), (64,), 0, 64)


def test_bottom_d1():
    r = block_region(BlockIndex((0,), 0, 1, "bottom"), G1)
    assert (r.lo, r.hi, r.t_lo, r.instant) == ((-320,), (384,), 0, True)


def test_pedestal_d1():
    r = block_region(BlockIndex((0,), 1, 1, "pedestal"), G1)
    assert (r.lo, r.hi, r.t_lo) == ((-192,), (256,), 0)


def test_midpoint_and_t_of():
    assert midpoint((0,), 1, G1) == (32,)
    assert midpoint((-1,), 1, G1) == (-32,)
    assert t_of(2, 1, G1) == 128


def test_geometry_rejections():
    with pytest.raises(ValueError):
        BlockGeometry(1, 3)
    with pytest.raises(ValueError):
        G1.delta(0)
    with pytest.raises(ValueError):
        BlockIndex((0,), 0, 1, "slab")


def test_q_and_time_span():
    g = BlockGeometry(2, 2)
    assert g.q == 5
    assert g.time_span(2) == 2 ** 5 * 2 ** 12


coord = st.integers(-300, 300)


@given(st.lists(coord, min_size=1, max_size=3), st.integers(0, 500), st.integers(1, 2))
def test_r_blocks_partition(x, t, r):
    g = BlockGeometry(len(x), 2)
    b = r_block_of(x, t, r, g)
    reg = block_region(b, g)
    assert reg.contains(x, t)
    # neighbouring blocks do not contain the point
    for s in range(len(x)):
        for step in (-1, 1):
            i = list(b.i)
            i[s] += step
            assert not block_region(BlockIndex(tuple(i), b.k, r, "r-block"), g).contains(x, t)
    assert not block_region(BlockIndex(b.i, b.k + 1, r, "r-block"), g).contains(x, t)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=3), st.integers(0, 3))
def test_midpoint_inside_hat_block(i, k):
    g = BlockGeometry(len(i), 2)
    reg = block_region(BlockIndex(tuple(i), k, 1, "hat-block"), g)
    assert reg.contains_site(midpoint(i, 1, g))


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=2))
def test_bottom_holds_active_cube(i):
    g = BlockGeometry(len(i), 2)
    m = midpoint(i, 1, g)
    box = bottom_box(i, 1, g)
    a = g.active_radius(1)
    for corner in ((-a,) * len(i), (a,) * len(i)):
        assert box.contains_site(tuple(c + o for c, o in zip(m, corner)))
