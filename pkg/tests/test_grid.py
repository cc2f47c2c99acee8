from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactamr.grid import (
    BCSet,
    GridPatch,
    IndexBox,
    Level,
    average_down,
    build_hierarchy,
    fill_all_ghosts,
    fill_ghosts,
    gradient_tags,
    index_offset,
    initialize,
    regrid,
    tile_partition,
)


def _boxes(h, level):
    return [p.box for p in h.levels[level].patches]


def _cover(h, level):
    cov = np.zeros(h.domain_box(level).shape, dtype=int)
    for b in _boxes(h, level):
        cov[b.slices((0,) * h.dim)] += 1
    return cov


# ------------------------------------------------------------------ indexing


def test_index_offset_formula():
    p = GridPatch(IndexBox((0,), (7,)), n_comp=3, n_ghost=0)
    assert index_offset(p, (3,), 2) == 3 + 2 * 8
    assert index_offset(p, (0,), 0) == 0


def test_index_offset_is_bijective():
    p = GridPatch(IndexBox((0, 0), (3, 3)), n_comp=2, n_ghost=0)
    offs = {index_offset(p, (i, j), c) for i in range(4) for j in range(4) for c in range(2)}
    assert offs == set(range(32))


def test_index_offset_rejects_out_of_range():
    p = GridPatch(IndexBox((0, 0), (3, 3)), n_comp=2, n_ghost=1)
    with pytest.raises(IndexError):
        index_offset(p, (5, 0), 0)
    with pytest.raises(IndexError):
        index_offset(p, (0, 0), 2)
    assert index_offset(p, (-1, -1), 0) == 0


@settings(max_examples=100, deadline=None)
@given(
    st.integers(-20, 20),
    st.integers(-20, 20),
    st.integers(2, 9),
    st.integers(1, 9),
    st.integers(0, 3),
    st.integers(1, 5),
    st.data(),
)
def test_column_major_strides(lx, ly, nx, ny, ng, nc, data):
    p = GridPatch(IndexBox((lx, ly), (lx + nx - 1, ly + ny - 1)), nc, ng)
    i = data.draw(st.integers(lx - ng, lx + nx + ng - 2))
    j = data.draw(st.integers(ly - ng, ly + ny + ng - 1))
    c = data.draw(st.integers(0, nc - 1))
    o = index_offset(p, (i, j), c)
    assert index_offset(p, (i + 1, j), c) == o + 1
    if c + 1 < nc:
        assert index_offset(p, (i, j), c + 1) == o + p.N_pad
    # the array view and the flat storage agree
    p.data[o] = 42.0
    assert p.array()[i - lx + ng, j - ly + ng, c] == 42.0


def test_patch_storage_length_checked():
    with pytest.raises(ValueError):
        GridPatch(IndexBox((0,), (7,)), 2, 2, data=np.zeros(5))


# ------------------------------------------------------------------ building


def test_exact_tiling_of_base_level():
    h = build_hierarchy((0, 0), (1, 1), (64, 64), 0, 8, 32)
    assert len(h.levels) == 1
    assert sorted((b.lo, b.hi) for b in _boxes(h, 0)) == [
        ((0, 0), (31, 31)),
        ((0, 32), (31, 63)),
        ((32, 0), (63, 31)),
        ((32, 32), (63, 63)),
    ]


def test_no_tags_means_no_fine_level():
    h = build_hierarchy((0, 0), (1, 1), (32, 32), 2, 8, 16, tag=lambda l, c: np.zeros(c[0].shape, bool))
    assert len(h.levels) == 1


def test_domain_must_respect_blocking_factor():
    with pytest.raises(ValueError, match="blocking factor"):
        build_hierarchy((0, 0), (1, 1), (60, 64), 0, 8, 32)
    with pytest.raises(ValueError, match="power of two"):
        build_hierarchy((0, 0), (1, 1), (48, 48), 0, 6, 24)
    with pytest.raises(ValueError):
        build_hierarchy((0, 0), (1, 1), (64, 64), 0, 8, 20)


def _stripe_tag(level, c):
    return np.abs(c[0] - 0.37) < 0.05


@pytest.mark.parametrize("r", [2, 4])
def test_tagged_stripe_is_covered(r):
    h = build_hierarchy((0, 0), (1, 1), (64, 64), 1, 8, 32, tag=_stripe_tag, ref_ratio=r)
    assert len(h.levels) == 2
    tagged = _stripe_tag(0, h.cell_centers(0, h.domain_box(0)))
    fine_tagged = np.kron(tagged, np.ones((r, r), dtype=bool))
    cov = _cover(h, 1)
    assert np.all(cov[fine_tagged] == 1)
    assert cov.max() == 1  # non-overlapping
    for b in _boxes(h, 1):
        assert all(n % 8 == 0 for n in b.shape)
        assert all(lo % 8 == 0 for lo in b.lo)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8]), st.sampled_from([16, 32]))
def test_hierarchy_invariants_for_random_tags(seed, bf, mgs):
    rng = np.random.default_rng(seed)
    spots = rng.random((3, 2))

    def tag(level, c):
        d = np.min([(c[0] - x) ** 2 + (c[1] - y) ** 2 for x, y in spots], axis=0)
        return d < 0.01 / (level + 1)

    h = build_hierarchy((0, 0), (1, 1), (32, 32), 2, bf, mgs, tag=tag)
    for lev in range(len(h.levels)):
        assert _cover(h, lev).max() == 1
        for b in _boxes(h, lev):
            assert all(n % bf == 0 for n in b.shape)
            assert all(n <= mgs for n in b.shape)
        if lev > 0:
            coarse = _cover(h, lev - 1) > 0
            fine = _cover(h, lev) > 0
            assert np.all(np.kron(coarse, np.ones((2, 2), bool))[fine])


# ------------------------------------------------------------------ ghosts


def _linear(c):
    return np.stack([1.0 + 2.0 * c[0] - 3.0 * c[1], 5.0 + 0.5 * c[0]], axis=-1)


def test_uniform_field_fills_uniform_ghosts():
    h = build_hierarchy((0, 0), (1, 1), (32, 32), 1, 8, 16, tag=_stripe_tag, n_comp=2)
    initialize(h, lambda c: np.full(c[0].shape + (2,), 7.25))
    fill_all_ghosts(h, BCSet.uniform("outflow", 2))
    for pid in h.patch_ids():
        assert np.all(h.patch(pid).data == 7.25)


def test_linear_field_reproduced_at_coarse_fine_boundary():
    def tag(level, c):
        return (np.abs(c[0] - 0.5) < 0.1) & (np.abs(c[1] - 0.5) < 0.1)

    h = build_hierarchy((0, 0), (1, 1), (64, 64), 1, 8, 32, tag=tag, n_comp=2)
    initialize(h, _linear)
    fill_all_ghosts(h, BCSet.uniform("outflow", 2))
    checked = 0
    for p in h.levels[1].patches:
        centers = h.cell_centers(1, p.padded_box)
        err = np.abs(p.array() - _linear(centers))
        assert err.max() <= 1e-12
        checked += p.N_pad - p.box.size
    assert checked > 0


def test_same_level_neighbours_supply_ghosts():
    h = build_hierarchy((0,), (1,), (32,), 0, 8, 16, n_comp=1)
    initialize(h, lambda c: (10.0 * c[0] ** 2)[..., None])
    fill_ghosts(h, 0, BCSet.uniform("outflow", 1))
    left, right = h.levels[0].patches
    assert np.array_equal(left.comp(0)[-2:], right.comp(0)[2:4])
    assert np.array_equal(right.comp(0)[:2], left.comp(0)[-4:-2])


def test_wall_reflects_normal_velocity():
    h = build_hierarchy((0,), (1,), (8,), 0, 8, 8, n_comp=2)
    initialize(h, lambda c: np.stack([np.full(c[0].shape, 1.2), np.full(c[0].shape, 3.0)], axis=-1))
    fill_ghosts(h, 0, BCSet.uniform("wall", 1, reflect_comps=(1,)))
    a = h.levels[0].patches[0].array()
    assert np.all(a[:2, 1] == -3.0) and np.all(a[-2:, 1] == -3.0)
    assert np.all(a[:2, 0] == 1.2)


def test_periodic_wraps():
    h = build_hierarchy((0,), (1,), (16,), 0, 8, 16, n_comp=1)
    initialize(h, lambda c: np.arange(16.0)[:, None])
    fill_ghosts(h, 0, BCSet.uniform("periodic", 1))
    a = h.levels[0].patches[0].comp(0)
    assert list(a[:2]) == [14.0, 15.0] and list(a[-2:]) == [0.0, 1.0]


def test_uncovered_base_level_is_an_error():
    h = build_hierarchy((0,), (1,), (32,), 0, 8, 16)
    h.levels[0].patches.pop()
    with pytest.raises(ValueError, match="uncovered"):
        fill_ghosts(h, 0, BCSet.uniform("outflow", 1))


def test_unknown_boundary_kind_rejected():
    with pytest.raises(ValueError):
        BCSet.uniform("sticky", 1)


# ------------------------------------------------------------------ average down


def _two_level(r=2, n_comp=1):
    return build_hierarchy((0, 0), (1, 1), (16, 16), 1, 4, 16, tag=lambda l, c: c[0] < 0.3, n_comp=n_comp, ref_ratio=r)


def test_average_down_uniform():
    h = _two_level()
    initialize(h, lambda c: np.full(c[0].shape + (1,), 4.0))
    average_down(h, 1)
    assert np.all(h.levels[0].patches[0].comp(0)[h.levels[0].patches[0].interior] == 4.0)


def test_average_down_quartet():
    h = _two_level()
    f = h.levels[1].patches[0]
    q = f.comp(0)[f.interior]
    q[0::2, 0::2], q[1::2, 0::2], q[0::2, 1::2], q[1::2, 1::2] = 1.0, 2.0, 3.0, 4.0
    average_down(h, 1)
    c = h.levels[0].patches[0]
    covered = c.comp(0)[c.interior][f.box.coarsen(2).slices(c.box.lo)]
    assert covered.size > 0 and np.all(covered == 2.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_average_down_preserves_integral(seed, r):
    rng = np.random.default_rng(seed)
    h = _two_level(r)
    for p in h.levels[1].patches:
        p.comp(0)[p.interior] = rng.random(p.box.shape) * 10
    fine = sum(p.comp(0)[p.interior].sum() for p in h.levels[1].patches) * np.prod(h.dx(1))
    average_down(h, 1)
    mask = np.zeros(h.domain_box(0).shape, bool)
    for p in h.levels[1].patches:
        mask[p.box.coarsen(r).slices((0, 0))] = True
    c = h.levels[0].patches[0]
    coarse = c.comp(0)[c.interior][mask].sum() * np.prod(h.dx(0))
    assert abs(coarse - fine) <= 1e-13 * abs(fine)


# ------------------------------------------------------------------ regrid


def _step_field(c):
    return np.where(c[0] < 0.55, 300.0, 1500.0)[..., None]


def test_regrid_uniform_field_removes_fine_level():
    h = _two_level()
    initialize(h, lambda c: np.full(c[0].shape + (1,), 1.0))
    new = regrid(h, BCSet.uniform("outflow", 2), 0, 0.5)
    assert len(new.levels) == 1


def test_regrid_refines_across_step():
    h = build_hierarchy((0, 0), (1, 1), (32, 32), 1, 8, 16, n_comp=1)
    initialize(h, _step_field)
    bc = BCSet.uniform("outflow", 2)
    mask = gradient_tags(h, 0, bc, 0, 100.0)
    cols = np.flatnonzero(mask.any(axis=1))
    assert list(cols) == [17, 18]  # the jump sits at x = 17.6 cells
    new = regrid(h, bc, 0, 100.0)
    assert len(new.levels) == 2
    cov = _cover(new, 1)
    assert np.all(cov[34:38, :] == 1)
    initialize(new, _step_field)
    again = regrid(new, bc, 0, 100.0)
    assert _boxes(again, 1) == _boxes(new, 1)
    for a, b in zip(again.levels[1].patches, new.levels[1].patches):
        assert np.array_equal(a.array()[a.interior], b.array()[b.interior])


def test_regrid_keeps_existing_fine_data():
    h = build_hierarchy((0, 0), (1, 1), (32, 32), 1, 8, 16, tag=lambda l, c: np.abs(c[0] - 0.55) < 0.05, n_comp=1)
    initialize(h, _step_field)
    marker = h.levels[1].patches[0]
    marker.comp(0)[marker.interior][0, 0] = 1234.5
    new = regrid(h, BCSet.uniform("outflow", 2), 0, 100.0)
    found = [p for p in new.levels[1].patches if p.box.contains(marker.box.lo)]
    (p,) = found
    idx = tuple(l - pl for l, pl in zip(marker.box.lo, p.box.lo))
    assert p.comp(0)[p.interior][idx] == 1234.5


# ------------------------------------------------------------------ tiling


def _level(*boxes):
    return Level([GridPatch(b, 1, 0) for b in boxes], (1.0, 1.0), 1)


def test_single_patch_single_tile():
    plan = tile_partition(_level(IndexBox((0, 0), (31, 31))), (32, 32), 8, 64)
    assert [b for _, b in plan.tiles] == [IndexBox((0, 0), (31, 31))]


def test_large_patch_four_tiles():
    plan = tile_partition(_level(IndexBox((0, 0), (63, 63))), (32, 32), 8, 64)
    assert len(plan.tiles) == 4 and all(b.shape == (32, 32) for _, b in plan.tiles)


def test_mixed_patches_balanced():
    lev = _level(IndexBox((0, 0), (63, 63)), IndexBox((64, 0), (95, 31)))
    plan = tile_partition(lev, (64, 64), 8, 64)
    sizes = [b.size for _, b in plan.tiles]
    assert max(sizes) / min(sizes) <= 2


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 8), st.integers(1, 8)), min_size=1, max_size=6),
    st.integers(1, 8),
    st.integers(1, 8),
)
def test_tiles_partition_patches(shapes, tx, ty):
    bf = 8
    boxes, x0 = [], 0
    for nx, ny in shapes:
        boxes.append(IndexBox((x0, 0), (x0 + nx * bf - 1, ny * bf - 1)))
        x0 += nx * bf
    lev = _level(*boxes)
    plan = tile_partition(lev, (tx * bf, ty * bf), bf, 64)
    sizes = [b.size for _, b in plan.tiles]
    assert max(sizes) / min(sizes) <= 2
    for i, b in enumerate(boxes):
        cov = np.zeros(b.shape, int)
        for t in plan.for_patch(i):
            assert b.intersect(t) == t
            cov[t.slices(b.lo)] += 1
        assert np.all(cov == 1)
