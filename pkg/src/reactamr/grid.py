"""Block-structured patch hierarchy.

Every patch stores its components in one flat array with column-major
(Fortran-style) layout: all padded cells of component 0, then component 1,
and so on, with the x index varying fastest.  Component ``c`` of padded flat
cell ``j`` sits at ``j + c * N_pad``.

Ghost filling and regridding work through per-level
"canvases": dense arrays that span the whole (refined) domain plus ghosts.
A canvas for level ``l`` is built by interpolating the level ``l-1`` canvas,
overwriting with level ``l`` patch interiors and applying domain boundary
conditions.  Patches then copy their ghost regions out of it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

BC_KINDS = ("wall", "periodic", "outflow")


@dataclass(frozen=True)
class IndexBox:
    lo: tuple[int, ...]
    hi: tuple[int, ...]  # inclusive

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi) or any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"invalid box {self.lo}..{self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def grow(self, n: int) -> IndexBox:
        return IndexBox(tuple(l - n for l in self.lo), tuple(h + n for h in self.hi))

    def refine(self, r: int) -> IndexBox:
        return IndexBox(tuple(l * r for l in self.lo), tuple((h + 1) * r - 1 for h in self.hi))

    def coarsen(self, r: int) -> IndexBox:
        return IndexBox(tuple(l // r for l in self.lo), tuple(h // r for h in self.hi))

    def intersect(self, other: IndexBox) -> IndexBox | None:
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(l > h for l, h in zip(lo, hi)):
            return None
        return IndexBox(lo, hi)

    def contains(self, cell: Sequence[int]) -> bool:
        return all(l <= c <= h for l, c, h in zip(self.lo, cell, self.hi))

    def slices(self, origin: Sequence[int]) -> tuple[slice, ...]:
        """Slices selecting this box inside an array whose [0,..] is ``origin``."""
        return tuple(slice(l - o, h - o + 1) for l, h, o in zip(self.lo, self.hi, origin))


class GridPatch:
    """One rectangular grid with ghost-padded, column-major component storage."""

    def __init__(
        self,
        box: IndexBox,
        n_comp: int,
        n_ghost: int = 2,
        data: np.ndarray | None = None,
        solid: np.ndarray | None = None,
    ) -> None:
        self.box = box
        self.n_comp = n_comp
        self.n_ghost = n_ghost
        self.padded_box = box.grow(n_ghost)
        self.N_pad = self.padded_box.size
        if data is None:
            data = np.zeros(self.N_pad * n_comp)
        if data.shape != (self.N_pad * n_comp,):
            raise ValueError("patch data has the wrong length")
        self.data = data
        # solid flags over interior cells (array shaped like box), or None
        self.solid = solid

    def array(self) -> np.ndarray:
        """Writable view shaped ``padded_shape + (n_comp,)`` onto :attr:`data`."""
        return self.data.reshape(self.padded_box.shape + (self.n_comp,), order="F")

    def comp(self, c: int) -> np.ndarray:
        return self.data[c * self.N_pad : (c + 1) * self.N_pad].reshape(
            self.padded_box.shape, order="F"
        )

    @property
    def interior(self) -> tuple[slice, ...]:
        g = self.n_ghost
        return tuple(slice(g, g + n) for n in self.box.shape)

    def interior_offsets(self) -> np.ndarray:
        """Flat padded offsets of interior cells, in storage (x-fastest) order."""
        idx = np.arange(self.N_pad).reshape(self.padded_box.shape, order="F")
        return idx[self.interior].ravel(order="F")

    def copy(self) -> GridPatch:
        solid = None if self.solid is None else self.solid.copy()
        return GridPatch(self.box, self.n_comp, self.n_ghost, self.data.copy(), solid)


def index_offset(patch: GridPatch, cell: Sequence[int], comp: int) -> int:
    """Flat storage offset of ``comp`` at ``cell`` (global index, ghosts allowed)."""
    if not patch.padded_box.contains(cell):
        raise IndexError(f"cell {tuple(cell)} outside padded box of patch")
    if not 0 <= comp < patch.n_comp:
        raise IndexError(f"component {comp} out of range")
    flat = 0
    stride = 1
    for c, lo, n in zip(cell, patch.padded_box.lo, patch.padded_box.shape):
        flat += (c - lo) * stride
        stride *= n
    return flat + comp * patch.N_pad


@dataclass
class Level:
    patches: list[GridPatch]
    dx: tuple[float, ...]
    ratio: int  # refinement ratio to the next-coarser level (1 for level 0)


@dataclass(frozen=True)
class BCSet:
    """Per-face domain boundary kinds plus the components negated at walls."""

    lo: tuple[str, ...]
    hi: tuple[str, ...]
    reflect_comps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for d, (a, b) in enumerate(zip(self.lo, self.hi)):
            if a not in BC_KINDS or b not in BC_KINDS:
                raise ValueError(f"unknown boundary kind in dimension {d}: {a!r}, {b!r}")
            if (a == "periodic") != (b == "periodic"):
                raise ValueError(f"periodic boundaries must be paired (dimension {d})")

    @classmethod
    def uniform(cls, kind: str, dim: int, reflect_comps: tuple[int, ...] = ()) -> BCSet:
        return cls((kind,) * dim, (kind,) * dim, reflect_comps)


@dataclass
class LevelHierarchy:
    levels: list[Level]
    prob_lo: tuple[float, ...]
    prob_hi: tuple[float, ...]
    base_cells: tuple[int, ...]
    blocking_factor: int
    max_grid_size: int
    max_level: int
    ref_ratio: int
    n_comp: int
    n_ghost: int = 2

    @property
    def dim(self) -> int:
        return len(self.base_cells)

    def domain_box(self, level: int) -> IndexBox:
        n = tuple(c * self.ref_ratio**level for c in self.base_cells)
        return IndexBox((0,) * self.dim, tuple(x - 1 for x in n))

    def dx(self, level: int) -> tuple[float, ...]:
        return tuple(
            (h - l) / (c * self.ref_ratio**level)
            for l, h, c in zip(self.prob_lo, self.prob_hi, self.base_cells)
        )

    def patch_ids(self) -> list[tuple[int, int]]:
        return [(l, i) for l, lev in enumerate(self.levels) for i in range(len(lev.patches))]

    def patch(self, pid: tuple[int, int]) -> GridPatch:
        return self.levels[pid[0]].patches[pid[1]]

    def cell_centers(self, level: int, box: IndexBox) -> tuple[np.ndarray, ...]:
        dx = self.dx(level)
        axes = [
            self.prob_lo[d] + (np.arange(box.lo[d], box.hi[d] + 1) + 0.5) * dx[d]
            for d in range(self.dim)
        ]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def n_cells(self) -> int:
        return sum(p.box.size for lev in self.levels for p in lev.patches)

    def copy(self) -> LevelHierarchy:
        levels = [Level([p.copy() for p in lev.patches], lev.dx, lev.ratio) for lev in self.levels]
        h = LevelHierarchy(**{**self.__dict__, "levels": levels})
        return h


# ---------------------------------------------------------------------- building


def _check_divisible(cells: Sequence[int], bf: int, what: str) -> None:
    if bf < 1 or bf & (bf - 1):
        raise ValueError("blocking factor must be a power of two")
    if any(c % bf for c in cells):
        raise ValueError(f"{what} {tuple(cells)} not divisible by blocking factor {bf}")


def _tile_box(box: IndexBox, size: Sequence[int]) -> list[IndexBox]:
    ranges = []
    for d in range(box.dim):
        starts = range(box.lo[d], box.hi[d] + 1, size[d])
        ranges.append([(s, min(s + size[d] - 1, box.hi[d])) for s in starts])
    return [
        IndexBox(tuple(r[0] for r in combo), tuple(r[1] for r in combo))
        for combo in itertools.product(*ranges)
    ]


def build_hierarchy(
    prob_lo: Sequence[float],
    prob_hi: Sequence[float],
    base_cells: Sequence[int],
    max_level: int,
    blocking_factor: int,
    max_grid_size: int,
    tag: Callable[[int, tuple[np.ndarray, ...]], np.ndarray] | None = None,
    n_comp: int = 1,
    n_ghost: int = 2,
    ref_ratio: int = 2,
) -> LevelHierarchy:
    """Create a hierarchy with zeroed data.

    ``tag(level, centers)`` receives cell-center coordinate arrays spanning the
    level's domain and returns a boolean mask of cells needing refinement.
    """
    base_cells = tuple(int(c) for c in base_cells)
    _check_divisible(base_cells, blocking_factor, "base cells")
    if max_grid_size % blocking_factor:
        raise ValueError("max_grid_size must be a multiple of the blocking factor")
    if ref_ratio not in (2, 4):
        raise ValueError("refinement ratio must be 2 or 4")
    h = LevelHierarchy(
        [],
        tuple(prob_lo),
        tuple(prob_hi),
        base_cells,
        blocking_factor,
        max_grid_size,
        max_level,
        ref_ratio,
        n_comp,
        n_ghost,
    )
    boxes = _tile_box(h.domain_box(0), (max_grid_size,) * h.dim)
    h.levels.append(Level([GridPatch(b, n_comp, n_ghost) for b in boxes], h.dx(0), 1))
    for lev in range(max_level):
        if tag is None:
            break
        mask = np.asarray(tag(lev, h.cell_centers(lev, h.domain_box(lev))), dtype=bool)
        new = _boxes_from_tags(h, lev, mask)
        if not new:
            break
        h.levels.append(
            Level([GridPatch(b, n_comp, n_ghost) for b in new], h.dx(lev + 1), ref_ratio)
        )
    return h


def _dilate(mask: np.ndarray, n: int) -> np.ndarray:
    out = mask.copy()
    for ax in range(mask.ndim):
        src = out.copy()
        for s in range(1, n + 1):
            lo = [slice(None)] * mask.ndim
            hi = [slice(None)] * mask.ndim
            lo[ax], hi[ax] = slice(s, None), slice(None, -s)
            out[tuple(lo)] |= src[tuple(hi)]
            out[tuple(hi)] |= src[tuple(lo)]
    return out


def _boxes_from_tags(h: LevelHierarchy, level: int, mask: np.ndarray) -> list[IndexBox]:
    """Level ``level+1`` boxes covering tagged level ``level`` cells.

    Tags are buffered by one blocking-factor ring, restricted to existing
    level ``level`` patches, and boxed per chunk at blocking-factor
    granularity, so boxes are aligned and properly nested without overlap.
    """
    bf, r = h.blocking_factor, h.ref_ratio
    if not mask.any():
        return []
    mask = _dilate(mask, bf)
    chunk = max(bf, (h.max_grid_size // r) // bf * bf)
    boxes = []
    for p in h.levels[level].patches:
        for cb in _tile_box(p.box, (chunk,) * h.dim):
            m = mask[cb.slices((0,) * h.dim)]
            if not m.any():
                continue
            lo, hi = [], []
            for d in range(h.dim):
                axes = tuple(a for a in range(h.dim) if a != d)
                hit = np.flatnonzero(m.any(axis=axes) if axes else m)
                lo.append(cb.lo[d] + hit[0] // bf * bf)
                hi.append(min(cb.lo[d] + (hit[-1] // bf + 1) * bf - 1, cb.hi[d]))
            boxes.append(IndexBox(tuple(lo), tuple(hi)).refine(r))
    return boxes


def initialize(h: LevelHierarchy, fn: Callable[[tuple[np.ndarray, ...]], np.ndarray]) -> None:
    """Fill patch interiors from ``fn(centers) -> array shaped box.shape + (n_comp,)``."""
    for lev, level in enumerate(h.levels):
        for p in level.patches:
            p.array()[p.interior] = fn(h.cell_centers(lev, p.box))


# ------------------------------------------------------------------ ghost filling


def _apply_bc(canvas: np.ndarray, ng: int, bc: BCSet) -> None:
    for d in range(len(bc.lo)):
        n = canvas.shape[d] - 2 * ng

        def sl(a, b, step=1):
            s = [slice(None)] * canvas.ndim
            s[d] = slice(a, b, step)
            return tuple(s)

        if bc.lo[d] == "periodic":
            canvas[sl(0, ng)] = canvas[sl(n, n + ng)]
            canvas[sl(n + ng, n + 2 * ng)] = canvas[sl(ng, 2 * ng)]
            continue
        for side, kind in (("lo", bc.lo[d]), ("hi", bc.hi[d])):
            if side == "lo":
                ghost = sl(0, ng)
                mirror = sl(2 * ng - 1, ng - 1, -1)
                edge = sl(ng, ng + 1)
            else:
                ghost = sl(n + ng, n + 2 * ng)
                mirror = sl(n + ng - 1, n - 1 if n > 0 else None, -1)
                edge = sl(n + ng - 1, n + ng)
            if kind == "outflow":
                canvas[ghost] = canvas[edge]
            elif kind == "wall":
                canvas[ghost] = canvas[mirror]
                for c in bc.reflect_comps:
                    gc = ghost[:-1] + (c,)
                    canvas[gc] = -canvas[gc]


def _interp_canvas(coarse: np.ndarray, ng: int, r: int, fine_shape: tuple[int, ...]) -> np.ndarray:
    """Conservative linear interpolation of a padded coarse canvas to a padded fine one.

    Slopes are minmod-limited so interpolated values stay within the range
    of their coarse neighbours.
    """
    dim = len(fine_shape)
    slopes = []
    for d in range(dim):
        s = np.zeros_like(coarse)
        a = [slice(None)] * coarse.ndim
        b = [slice(None)] * coarse.ndim
        c = [slice(None)] * coarse.ndim
        a[d], b[d], c[d] = slice(2, None), slice(None, -2), slice(1, -1)
        fwd = coarse[tuple(a)] - coarse[tuple(c)]
        bwd = coarse[tuple(c)] - coarse[tuple(b)]
        s[tuple(c)] = np.where(fwd * bwd > 0, np.sign(fwd) * np.minimum(np.abs(fwd), np.abs(bwd)), 0.0)
        slopes.append(s)
    idx_c = []
    offs = []
    for d in range(dim):
        I = np.arange(fine_shape[d]) - ng  # fine index
        i = np.floor_divide(I, r)
        idx_c.append(i + ng)
        offs.append((I - i * r + 0.5) / r - 0.5)
    grids = np.meshgrid(*idx_c, indexing="ij")
    out = coarse[tuple(grids)]
    for d in range(dim):
        shape = [1] * (dim + 1)
        shape[d] = fine_shape[d]
        out = out + slopes[d][tuple(grids)] * offs[d].reshape(shape)
    return out


def level_canvas(h: LevelHierarchy, level: int, bc: BCSet, coarse: np.ndarray | None = None) -> np.ndarray:
    """Padded whole-domain array for ``level``: interiors plus interpolated and boundary ghosts."""
    ng = h.n_ghost
    dom = h.domain_box(level)
    shape = tuple(n + 2 * ng for n in dom.shape)
    if level == 0:
        canvas = np.zeros(shape + (h.n_comp,))
    else:
        if coarse is None:
            coarse = level_canvas(h, level - 1, bc)
        canvas = _interp_canvas(coarse, ng, h.levels[level].ratio, shape)
    origin = tuple(-ng for _ in shape)
    for p in h.levels[level].patches:
        canvas[p.box.slices(origin)] = p.array()[p.interior]
    _apply_bc(canvas, ng, bc)
    return canvas


def _covered(h: LevelHierarchy, level: int) -> np.ndarray:
    dom = h.domain_box(level)
    cov = np.zeros(dom.shape, dtype=bool)
    for p in h.levels[level].patches:
        cov[p.box.slices((0,) * h.dim)] = True
    return cov


def fill_ghosts(h: LevelHierarchy, level: int, bc: BCSet, coarse: np.ndarray | None = None) -> np.ndarray:
    """Fill ghost cells of every patch on ``level``; returns the level canvas.

    Same-level neighbours take precedence, then coarse interpolation, then
    domain boundary rules.  Level 0 must cover the domain.
    """
    if level == 0 and not _covered(h, 0).all():
        raise ValueError("level 0 does not cover the domain; ghost regions uncovered")
    canvas = level_canvas(h, level, bc, coarse)
    origin = tuple(-h.n_ghost for _ in range(h.dim))
    for p in h.levels[level].patches:
        p.array()[...] = canvas[p.padded_box.slices(origin)]
    return canvas


def fill_all_ghosts(h: LevelHierarchy, bc: BCSet) -> list[np.ndarray]:
    canvases: list[np.ndarray] = []
    for lev in range(len(h.levels)):
        canvases.append(fill_ghosts(h, lev, bc, canvases[-1] if canvases else None))
    return canvases


def _pairwise_sum(parts: list[np.ndarray]) -> np.ndarray:
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def average_down(h: LevelHierarchy, level: int) -> None:
    """Replace level ``level-1`` cells covered by ``level`` with the fine-cell mean."""
    if level <= 0 or level >= len(h.levels):
        return
    r = h.levels[level].ratio
    coarse_level = h.levels[level - 1]
    for fp in h.levels[level].patches:
        fine = fp.array()[fp.interior]
        parts = []
        for offs in itertools.product(range(r), repeat=h.dim):
            parts.append(fine[tuple(slice(o, None, r) for o in offs)])
        avg = _pairwise_sum(parts) / float(r**h.dim)
        cbox = fp.box.coarsen(r)
        for cp in coarse_level.patches:
            ov = cbox.intersect(cp.box)
            if ov is None:
                continue
            dst = cp.array()[ov.slices(cp.padded_box.lo)]
            dst[...] = avg[ov.slices(cbox.lo)]


def average_down_all(h: LevelHierarchy) -> None:
    for lev in range(len(h.levels) - 1, 0, -1):
        average_down(h, lev)


# ------------------------------------------------------------------------ regrid


TagField = Callable[[np.ndarray], np.ndarray] | int


def gradient_tags(h: LevelHierarchy, level: int, bc: BCSet, field: TagField, threshold: float) -> np.ndarray:
    """Mask over the level domain where max_d |f[i+1] - f[i-1]| / 2 exceeds ``threshold``."""
    fill_ghosts(h, level, bc)
    mask = np.zeros(h.domain_box(level).shape, dtype=bool)
    for p in h.levels[level].patches:
        arr = p.array()
        f = arr[..., field] if isinstance(field, (int, np.integer)) else field(arr)
        g = h.n_ghost
        grad = np.zeros(p.box.shape)
        for d in range(h.dim):
            a = list(p.interior)
            b = list(p.interior)
            a[d] = slice(g + 1, g + 1 + p.box.shape[d])
            b[d] = slice(g - 1, g - 1 + p.box.shape[d])
            grad = np.maximum(grad, np.abs(f[tuple(a)] - f[tuple(b)]) * 0.5)
        mask[p.box.slices((0,) * h.dim)] = grad > threshold
    return mask


def regrid(h: LevelHierarchy, bc: BCSet, field: TagField, threshold: float) -> LevelHierarchy:
    """Rebuild levels above 0 from gradient tags; returns a new hierarchy.

    Fine data is copied where old fine patches persist and interpolated
    from the coarser level elsewhere.
    """
    new = LevelHierarchy(**{**h.__dict__, "levels": [h.levels[0]]})
    for lev in range(h.max_level):
        mask = gradient_tags(new, lev, bc, field, threshold)
        boxes = _boxes_from_tags(new, lev, mask)
        if not boxes:
            break
        coarse = level_canvas(new, lev, bc)
        shape = tuple(n + 2 * h.n_ghost for n in h.domain_box(lev + 1).shape)
        canvas = _interp_canvas(coarse, h.n_ghost, h.ref_ratio, shape)
        origin = (-h.n_ghost,) * h.dim
        if lev + 1 < len(h.levels):
            for p in h.levels[lev + 1].patches:
                canvas[p.box.slices(origin)] = p.array()[p.interior]
        patches = []
        for b in boxes:
            p = GridPatch(b, h.n_comp, h.n_ghost)
            p.array()[p.interior] = canvas[b.slices(origin)]
            patches.append(p)
        new.levels.append(Level(patches, h.dx(lev + 1), h.ref_ratio))
    return new


# ------------------------------------------------------------------------ tiling


@dataclass
class TilePlan:
    tiles: list[tuple[int, IndexBox]] = field(default_factory=list)
    tile_shape: tuple[int, ...] = ()

    def for_patch(self, i: int) -> list[IndexBox]:
        return [b for pid, b in self.tiles if pid == i]


def tile_partition(
    level: Level, target: Sequence[int], blocking_factor: int, max_grid_size: int
) -> TilePlan:
    """Split every patch of a level into equal tiles.

    Tile extents start from min(target, mean patch extent), clamped to
    [blocking_factor, max_grid_size], then drop to the largest multiple of
    the blocking factor dividing every patch extent, so all tiles in the
    plan are the same size.
    """
    if not level.patches:
        return TilePlan([], ())
    dim = level.patches[0].box.dim
    shape = []
    for d in range(dim):
        ext = [p.box.shape[d] for p in level.patches]
        cap = min(int(target[d]), int(np.mean(ext)))
        cap = min(max(cap, blocking_factor), max_grid_size)
        g = int(np.gcd.reduce(ext))
        t = blocking_factor
        for cand in range(cap // blocking_factor * blocking_factor, blocking_factor - 1, -blocking_factor):
            if cand and g % cand == 0:
                t = cand
                break
        if g % t:
            t = g  # extents below the blocking factor (not expected) fall back to the common divisor
        shape.append(t)
    tiles = [(i, b) for i, p in enumerate(level.patches) for b in _tile_box(p.box, shape)]
    return TilePlan(tiles, tuple(shape))
