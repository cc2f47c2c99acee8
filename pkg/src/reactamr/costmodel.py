"""Analytic device model for memory traffic, divergence, launches and rooflines.

Nothing here touches hardware.  Kernel work is described by static per-cell
FLOP and byte counts, and the device by a handful of ceilings and overheads.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class DeviceSpec:
    peak_flops: float = 34e12  # double precision, FLOP/s
    bandwidth: float = 3.35e12  # byte/s
    warp_size: int = 32
    launch_overhead: float = 5e-6  # s per kernel launch (calibration estimate)
    transaction_bytes: int = 128
    sync_overhead: float = 10e-6  # s per host synchronization (calibration estimate)
    saturation_cells: float = 1e4  # concurrent work needed to fill the device

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"device {name} must be positive")


@dataclass(frozen=True)
class KernelRecord:
    name: str
    flops: float
    bytes: float
    time: float
    launches: int = 1

    def __post_init__(self) -> None:
        if min(self.flops, self.bytes, self.time, self.launches) < 0:
            raise ValueError("kernel record fields must be non-negative")
        if self.time == 0 and (self.flops > 0 or self.bytes > 0):
            raise ValueError("kernel record with work must have positive time")


@dataclass(frozen=True)
class RooflinePoint:
    ai: float  # FLOP/byte
    perf: float  # FLOP/s
    bound: str  # "memory" | "compute"


# ------------------------------------------------------------ memory transactions


def transactions_column_major(n_cells: int, n_vars: int) -> int:
    _check_sizes(n_cells, n_vars)
    return -(-n_cells // 32) * n_vars


def transactions_row_major(n_cells: int, n_vars: int) -> int:
    _check_sizes(n_cells, n_vars)
    return n_cells * -(-n_vars // 32)


def _check_sizes(n_cells: int, n_vars: int) -> None:
    if n_cells < 1 or n_vars < 1:
        raise ValueError("cell and variable counts must be >= 1")


def access_addresses(layout: str, n_cells: int, n_vars: int, width: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Element addresses and coalescing-group ids for one full sweep of the data.

    Column-major: each warp of ``width`` consecutive threads loads one
    component per instruction, so a group is (warp, component).  Row-major:
    each thread loads its own contiguous record of ``n_vars`` values, so a
    group is one thread.  Addresses come out grouped, in ascending group order.
    """
    _check_sizes(n_cells, n_vars)
    if layout == "column":
        n_warps = -(-n_cells // width)
        w, v, l = np.ix_(np.arange(n_warps), np.arange(n_vars), np.arange(width))
        tid = np.broadcast_to(w * width + l, (n_warps, n_vars, width))
        keep = tid < n_cells
        comp = np.broadcast_to(v, keep.shape)
        return (comp * n_cells + tid)[keep], (np.broadcast_to(w, keep.shape) * n_vars + comp)[keep]
    if layout == "row":
        addr = np.arange(n_cells * n_vars)
        return addr, addr // n_vars
    raise ValueError(f"unknown layout {layout!r}")


def access_groups(layout: str, n_cells: int, n_vars: int, width: int = 32) -> list[np.ndarray]:
    """The same sweep as :func:`access_addresses`, split into one array per group."""
    addr, gid = access_addresses(layout, n_cells, n_vars, width)
    cuts = np.flatnonzero(np.diff(gid)) + 1
    return np.split(addr, cuts)


def count_transactions(addr: np.ndarray, gid: np.ndarray, width: int = 32) -> int:
    """Transactions for flat (address, group) pairs.

    Within each group, duplicate addresses merge and every maximal run of
    consecutive addresses costs ceil(run length / width).
    """
    addr = np.asarray(addr, dtype=np.int64)
    gid = np.asarray(gid, dtype=np.int64)
    if addr.size == 0:
        return 0
    order = np.lexsort((addr, gid))
    a, g = addr[order], gid[order]
    fresh = np.ones(a.size, dtype=bool)
    fresh[1:] = (a[1:] != a[:-1]) | (g[1:] != g[:-1])
    a, g = a[fresh], g[fresh]
    start = np.ones(a.size, dtype=bool)
    start[1:] = (g[1:] != g[:-1]) | (a[1:] != a[:-1] + 1)
    bounds = np.append(np.flatnonzero(start), a.size)
    lengths = np.diff(bounds)
    return int(np.sum(-(-lengths // width)))


def simulate_transactions(groups: Iterable[np.ndarray], width: int = 32) -> int:
    """Count transactions over a sequence of per-group address arrays."""
    groups = [np.asarray(g, dtype=np.int64).ravel() for g in groups]
    if not groups:
        return 0
    gid = np.repeat(np.arange(len(groups)), [g.size for g in groups])
    return count_transactions(np.concatenate(groups), gid, width)


# ------------------------------------------------------------------ divergence


def warp_cost(steps: Sequence[int] | np.ndarray, warp_size: int = 32) -> int:
    """Σ over consecutive warps of the largest step count inside the warp."""
    s = np.asarray(steps, dtype=np.int64)
    if s.size and s.min() < 0:
        raise ValueError("step counts must be non-negative")
    if s.size == 0:
        return 0
    pad = -s.size % warp_size
    s = np.concatenate([s, np.zeros(pad, dtype=np.int64)])
    return int(s.reshape(-1, warp_size).max(axis=1).sum())


def ideal_warp_cost(steps: Sequence[int] | np.ndarray, warp_size: int = 32) -> Fraction:
    """Mean-based lower bound: total steps / warp_size, kept exact.

    Equals :func:`warp_cost` exactly when every (zero-padded) warp is uniform.
    """
    return Fraction(int(np.sum(steps, dtype=np.int64)), warp_size)


# ------------------------------------------------------------------ timing model


def saturation_factor(active_cells: float, device: DeviceSpec) -> float:
    return max(1.0, device.saturation_cells / active_cells) if active_cells > 0 else 1.0


def predict_kernel_time(
    cells: float,
    flops_per_cell: float,
    bytes_per_cell: float,
    launches: int,
    device: DeviceSpec,
) -> float:
    """Modeled seconds: launch overheads plus roofline time stretched below saturation."""
    work = max(cells * flops_per_cell / device.peak_flops, cells * bytes_per_cell / device.bandwidth)
    if cells <= 0:
        work = 0.0
    return launches * device.launch_overhead + work * saturation_factor(cells, device)


def chemistry_step_counts(n_species: int, n_reactions: int) -> tuple[float, float]:
    """Static (FLOPs, bytes) for one explicit chemistry step of one cell.

    Rates: ~24 FLOPs per reaction for Arrhenius and equilibrium terms plus the
    law-of-mass-action products; thermo: ~18 per species; Newton temperature
    recovery: ~3 iterations of ~14 per species; update: 6 per species.
    Bytes: read and write Y, T, t, plus density and energy targets.
    """
    flops = 24.0 * n_reactions + 18.0 * n_species + 3 * 14.0 * n_species + 6.0 * n_species
    nbytes = 8.0 * (2 * n_species + 6)
    return flops, nbytes


def modeled_record(
    name: str,
    cells: float,
    flops_per_cell: float,
    bytes_per_cell: float,
    launches: int,
    device: DeviceSpec,
) -> KernelRecord:
    t = predict_kernel_time(cells, flops_per_cell, bytes_per_cell, launches, device)
    return KernelRecord(name, cells * flops_per_cell, cells * bytes_per_cell, t, launches)


# ------------------------------------------------------------------ roofline


def ridge_point(device: DeviceSpec) -> float:
    return device.peak_flops / device.bandwidth


def classify(point: RooflinePoint, device: DeviceSpec) -> str:
    return "memory" if point.ai < ridge_point(device) else "compute"


def roofline_point(record: KernelRecord, device: DeviceSpec | None = None) -> RooflinePoint:
    if record.bytes <= 0:
        raise ValueError(f"kernel {record.name!r} moved no bytes; arithmetic intensity undefined")
    if record.time <= 0:
        raise ValueError(f"kernel {record.name!r} has no elapsed time")
    device = device or DeviceSpec()
    ai = record.flops / record.bytes
    bound = "memory" if ai < ridge_point(device) else "compute"
    return RooflinePoint(ai, record.flops / record.time, bound)


def aggregate_roofline(records: Sequence[KernelRecord], device: DeviceSpec | None = None) -> RooflinePoint:
    """Average marker: total FLOPs over total bytes, total FLOPs over total time."""
    if not records:
        raise ValueError("cannot aggregate an empty set of kernel records")
    total = KernelRecord(
        "aggregate",
        math.fsum(r.flops for r in records),
        math.fsum(r.bytes for r in records),
        math.fsum(r.time for r in records),
        sum(r.launches for r in records),
    )
    return roofline_point(total, device)


def attainable(ai: float, device: DeviceSpec) -> float:
    return min(device.peak_flops, ai * device.bandwidth)


# ------------------------------------------------------------------ fusion model


@dataclass(frozen=True)
class CrossoverResult:
    grids: np.ndarray
    per_grid: np.ndarray  # modeled seconds, one launch sequence per grid
    fused: np.ndarray  # modeled seconds, single index-mapped kernel
    G_star: int | None  # smallest swept G where fused is faster


def fusion_crossover(
    grids: Sequence[int],
    total_cells: float,
    n_species: int,
    n_reactions: int | None = None,
    device: DeviceSpec | None = None,
    steps: int = 1000,
    kernels_per_step: int = 1,
    steps_per_launch: int = 5,
    fused_efficiency: float = 0.5,
) -> CrossoverResult:
    """Per-grid launches versus one fused launch over a fixed total cell count.

    The per-grid path issues ``kernels_per_step`` launches per chemistry step
    for every grid (the matrix-style formulation), and each grid only fills
    ``cells * n_species`` lanes, so small grids run below saturation.  The
    fused path pays one launch and host sync per ``steps_per_launch`` steps
    but runs at ``fused_efficiency`` of the roofline because of indirect
    addressing and divergence.
    """
    device = device or DeviceSpec()
    n_reactions = 3 * n_species if n_reactions is None else n_reactions
    f_step, b_step = chemistry_step_counts(n_species, n_reactions)
    f_cell, b_cell = f_step * steps, b_step * steps
    G = np.asarray(grids, dtype=np.int64)
    per_grid = np.empty(G.size)
    for i, g in enumerate(G):
        cells = total_cells / g
        launch = g * steps * kernels_per_step * device.launch_overhead
        work = max(cells * f_cell / device.peak_flops, cells * b_cell / device.bandwidth)
        per_grid[i] = launch + g * work * saturation_factor(cells * n_species, device)
    launches = -(-steps // steps_per_launch)
    work = max(total_cells * f_cell / device.peak_flops, total_cells * b_cell / device.bandwidth)
    fused_t = launches * (device.launch_overhead + device.sync_overhead) + work / fused_efficiency
    fused = np.full(G.size, fused_t)
    wins = np.flatnonzero(fused < per_grid)
    G_star = int(G[wins[0]]) if wins.size else None
    return CrossoverResult(G, per_grid, fused, G_star)
