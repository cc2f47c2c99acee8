"""Per-cell constant-volume reactor integration and the two chemistry schedulers.

Every cell advances with explicit Euler steps whose size keeps each species'
relative change below ``eps_change``; temperature follows from a Newton
solve at fixed internal energy and density.  Cells never interact, so the
schedulers only differ in how they batch cells into launches:

* :func:`integrate_naive` runs one launch per patch until every cell is done.
* :func:`integrate_bulk_sparse` runs short launches over all cells while many
  are active, then one launch over an index map of the stragglers.

Both go through the same batch kernel, and every operation inside it is
elementwise or a fixed-order loop over species or reactions, so a cell's
arithmetic does not depend on which other cells share its batch.  That is
what makes the two schedulers agree bit for bit.
"""

from __future__ import annotations

import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .analysis import ActivityTrace
from .costmodel import KernelRecord, chemistry_step_counts
from .grid import LevelHierarchy
from .mechanism import Mechanism, _production_rates, internal_energy, mixture_R, temperature_from_energy
from .state import EINT, RHO, SPEC0, TEMP

Y_FLOOR = 1e-12


@dataclass(frozen=True)
class KineticsConfig:
    t_final: float = 0.0
    eps_change: float = 0.01
    T_reaction_min: float = 500.0
    K_max_bulk: int = 5
    N_active_star: int = 10_000
    K_max_sparse: int = 100_000
    Y_floor: float = Y_FLOOR
    workers: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.eps_change <= 0.05:
            raise ValueError("eps_change must lie in (0, 0.05]")
        if self.K_max_bulk < 1:
            raise ValueError("K_max_bulk must be >= 1")
        if self.K_max_sparse < self.K_max_bulk:
            raise ValueError("K_max_sparse must be >= K_max_bulk")
        if self.t_final < 0:
            raise ValueError("t_final must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class CellChemState:
    rho: float
    T: float
    Y: np.ndarray
    t: float = 0.0
    k: int = 0
    solid: bool = False
    e_int: float | None = None  # internal-energy target; defaults to u(Y, T)

    def copy(self) -> CellChemState:
        return replace(self, Y=np.array(self.Y, dtype=float))


# --------------------------------------------------------------- batch kernel


def _adaptive_dt_batch(Y: np.ndarray, dYdt: np.ndarray, remaining: np.ndarray, eps: float, floor: float) -> np.ndarray:
    """Per-cell step: eps * min_k max(Y_k, floor)/|dY_k/dt|, capped by the time left."""
    rate = np.abs(dYdt)
    ratio = np.full(Y.shape, np.inf)
    with np.errstate(over="ignore"):  # tiny rates give an infinite bound, which is fine
        np.divide(np.maximum(Y, floor), rate, out=ratio, where=rate > 0)
    m = ratio[0].copy()
    for r in ratio[1:]:
        m = np.minimum(m, r)
    return np.minimum(eps * m, remaining)


def _advance(
    mech: Mechanism,
    rho: np.ndarray,
    T: np.ndarray,
    Y: np.ndarray,
    e_int: np.ndarray,
    t: np.ndarray,
    k: np.ndarray,
    t_final: float,
    budget: int | np.ndarray,
    cfg: KineticsConfig,
) -> np.ndarray:
    """Advance a batch in place by at most ``budget`` steps per cell.

    ``Y`` is (n_species, n) and ``budget`` a scalar or per-cell array.
    Returns the number of steps each cell took.
    """
    W = mech.W[:, None]
    budget = np.broadcast_to(np.asarray(budget, dtype=np.int64), t.shape)
    taken = np.zeros(t.size, dtype=np.int64)
    idx = np.flatnonzero((t < t_final) & (budget > 0))
    while idx.size:
        r, Tc, Yc = rho[idx], T[idx], Y[:, idx]
        omega = _production_rates(mech, Tc, r, Yc)
        dYdt = W * omega / r
        if not np.all(np.isfinite(dYdt)):
            raise FloatingPointError("non-finite production rates in chemistry step")
        remaining = t_final - t[idx]
        dt = _adaptive_dt_batch(Yc, dYdt, remaining, cfg.eps_change, cfg.Y_floor)
        Yn = Yc + dt * dYdt
        Yn[Yn < 0.0] = 0.0
        Tn = temperature_from_energy(mech, Yn, e_int[idx], Tc)
        Y[:, idx] = Yn
        T[idx] = Tn
        t[idx] = np.where(dt >= remaining, t_final, t[idx] + dt)
        k[idx] += 1
        taken[idx] += 1
        idx = idx[(t[idx] < t_final) & (taken[idx] < budget[idx])]
    return taken


def _advance_parallel(mech, rho, T, Y, e_int, t, k, t_final, budget, cfg) -> np.ndarray:
    """Split a batch into contiguous chunks run on worker threads."""
    n = t.size
    if cfg.workers == 1 or n < 2:
        return _advance(mech, rho, T, Y, e_int, t, k, t_final, budget, cfg)
    budget = np.broadcast_to(np.asarray(budget, dtype=np.int64), t.shape)
    bounds = np.linspace(0, n, min(cfg.workers, n) + 1).astype(int)
    parts = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    outs = [None] * len(parts)

    def run(i: int) -> None:
        s = parts[i]
        Ys = np.ascontiguousarray(Y[:, s])
        Ts, ts, ks = T[s].copy(), t[s].copy(), k[s].copy()
        outs[i] = _advance(mech, rho[s], Ts, Ys, e_int[s], ts, ks, t_final, budget[s], cfg)
        Y[:, s], T[s], t[s], k[s] = Ys, Ts, ts, ks

    with ThreadPoolExecutor(cfg.workers) as pool:
        list(pool.map(run, range(len(parts))))
    return np.concatenate(outs)


# ----------------------------------------------------------- single-cell API


def adaptive_dt(state: CellChemState, dYdt: np.ndarray, cfg: KineticsConfig) -> float:
    if not state.t < cfg.t_final:
        raise ValueError("cell already reached t_final")
    Y = np.asarray(state.Y, dtype=float)[:, None]
    d = np.asarray(dYdt, dtype=float)[:, None]
    rem = np.array([cfg.t_final - state.t])
    return float(_adaptive_dt_batch(Y, d, rem, cfg.eps_change, cfg.Y_floor)[0])


def _run_cell(mech: Mechanism, state: CellChemState, t_final: float, budget: int, cfg: KineticsConfig) -> CellChemState:
    out = state.copy()
    if out.solid:
        return out
    e = out.e_int if out.e_int is not None else float(internal_energy(mech, out.Y, out.T))
    rho = np.array([out.rho], dtype=float)
    T = np.array([out.T], dtype=float)
    Y = np.array(out.Y, dtype=float).reshape(-1, 1)
    t = np.array([out.t], dtype=float)
    k = np.array([out.k], dtype=np.int64)
    _advance(mech, rho, T, Y, np.array([e]), t, k, t_final, budget, cfg)
    out.T, out.Y, out.t, out.k, out.e_int = float(T[0]), Y[:, 0], float(t[0]), int(k[0]), e
    return out


def step_cell(mech: Mechanism, state: CellChemState, cfg: KineticsConfig) -> CellChemState:
    """One explicit step at constant (u, ρ)."""
    if state.solid:
        raise ValueError("solid cells are not integrated")
    if not state.t < cfg.t_final:
        raise ValueError("cell already reached t_final")
    return _run_cell(mech, state, cfg.t_final, 1, cfg)


def multi_step_integration(
    mech: Mechanism, state: CellChemState, t_final: float, K_max: int, cfg: KineticsConfig
) -> CellChemState:
    """Step until ``t_final`` or until ``K_max`` steps were taken in this call."""
    return _run_cell(mech, state, t_final, K_max, cfg)


# ------------------------------------------------------------ hierarchy API


PatchId = tuple[int, int]


@dataclass
class _PatchChem:
    """Chemistry working arrays for one patch (interior cells, storage order)."""

    offsets: np.ndarray
    rho: np.ndarray
    T: np.ndarray
    Y: np.ndarray  # (n_species, n)
    e_int: np.ndarray
    t: np.ndarray
    k: np.ndarray
    integrate: np.ndarray  # hot and not solid at entry


@dataclass
class CellIndexMap:
    """Active cells across patches as (patch id, flat padded cell offset)."""

    patch: list[PatchId] = field(default_factory=list)
    entries: list[tuple[int, int]] = field(default_factory=list)  # (patch index, offset)

    def __len__(self) -> int:
        return len(self.entries)

    def shuffled(self, seed: int) -> CellIndexMap:
        order = np.random.default_rng(seed).permutation(len(self.entries))
        return CellIndexMap(list(self.patch), [self.entries[i] for i in order])


@dataclass
class KineticsResult:
    clocks: dict[PatchId, tuple[np.ndarray, np.ndarray]]  # per patch (t, k) over interior cells
    traces: list[ActivityTrace]
    records: list[KernelRecord]
    launch_steps: list[np.ndarray]  # per launch, steps taken by each lane
    unfinished: int = 0

    @property
    def launches(self) -> int:
        return sum(r.launches for r in self.records)


def _load(mech: Mechanism, h: LevelHierarchy, cfg: KineticsConfig) -> dict[PatchId, _PatchChem]:
    ns = mech.n_species
    out = {}
    for pid in h.patch_ids():
        p = h.patch(pid)
        if p.n_comp != SPEC0 + ns:
            raise ValueError(f"patch {pid} holds {p.n_comp} components, mechanism needs {SPEC0 + ns}")
        offs = p.interior_offsets()
        N = p.N_pad
        rho = p.data[offs + RHO * N]
        T = p.data[offs + TEMP * N]
        Y = np.empty((ns, offs.size))
        for s in range(ns):
            Y[s] = p.data[offs + (SPEC0 + s) * N] / rho
        solid = np.zeros(offs.size, dtype=bool) if p.solid is None else p.solid.ravel(order="F")
        hot = (T >= cfg.T_reaction_min) & ~solid
        t = np.where(hot, 0.0, cfg.t_final)
        out[pid] = _PatchChem(
            offs, rho, T.copy(), Y, p.data[offs + EINT * N], t, np.zeros(offs.size, dtype=np.int64), hot
        )
    return out


def _store(h: LevelHierarchy, chem: dict[PatchId, _PatchChem]) -> None:
    for pid, c in chem.items():
        p = h.patch(pid)
        N = p.N_pad
        sel = c.integrate
        offs = c.offsets[sel]
        p.data[offs + TEMP * N] = c.T[sel]
        rho = c.rho[sel]
        for s in range(c.Y.shape[0]):
            # unchanged fractions keep their stored partial density bit for bit
            idx = offs + (SPEC0 + s) * N
            old = p.data[idx]
            p.data[idx] = np.where(c.Y[s, sel] == old / rho, old, rho * c.Y[s, sel])


def _trace(level: int, fab: int, c: _PatchChem, t_final: float, time: float) -> ActivityTrace:
    """Active count before each step index, derived from the final (t, k)."""
    k = c.k[c.integrate]
    unfinished = c.t[c.integrate] < t_final
    n_steps = int(k.max()) if k.size else 0
    i = np.arange(n_steps + 1)[:, None]
    counts = ((k[None, :] > i) | ((k[None, :] == i) & unfinished[None, :])).sum(axis=1)
    return ActivityTrace(level, fab, int(c.t.size), counts, time)


def _finish(
    h: LevelHierarchy,
    chem: dict[PatchId, _PatchChem],
    cfg: KineticsConfig,
    records: list[KernelRecord],
    launch_steps: list[np.ndarray],
    time: float,
) -> KineticsResult:
    _store(h, chem)
    traces = [_trace(l, i, c, cfg.t_final, time) for (l, i), c in chem.items()]
    unfinished = int(sum(np.count_nonzero(c.t < cfg.t_final) for c in chem.values()))
    clocks = {pid: (c.t, c.k) for pid, c in chem.items()}
    return KineticsResult(clocks, traces, records, launch_steps, unfinished)


def _record(name: str, mech: Mechanism, steps: np.ndarray, lanes: int, wall: float, index_bytes: float = 0.0) -> KernelRecord:
    f, b = chemistry_step_counts(mech.n_species, mech.n_reactions)
    total = float(steps.sum())
    return KernelRecord(name, f * total, b * total + index_bytes * lanes, max(wall, 1e-9), 1)


def integrate_naive(mech: Mechanism, h: LevelHierarchy, cfg: KineticsConfig, time: float = 0.0) -> KineticsResult:
    """One launch per patch; each hot cell runs up to ``K_max_sparse`` steps."""
    chem = _load(mech, h, cfg)
    records, launch_steps = [], []
    for c in chem.values():
        t0 = _time.perf_counter()
        steps = _advance_parallel(
            mech, c.rho, c.T, c.Y, c.e_int, c.t, c.k, cfg.t_final, cfg.K_max_sparse, cfg
        )
        records.append(_record("chem_naive", mech, steps, steps.size, _time.perf_counter() - t0))
        launch_steps.append(steps)
    return _finish(h, chem, cfg, records, launch_steps, time)


def _runnable(chem: Iterable[_PatchChem], cfg: KineticsConfig) -> int:
    """Active cells that still have step budget under the ``K_max_sparse`` safeguard."""
    return int(sum(np.count_nonzero((c.t < cfg.t_final) & (c.k < cfg.K_max_sparse)) for c in chem))


def count_active(
    h: LevelHierarchy,
    cfg: KineticsConfig,
    clocks: dict[PatchId, tuple[np.ndarray, np.ndarray]] | None = None,
) -> int:
    """Hot fluid cells still short of ``t_final``.

    Without ``clocks`` every cell is taken to be at local time zero.
    """
    n = 0
    for pid in h.patch_ids():
        p = h.patch(pid)
        offs = p.interior_offsets()
        T = p.data[offs + TEMP * p.N_pad]
        solid = np.zeros(offs.size, dtype=bool) if p.solid is None else p.solid.ravel(order="F")
        active = (T >= cfg.T_reaction_min) & ~solid
        if clocks is not None:
            active &= clocks[pid][0] < cfg.t_final
        elif cfg.t_final <= 0:
            active[:] = False
        n += int(np.count_nonzero(active))
    return n


def build_index_map(h: LevelHierarchy, cfg: KineticsConfig, clocks=None) -> CellIndexMap:
    """Index map over active cells (see :func:`count_active` for the rule)."""
    m = CellIndexMap(h.patch_ids(), [])
    for j, pid in enumerate(m.patch):
        p = h.patch(pid)
        offs = p.interior_offsets()
        T = p.data[offs + TEMP * p.N_pad]
        solid = np.zeros(offs.size, dtype=bool) if p.solid is None else p.solid.ravel(order="F")
        active = (T >= cfg.T_reaction_min) & ~solid
        if clocks is not None:
            active &= clocks[pid][0] < cfg.t_final
        elif cfg.t_final <= 0:
            active[:] = False
        m.entries.extend((j, int(o)) for o in offs[active])
    return m


def _map_from_chem(pids: list[PatchId], chem: dict[PatchId, _PatchChem], t_final: float, k_max: int) -> CellIndexMap:
    m = CellIndexMap(list(pids), [])
    for j, pid in enumerate(pids):
        c = chem[pid]
        m.entries.extend((j, int(o)) for o in c.offsets[(c.t < t_final) & (c.k < k_max)])
    return m


def _fused_launch(
    mech: Mechanism,
    chem: dict[PatchId, _PatchChem],
    imap: CellIndexMap,
    budget: int | None,
    cfg: KineticsConfig,
) -> np.ndarray:
    """Gather the mapped cells, advance them as one batch, scatter back.

    Each cell takes at most ``budget`` steps (``None``: unbounded) and never
    more than ``K_max_sparse`` in total, the same safeguard the per-patch
    scheduler applies.
    """
    if not imap.entries:
        return np.zeros(0, dtype=np.int64)
    ent = np.asarray(imap.entries, dtype=np.int64)
    pj, off = ent[:, 0], ent[:, 1]
    n = ent.shape[0]
    ns = mech.n_species
    rho, T, e, t = (np.empty(n) for _ in range(4))
    k = np.empty(n, dtype=np.int64)
    Y = np.empty((ns, n))
    where: list[tuple[np.ndarray, np.ndarray, _PatchChem]] = []
    for j in np.unique(pj):
        c = chem[imap.patch[j]]
        lanes = np.flatnonzero(pj == j)
        cells = np.searchsorted(c.offsets, off[lanes])
        if np.any(cells >= c.offsets.size) or np.any(c.offsets[np.minimum(cells, c.offsets.size - 1)] != off[lanes]):
            raise KeyError(f"index map entry does not resolve to a cell of patch {imap.patch[j]}")
        rho[lanes], T[lanes], e[lanes], t[lanes], k[lanes] = c.rho[cells], c.T[cells], c.e_int[cells], c.t[cells], c.k[cells]
        Y[:, lanes] = c.Y[:, cells]
        where.append((lanes, cells, c))
    cap = np.maximum(cfg.K_max_sparse - k, 0)
    budget = cap if budget is None else np.minimum(cap, budget)
    steps = _advance_parallel(mech, rho, T, Y, e, t, k, cfg.t_final, budget, cfg)
    for lanes, cells, c in where:
        c.T[cells], c.t[cells], c.k[cells] = T[lanes], t[lanes], k[lanes]
        c.Y[:, cells] = Y[:, lanes]
    return steps


def integrate_bulk_sparse(
    mech: Mechanism,
    h: LevelHierarchy,
    cfg: KineticsConfig,
    time: float = 0.0,
    index_order_seed: int | None = None,
) -> KineticsResult:
    """Bulk launches over every cell, then one sparse launch via an index map.

    ``index_order_seed`` shuffles the sparse map (results must not change).
    """
    chem = _load(mech, h, cfg)
    pids = list(chem)
    records, launch_steps = [], []
    everything = CellIndexMap(pids, [(j, int(o)) for j, pid in enumerate(pids) for o in chem[pid].offsets])
    n_active = _runnable(chem.values(), cfg)
    while n_active > cfg.N_active_star:
        t0 = _time.perf_counter()
        steps = _fused_launch(mech, chem, everything, cfg.K_max_bulk, cfg)
        records.append(_record("chem_bulk", mech, steps, steps.size, _time.perf_counter() - t0))
        launch_steps.append(steps)
        n_active = _runnable(chem.values(), cfg)
    if n_active > 0:
        imap = _map_from_chem(pids, chem, cfg.t_final, cfg.K_max_sparse)
        if index_order_seed is not None:
            imap = imap.shuffled(index_order_seed)
        t0 = _time.perf_counter()
        steps = _fused_launch(mech, chem, imap, None, cfg)
        records.append(_record("chem_sparse", mech, steps, steps.size, _time.perf_counter() - t0, index_bytes=16.0))
        launch_steps.append(steps)
    return _finish(h, chem, cfg, records, launch_steps, time)


# ----------------------------------------------------------- ignition delay


@dataclass(frozen=True)
class IgnitionResult:
    T0: float
    tau: float | None  # None when no ignition within the time cap
    T_final: float
    steps: int


def ignition_delay(
    mech: Mechanism,
    T0: float,
    p: float,
    Y0: np.ndarray,
    cfg: KineticsConfig | None = None,
    t_cap: float = 0.1,
    min_rise: float = 200.0,
    max_steps: int = 2_000_000,
) -> IgnitionResult:
    """Constant-volume ignition delay: the time of maximum dT/dt.

    The step-wise rate is assigned to the step midpoint.  Integration stops
    once the temperature has risen by ``min_rise`` and the rate has fallen
    below 1% of its peak, or at ``t_cap``.  A rise smaller than ``min_rise``
    counts as no ignition.
    """
    cfg = cfg or KineticsConfig()
    Y = np.array(Y0, dtype=float).reshape(-1, 1)
    T = np.array([float(T0)])
    rho = np.array([p / (float(mixture_R(mech, Y)[0]) * T0)])
    e = np.atleast_1d(internal_energy(mech, Y, T)).astype(float)
    t = np.zeros(1)
    k = np.zeros(1, dtype=np.int64)
    best_rate, best_t = 0.0, None
    while t[0] < t_cap and k[0] < max_steps:
        t_old, T_old = t[0], T[0]
        _advance(mech, rho, T, Y, e, t, k, t_cap, 1, cfg)
        dt = t[0] - t_old
        if dt <= 0:
            break
        rate = (T[0] - T_old) / dt
        if rate > best_rate:
            best_rate, best_t = rate, 0.5 * (t_old + t[0])
        if T[0] - T0 >= min_rise and rate < 0.01 * best_rate:
            break
    ignited = T[0] - T0 >= min_rise and best_t is not None
    return IgnitionResult(float(T0), float(best_t) if ignited else None, float(T[0]), int(k[0]))
