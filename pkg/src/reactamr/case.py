"""Case setup and the time-stepping driver shared by the CLI and tests."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import costmodel
from .analysis import ActivityTrace
from .config import parse_composition, zones
from .flow import SplitConfig, StepReport, Timers, TransportConfig, _finalize, split_step, state_from_pressure
from .grid import BCSet, IndexBox, LevelHierarchy, build_hierarchy, regrid
from .kinetics import KineticsConfig
from .mechanism import Mechanism, load_mechanism, mixture_R, mole_to_mass
from .state import MOMENTUM, RHO, RHOE, SPEC0, TEMP


def bc_from_config(cfg: dict[str, Any]) -> BCSet:
    dim = len(cfg["amr.n_cell"])
    lo = tuple(cfg[f"bc.{a}lo"] for a in "xy"[:dim])
    hi = tuple(cfg[f"bc.{a}hi"] for a in "xy"[:dim])
    return BCSet(lo, hi, MOMENTUM)


def convection_counts(n_species: int, dim: int) -> tuple[float, float]:
    """Static (FLOPs, bytes) per cell per Runge-Kutta stage of the flow update."""
    flops = dim * (160.0 + 14.0 * n_species) + 45.0 * n_species + 30.0
    nbytes = 8.0 * (2 * (7 + n_species) + dim * 2 * (5 + n_species))
    return flops, nbytes


@dataclass
class Simulation:
    mech: Mechanism
    cfg: dict[str, Any]
    h: LevelHierarchy
    split: SplitConfig
    seed: int
    time: float = 0.0
    step: int = 0
    records: list[costmodel.KernelRecord] = field(default_factory=list)
    traces: list[ActivityTrace] = field(default_factory=list)
    timers: Timers = field(default_factory=Timers)
    device: costmodel.DeviceSpec = field(default_factory=costmodel.DeviceSpec)
    cost_model: bool = False

    # -------------------------------------------------------------- setup
    def _level_noise(self, level: int) -> np.ndarray:
        shape = self.h.domain_box(level).shape
        return np.random.default_rng([self.seed, level]).random(shape) - 0.5

    def initial_state(self, level: int, box: IndexBox) -> np.ndarray:
        cfg, mech = self.cfg, self.mech
        centers = self.h.cell_centers(level, box)
        shape = centers[0].shape
        base = mole_to_mass(mech, parse_composition(cfg["init.composition"]))
        T = np.full(shape, cfg["init.T"])
        p = np.full(shape, cfg["init.p"])
        Y = np.broadcast_to(base[:, None], (mech.n_species, T.size)).reshape((-1,) + shape).copy()
        for z in zones(cfg):
            m = z.contains(centers)
            T[m], p[m] = z.T, z.p
            if z.composition:
                Y[:, m] = mole_to_mass(mech, parse_composition(z.composition))[:, None]
        if cfg["init.noise"] > 0:
            noise = self._level_noise(level)[box.slices((0,) * len(shape))]
            T = T * (1.0 + cfg["init.noise"] * noise)
        vel = np.array(cfg["init.u"], dtype=float).reshape((3,) + (1,) * len(shape)) * np.ones(shape)
        return state_from_pressure(mech, p, vel, T, Y)

    def fill_initial(self) -> None:
        for lev, level in enumerate(self.h.levels):
            for p in level.patches:
                p.array()[p.interior] = self.initial_state(lev, p.box)

    def tag_field(self):
        name = self.cfg["amr.tag_field"]
        if name == "T":
            return TEMP
        if name == "rho":
            return RHO
        mech = self.mech

        def pressure(arr: np.ndarray) -> np.ndarray:
            rho = arr[..., RHO]
            Y = np.stack([arr[..., SPEC0 + k] / rho for k in range(mech.n_species)])
            R = np.asarray(mixture_R(mech, Y.reshape(mech.n_species, -1))).reshape(rho.shape)
            return rho * R * arr[..., TEMP]

        return pressure

    def regrid(self) -> None:
        if self.cfg["amr.max_level"] == 0:
            return
        self.h = regrid(self.h, self.split.bc, self.tag_field(), self.cfg["amr.tag_threshold"])
        _finalize(self.mech, self.h)

    # -------------------------------------------------------------- stepping
    def advance(self) -> StepReport:
        rep = split_step(self.mech, self.h, self.split, time=self.time)
        self.time += rep.dt
        self.step += 1
        ri = self.cfg["amr.regrid_int"]
        if ri > 0 and self.step % ri == 0:
            t0 = _now()
            self.regrid()
            rep.timers.other += _now() - t0
        for name in ("convection", "chemistry", "communication", "other"):
            setattr(self.timers, name, getattr(self.timers, name) + getattr(rep.timers, name))
        self._account(rep)
        return rep

    def _account(self, rep: StepReport) -> None:
        ns = self.mech.n_species
        cells = self.h.n_cells()
        n_patches = sum(len(l.patches) for l in self.h.levels)
        f, b = convection_counts(ns, self.h.dim)
        stages = 2
        if self.cost_model:
            rec = costmodel.modeled_record("convection", stages * cells, f, b, stages * n_patches, self.device)
        else:
            rec = costmodel.KernelRecord("convection", stages * cells * f, stages * cells * b, max(rep.timers.convection, 1e-9), stages * n_patches)
        self.records.append(rec)
        f_step, b_step = costmodel.chemistry_step_counts(ns, self.mech.n_reactions)
        for res in rep.chemistry:
            for r, steps in zip(res.records, res.launch_steps):
                if self.cost_model:
                    self.records.append(self._modeled_chem(r, steps, f_step, b_step))
                else:
                    self.records.append(r)
            self.traces.extend(res.traces)

    def _modeled_chem(self, r, steps, f_step, b_step) -> costmodel.KernelRecord:
        """Lockstep model: a warp costs its slowest lane's step count."""
        lanes = max(int(steps.size), 1)
        warp_steps = costmodel.warp_cost(steps, self.device.warp_size) * self.device.warp_size
        t = costmodel.predict_kernel_time(
            lanes, f_step * warp_steps / lanes, max(r.bytes, 1.0) / lanes, 1, self.device
        ) + self.device.sync_overhead
        return costmodel.KernelRecord(r.name, r.flops, max(r.bytes, 1.0), t, r.launches)


def _now() -> float:
    import time

    return time.perf_counter()


def setup_case(
    cfg: dict[str, Any],
    mech: Mechanism | None = None,
    seed: int | None = None,
    scheduler: str = "bulk-sparse",
    splitting: str | None = None,
    workers: int = 1,
    cost_model: bool = False,
    device: costmodel.DeviceSpec | None = None,
) -> Simulation:
    mech = mech or load_mechanism(cfg["chem.mechanism"])
    seed = cfg["run.seed"] if seed is None else seed
    kcfg = KineticsConfig(
        eps_change=cfg["chem.eps_change"],
        T_reaction_min=cfg["chem.T_reaction_min"],
        K_max_bulk=cfg["chem.K_max_bulk"],
        N_active_star=cfg["chem.N_active_star"],
        K_max_sparse=cfg["chem.K_max_sparse"],
        workers=workers,
    )
    split = SplitConfig(
        cfl=cfg["flow.cfl"],
        transport=TransportConfig(cfg["transport.mu"], cfg["transport.alpha"], cfg["transport.D"]),
        bc=bc_from_config(cfg),
        reconstruction=cfg["flow.reconstruction"],
        splitting=splitting or cfg["flow.splitting"],
        scheduler=scheduler,
        chemistry=kcfg,
    )
    n_comp = SPEC0 + mech.n_species
    h = build_hierarchy(
        cfg["geometry.prob_lo"],
        cfg["geometry.prob_hi"],
        cfg["amr.n_cell"],
        0,
        cfg["amr.blocking_factor"],
        cfg["amr.max_grid_size"],
        None,
        n_comp,
        2,
        cfg["amr.ref_ratio"],
    )
    h.max_level = cfg["amr.max_level"]
    sim = Simulation(mech, cfg, h, split, seed, device=device or costmodel.DeviceSpec(), cost_model=cost_model)
    sim.fill_initial()
    _finalize(mech, sim.h)
    # grow refinement one level at a time, re-imposing the exact initial data
    for _ in range(cfg["amr.max_level"]):
        sim.regrid()
        sim.fill_initial()
        _finalize(mech, sim.h)
    return sim


# ------------------------------------------------------------------ output


def plotfile_rows(sim: Simulation, level: int) -> list[list[str]]:
    """Rows for one level: patch order, then row-major (i outer) cell order."""
    mech, h = sim.mech, sim.h
    rows = []
    for pid, p in enumerate(h.levels[level].patches):
        a = p.array()[p.interior]
        centers = h.cell_centers(level, p.box)
        x = centers[0]
        y = centers[1] if h.dim > 1 else np.zeros_like(x)
        rho = a[..., RHO]
        cols = [
            x,
            y,
            np.full(x.shape, level),
            np.full(x.shape, pid),
            rho,
            a[..., MOMENTUM[0]] / rho,
            a[..., MOMENTUM[1]] / rho,
            a[..., RHOE] / rho,
            a[..., TEMP],
        ] + [a[..., SPEC0 + k] / rho for k in range(mech.n_species)]
        flat = [np.asarray(c).ravel(order="C") for c in cols]
        for i in range(flat[0].size):
            row = [repr(float(flat[0][i])), repr(float(flat[1][i])), str(level), str(pid)]
            row += [repr(float(c[i])) for c in flat[4:]]
            rows.append(row)
    return rows


def plotfile_header(mech: Mechanism) -> list[str]:
    return ["x", "y", "level", "patch", "rho", "u", "v", "E", "T"] + [f"Y_{n}" for n in mech.species_names]


def write_plotfiles(sim: Simulation, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for lev in range(len(sim.h.levels)):
        path = outdir / f"plt{sim.step:05d}_level{lev}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(plotfile_header(sim.mech))
            w.writerows(plotfile_rows(sim, lev))
        paths.append(path)
    return paths
