"""Command-line driver: ``run``, ``verify-kinetics`` and ``report``."""

from __future__ import annotations

import argparse
import csv
import sys
import time as _time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import costmodel, kinetics
from .analysis import ClusterResult, format_traces, kmeans_wasserstein, pad_traces, parse_traces
from .case import Simulation, setup_case, write_plotfiles
from .config import ConfigError, device_spec, load_config, parse_composition
from .flow import FlowError
from .mechanism import Mechanism, MechanismError, load_mechanism, mole_to_mass, parse_mechanism


class CLIError(Exception):
    """An error with a category for the ``error[<category>]`` line."""

    def __init__(self, category: str, message: str, status: int = 2) -> None:
        super().__init__(message)
        self.category = category
        self.status = status


SCHEDULERS = ("naive", "bulk-sparse")
SPLITTINGS = ("lie", "strang")


@dataclass(frozen=True)
class RunManifest:
    config: str
    out: Path
    mechanism: str | None = None
    instrument: bool = False
    scheduler: str = "bulk-sparse"
    splitting: str | None = None
    cost_model: bool = False
    seed: int | None = None
    workers: int = 1
    steps: int | None = None

    def __post_init__(self) -> None:
        if self.scheduler not in SCHEDULERS:
            raise CLIError("manifest", f"scheduler must be one of {', '.join(SCHEDULERS)}")
        if self.splitting is not None and self.splitting not in SPLITTINGS:
            raise CLIError("manifest", f"splitting must be one of {', '.join(SPLITTINGS)}")
        if self.mechanism is not None and not Path(self.mechanism).is_file():
            raise CLIError("manifest", f"mechanism file not found: {self.mechanism}")
        if self.workers < 1:
            raise CLIError("manifest", "workers must be >= 1")
        if self.steps is not None and self.steps < 0:
            raise CLIError("manifest", "steps must be non-negative")


def _mechanism(spec: str | None, default: str) -> Mechanism:
    try:
        if spec is None:
            return load_mechanism(default)
        p = Path(spec)
        return parse_mechanism(p.read_text()) if p.is_file() else load_mechanism(spec)
    except (MechanismError, OSError) as exc:
        raise CLIError("mechanism", str(exc)) from exc


# ------------------------------------------------------------------ csv io


KERNEL_FIELDS = ["kernel", "launches", "flops", "bytes", "time_s"]
ROOFLINE_FIELDS = KERNEL_FIELDS + ["ai", "perf_flops_s", "bound"]
CLUSTER_FIELDS = ["trace_id", "level", "fab", "cluster", "distance_to_centroid"]


def merge_records(records: Sequence[costmodel.KernelRecord]) -> list[costmodel.KernelRecord]:
    """Sum records that share a kernel name, keeping first-seen order."""
    out: dict[str, list[costmodel.KernelRecord]] = {}
    for r in records:
        out.setdefault(r.name, []).append(r)
    return [
        costmodel.KernelRecord(
            name,
            float(np.sum([r.flops for r in rs])),
            float(np.sum([r.bytes for r in rs])),
            float(np.sum([r.time for r in rs])),
            sum(r.launches for r in rs),
        )
        for name, rs in out.items()
    ]


def write_roofline(records: Sequence[costmodel.KernelRecord], device: costmodel.DeviceSpec, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROOFLINE_FIELDS)
        for r in records:
            p = costmodel.roofline_point(r, device)
            w.writerow([r.name, r.launches, repr(r.flops), repr(r.bytes), repr(r.time), repr(p.ai), repr(p.perf), p.bound])
        agg = costmodel.aggregate_roofline(records, device)
        w.writerow([
            "aggregate",
            sum(r.launches for r in records),
            repr(float(np.sum([r.flops for r in records]))),
            repr(float(np.sum([r.bytes for r in records]))),
            repr(float(np.sum([r.time for r in records]))),
            repr(agg.ai),
            repr(agg.perf),
            agg.bound,
        ])


def read_kernels(path: Path) -> list[costmodel.KernelRecord]:
    """Kernel records from a kernel or roofline CSV; aggregate rows are skipped."""
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CLIError("input", f"cannot read {path}: {exc}") from exc
    out = []
    for i, row in enumerate(rows, start=2):
        if row.get("kernel") == "aggregate":
            continue
        try:
            out.append(
                costmodel.KernelRecord(
                    row["kernel"], float(row["flops"]), float(row["bytes"]), float(row["time_s"]), int(row["launches"])
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CLIError("input", f"{path}:{i}: malformed kernel row ({exc})") from exc
    if not out:
        raise CLIError("input", f"{path}: no kernel rows")
    return out


def write_timing(timers: dict[str, float], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "seconds"])
        for k, v in timers.items():
            w.writerow([k, repr(v)])


# ------------------------------------------------------------------ run


def cmd_run(m: RunManifest) -> Simulation:
    try:
        cfg = load_config(m.config)
        device = device_spec(cfg)
    except ConfigError as exc:
        raise CLIError("config", str(exc)) from exc
    mech = _mechanism(m.mechanism, cfg["chem.mechanism"])
    steps = cfg["run.steps"] if m.steps is None else m.steps
    m.out.mkdir(parents=True, exist_ok=True)
    try:
        sim = setup_case(
            cfg, mech, m.seed, m.scheduler, m.splitting, m.workers, cost_model=m.cost_model, device=device
        )
    except (FlowError, ValueError, FloatingPointError) as exc:
        raise CLIError("setup", str(exc), 3) from exc
    write_plotfiles(sim, m.out)
    plot_int = cfg["run.plot_int"]
    t_start = _time.perf_counter()
    for n in range(1, steps + 1):
        try:
            sim.advance()
        except (FlowError, FloatingPointError, ValueError) as exc:
            raise CLIError("solver", f"step {n} (t = {sim.time!r}): {exc}", 3) from exc
        if (plot_int > 0 and n % plot_int == 0) or n == steps:
            t0 = _time.perf_counter()
            write_plotfiles(sim, m.out)
            sim.timers.other += _time.perf_counter() - t0
    wall = _time.perf_counter() - t_start
    timers = sim.timers.as_dict()
    # whatever the regions did not capture (bookkeeping, output) counts as other
    timers["other"] += max(wall - sum(timers.values()), 0.0)
    write_timing(timers, m.out / "timing.csv")
    if sim.records:
        merged = merge_records(sim.records)
        write_roofline(merged, device, m.out / "roofline.csv")
    if m.instrument:
        (m.out / "activity.log").write_text(format_traces(sim.traces))
    return sim


# ------------------------------------------------------------------ verify-kinetics


def stoichiometric_mixture(mech: Mechanism, phi: float) -> np.ndarray:
    """H2/air (or H2/O2 if the mechanism has no N2) at equivalence ratio ``phi``."""
    X = {"H2": 2.0 * phi, "O2": 1.0}
    if "N2" in mech.species_names:
        X["N2"] = 3.76
    try:
        return mole_to_mass(mech, X)
    except (KeyError, MechanismError) as exc:
        raise CLIError("mechanism", f"mechanism lacks a species needed for the H2 mixture: {exc}") from exc


def cmd_verify_kinetics(
    mech: Mechanism,
    T0s: Sequence[float],
    phi: float,
    p: float,
    out: Path,
    eps_change: float = 0.01,
    t_cap: float = 0.1,
    composition: str | None = None,
) -> list[kinetics.IgnitionResult]:
    if phi <= 0 or p <= 0:
        raise CLIError("input", "phi and p must be positive")
    if composition:
        try:
            Y0 = mole_to_mass(mech, parse_composition(composition))
        except (ConfigError, KeyError, MechanismError) as exc:
            raise CLIError("input", str(exc)) from exc
    else:
        Y0 = stoichiometric_mixture(mech, phi)
    cfg = kinetics.KineticsConfig(eps_change=eps_change)
    results = [kinetics.ignition_delay(mech, T0, p, Y0, cfg, t_cap=t_cap) for T0 in T0s]
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T0_K", "tau_ign_s", "flag"])
        for r in results:
            w.writerow([repr(r.T0), repr(r.tau) if r.tau is not None else "nan", "ok" if r.tau is not None else "no_ignition"])
    return results


# ------------------------------------------------------------------ report


def report_roofline(inputs: Path, out: Path, device: costmodel.DeviceSpec | None = None, figure: bool = True) -> None:
    from .plotting import roofline_figure

    device = device or costmodel.DeviceSpec()
    records = read_kernels(inputs)
    out.mkdir(parents=True, exist_ok=True)
    write_roofline(records, device, out / "roofline.csv")
    if figure:
        points = [costmodel.roofline_point(r, device) for r in records]
        roofline_figure([r.name for r in records], points, costmodel.aggregate_roofline(records, device), device, out / "roofline.png")


def report_clusters(
    inputs: Path, out: Path, k: int = 15, seed: int = 0, centroid: str = "mean", figure: bool = True
) -> ClusterResult:
    from .plotting import clusters_figure

    try:
        traces = parse_traces(inputs.read_text())
    except OSError as exc:
        raise CLIError("input", f"cannot read {inputs}: {exc}") from exc
    except ValueError as exc:
        raise CLIError("input", f"{inputs}: {exc}") from exc
    if len(traces) < k:
        raise CLIError("input", f"{inputs}: {len(traces)} traces is fewer than k={k}")
    X = pad_traces(traces)
    res = kmeans_wasserstein(X, k=k, seed=seed, centroid=centroid)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "clusters.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLUSTER_FIELDS)
        for i, tr in enumerate(traces):
            w.writerow([i, tr.level, tr.fab_id, int(res.assignments[i]), repr(float(res.distances[i]))])
    with (out / "centroids.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "n_members"] + [f"step_{s}" for s in range(res.centroids.shape[1])])
        for j, c in enumerate(res.centroids):
            w.writerow([j, int(np.count_nonzero(res.assignments == j))] + [repr(float(v)) for v in c])
    with (out / "inertia.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "inertia"])
        for i, v in enumerate(res.inertia_history):
            w.writerow([i, repr(v)])
    if figure:
        clusters_figure(X, res, out / "clusters.png")
    return res


def report_crossover(
    out: Path,
    species: Sequence[int] = (14, 30),
    cells: float = 1e6,
    g_max: int = 512,
    kernels_per_step: int = 1,
    device: costmodel.DeviceSpec | None = None,
    figure: bool = True,
) -> dict[int, costmodel.CrossoverResult]:
    from .plotting import crossover_figure

    if g_max < 1 or cells <= 0:
        raise CLIError("input", "g-max must be >= 1 and cells positive")
    grids = np.arange(1, g_max + 1)
    results = {
        ns: costmodel.fusion_crossover(grids, cells, ns, device=device, kernels_per_step=kernels_per_step)
        for ns in species
    }
    out.mkdir(parents=True, exist_ok=True)
    with (out / "crossover.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_species", "grids", "per_grid_s", "fused_s"])
        for ns, r in results.items():
            for g, a, b in zip(r.grids, r.per_grid, r.fused):
                w.writerow([ns, int(g), repr(float(a)), repr(float(b))])
    with (out / "crossover_summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_species", "G_star"])
        for ns, r in results.items():
            w.writerow([ns, "" if r.G_star is None else r.G_star])
    if figure:
        crossover_figure({f"{ns} species": r for ns, r in results.items()}, out / "crossover.png")
    return results


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reactamr", description="Reacting-flow AMR solver and performance-model tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a case file (path or bundled name)")
    run.add_argument("config")
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--mechanism", help="mechanism file overriding chem.mechanism")
    run.add_argument("--scheduler", choices=SCHEDULERS, default="bulk-sparse")
    run.add_argument("--splitting", choices=SPLITTINGS)
    run.add_argument("--instrument", action="store_true", help="write the activity log")
    run.add_argument("--cost-model", action="store_true", help="model kernel times on the configured device")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--steps", type=int, help="override run.steps")

    vk = sub.add_parser("verify-kinetics", help="constant-volume ignition-delay sweep")
    vk.add_argument("--mechanism", help="mechanism file or bundled name (default h2o2_mini)")
    vk.add_argument("--T0", type=float, nargs="+", default=[1500.0, 1750.0, 2000.0, 2250.0, 2500.0])
    vk.add_argument("--phi", type=float, default=1.0)
    vk.add_argument("--p", type=float, default=101325.0)
    vk.add_argument("--composition", help="mole amounts, e.g. H2:2,O2:1 (overrides --phi)")
    vk.add_argument("--eps-change", type=float, default=0.01)
    vk.add_argument("--t-cap", type=float, default=0.1)
    vk.add_argument("--out", type=Path, required=True)

    rp = sub.add_parser("report", help="roofline, clusters or crossover report")
    rsub = rp.add_subparsers(dest="kind", required=True)
    rr = rsub.add_parser("roofline")
    rr.add_argument("input", type=Path, help="kernel or roofline CSV from a run")
    rr.add_argument("--out", type=Path, required=True)
    rr.add_argument("--config", help="case file whose device.* keys set the device")
    rc = rsub.add_parser("clusters")
    rc.add_argument("input", type=Path, help="activity log from an instrumented run")
    rc.add_argument("--out", type=Path, required=True)
    rc.add_argument("--k", type=int, default=15)
    rc.add_argument("--seed", type=int, default=0)
    rc.add_argument("--centroid", choices=("mean", "barycenter"), default="mean")
    rx = rsub.add_parser("crossover")
    rx.add_argument("--out", type=Path, required=True)
    rx.add_argument("--species", type=int, nargs="+", default=[14, 30])
    rx.add_argument("--cells", type=float, default=1e6)
    rx.add_argument("--g-max", type=int, default=512)
    rx.add_argument("--kernels-per-step", type=int, default=1)
    return ap


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "run":
        m = RunManifest(
            args.config, args.out, args.mechanism, args.instrument, args.scheduler, args.splitting,
            args.cost_model, args.seed, args.workers, args.steps,
        )
        cmd_run(m)
    elif args.command == "verify-kinetics":
        try:
            kinetics.KineticsConfig(eps_change=args.eps_change)
        except ValueError as exc:
            raise CLIError("input", str(exc)) from exc
        mech = _mechanism(args.mechanism, "h2o2_mini")
        cmd_verify_kinetics(mech, args.T0, args.phi, args.p, args.out, args.eps_change, args.t_cap, args.composition)
    elif args.kind == "roofline":
        device = None
        if args.config:
            try:
                device = device_spec(load_config(args.config))
            except ConfigError as exc:
                raise CLIError("config", str(exc)) from exc
        report_roofline(args.input, args.out, device)
    elif args.kind == "clusters":
        if args.k < 1:
            raise CLIError("input", "k must be >= 1")
        report_clusters(args.input, args.out, args.k, args.seed, args.centroid)
    else:
        report_crossover(args.out, args.species, args.cells, args.g_max, args.kernels_per_step)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except CLIError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.status
    return 0


if __name__ == "__main__":
    sys.exit(main())
