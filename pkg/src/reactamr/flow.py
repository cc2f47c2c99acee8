"""Compressible convection-diffusion on the patch hierarchy, plus operator splitting.

Conserved components follow :mod:`reactamr.state`.  The convective flux is
HLLC with a two-rarefaction pressure estimate for the wave speeds; the
diffusive flux uses centred differences across each face.  Time stepping is
two-stage TVD Runge-Kutta with a single global step for all levels.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kinetics
from .grid import BCSet, GridPatch, LevelHierarchy, average_down_all, fill_all_ghosts
from .mechanism import (
    Mechanism,
    internal_energy,
    mixture_R,
    mixture_cv,
    temperature_from_energy,
)
from .state import EINT, MOMENTUM, MX, MY, MZ, RHO, RHOE, SPEC0, TEMP, StateLayout

CONSERVED_FIXED = (RHO, MX, MY, MZ, RHOE)


class FlowError(RuntimeError):
    """Raised when a stage leaves a non-physical state behind."""


@dataclass(frozen=True)
class TransportConfig:
    mu: float = 0.0  # Pa s
    alpha: float = 0.0  # coefficient on grad T in the energy flux
    D: float = 0.0  # m^2/s

    def __post_init__(self) -> None:
        if min(self.mu, self.alpha, self.D) < 0:
            raise ValueError("transport coefficients must be non-negative")

    @property
    def active(self) -> bool:
        return self.mu > 0 or self.alpha > 0 or self.D > 0


@dataclass
class ConservedState:
    rho: np.ndarray
    mom: np.ndarray  # (3, ...)
    rhoE: np.ndarray
    rhoY: np.ndarray  # (n_species, ...)

    @classmethod
    def from_primitive(cls, mech: Mechanism, rho, vel, T, Y) -> ConservedState:
        rho = np.asarray(rho, dtype=float)
        vel = np.asarray(vel, dtype=float)
        Y = np.asarray(Y, dtype=float)
        e = np.asarray(internal_energy(mech, Y, T), dtype=float)
        ke = 0.5 * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
        return cls(rho, rho * vel, rho * (e + ke), rho * Y)


# --------------------------------------------------------------- state helpers


def pack_state(mech: Mechanism, rho, vel, T, Y) -> np.ndarray:
    """Full component vector(s), last axis = component, from primitives.

    ``rho`` and ``T`` have the cell shape, ``vel`` (3, ...) and ``Y`` (ns, ...).
    """
    rho = np.asarray(rho, dtype=float)
    T = np.broadcast_to(np.asarray(T, dtype=float), rho.shape)
    vel = np.broadcast_to(np.asarray(vel, dtype=float), (3,) + rho.shape)
    Y = np.asarray(Y, dtype=float)
    if Y.shape[1:] != rho.shape:
        Y = np.broadcast_to(Y.reshape((-1,) + (1,) * rho.ndim), (Y.shape[0],) + rho.shape)
    ns = mech.n_species
    e = np.asarray(internal_energy(mech, Y.reshape(ns, -1), T.ravel())).reshape(rho.shape)
    ke = 0.5 * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
    out = np.empty(rho.shape + (SPEC0 + ns,))
    out[..., RHO] = rho
    for i, c in enumerate(MOMENTUM):
        out[..., c] = rho * vel[i]
    out[..., RHOE] = rho * (e + ke)
    out[..., EINT] = e
    out[..., TEMP] = T
    for k in range(ns):
        out[..., SPEC0 + k] = rho * Y[k]
    return out


def state_from_pressure(mech: Mechanism, p, vel, T, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    T = np.asarray(T, dtype=float)
    R = np.asarray(mixture_R(mech, Y.reshape(mech.n_species, -1))).reshape(Y.shape[1:])
    return pack_state(mech, np.asarray(p, dtype=float) / (R * T), vel, T, Y)


def internal_energy_kernel(patch: GridPatch) -> None:
    """Fill component 5 with ρE/ρ - |u|²/2 straight from the flat storage.

    Ghost cells that were never filled (zero density) are left untouched.
    """
    d, N = patch.data, patch.N_pad
    rho = d[RHO * N : (RHO + 1) * N]
    if np.any(rho[patch.interior_offsets()] <= 0):
        raise FlowError("non-positive density in internal-energy kernel")
    live = rho > 0

    def per_mass(c: int) -> np.ndarray:
        return np.divide(d[c * N : (c + 1) * N], rho, out=np.zeros(N), where=live)

    ux, uy, uz, E = per_mass(MX), per_mass(MY), per_mass(MZ), per_mass(RHOE)
    np.copyto(d[EINT * N : (EINT + 1) * N], E - 0.5 * (ux * ux + uy * uy + uz * uz), where=live)


@dataclass
class Primitives:
    rho: np.ndarray
    vel: np.ndarray  # (3, ...)
    T: np.ndarray
    Y: np.ndarray  # (ns, ...)
    p: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    rhoE: np.ndarray


def _thermo(mech: Mechanism, rho: np.ndarray, T: np.ndarray, Y: np.ndarray):
    shape = rho.shape
    Yf = Y.reshape(Y.shape[0], -1)
    Tf = T.ravel()
    R = np.asarray(mixture_R(mech, Yf)).reshape(shape)
    cv = np.asarray(mixture_cv(mech, Yf, Tf)).reshape(shape)
    gamma = (cv + R) / cv
    p = rho * R * T
    c = np.sqrt(gamma * R * T)
    return p, c, gamma


def primitives(mech: Mechanism, arr: np.ndarray, recompute_T: bool = True) -> Primitives:
    """Primitive fields over a (padded) patch array shaped cells + (n_comp,)."""
    rho = arr[..., RHO]
    if np.any(rho <= 0):
        raise FlowError("non-positive density")
    vel = np.stack([arr[..., c] / rho for c in MOMENTUM])
    ns = mech.n_species
    Y = np.stack([arr[..., SPEC0 + k] / rho for k in range(ns)])
    if recompute_T:
        E = arr[..., RHOE] / rho
        e = E - 0.5 * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
        guess = np.clip(arr[..., TEMP], mech.T_min, mech.T_max)
        try:
            T = np.asarray(
                temperature_from_energy(mech, Y.reshape(ns, -1), e.ravel(), guess.ravel())
            ).reshape(rho.shape)
        except (ValueError, RuntimeError) as exc:
            raise FlowError(f"temperature recovery failed: {exc}") from exc
    else:
        T = arr[..., TEMP]
    p, c, gamma = _thermo(mech, rho, T, Y)
    return Primitives(rho, vel, T, Y, p, c, gamma, arr[..., RHOE])


# ----------------------------------------------------------------------- HLLC


@dataclass
class HLLCWaves:
    """Wave structure behind an HLLC flux evaluation."""

    p_estimate: np.ndarray  # two-rarefaction star-pressure estimate
    p_contact: np.ndarray  # mean of the left/right star pressures from the contact relation
    S_left: np.ndarray
    S_star: np.ndarray
    S_right: np.ndarray


def _hllc(L: Primitives, R: Primitives, n: np.ndarray) -> tuple[np.ndarray, HLLCWaves]:
    """HLLC flux for matching arrays of left/right face states.

    Returns (flux with leading component axis over [ρ, ρu, ρv, ρw, ρE, ρY...],
    wave structure).  Groupings are chosen so identical states reproduce the
    analytic flux exactly and mirrored inputs give exactly negated mass flux.
    """
    n = np.asarray(n, dtype=float).reshape((3,) + (1,) * L.rho.ndim)
    unL = n[0] * L.vel[0] + n[1] * L.vel[1] + n[2] * L.vel[2]
    unR = n[0] * R.vel[0] + n[1] * R.vel[1] + n[2] * R.vel[2]
    if np.any(L.rho <= 0) or np.any(R.rho <= 0) or np.any(L.p <= 0) or np.any(R.p <= 0):
        raise FlowError("vacuum or non-positive pressure at a face")

    g = 0.5 * (L.gamma + R.gamma)
    z = (g - 1.0) / (2.0 * g)
    base = L.c + R.c - 0.5 * (g - 1.0) * (unR - unL)
    if np.any(base <= 0):
        raise FlowError("vacuum generated between face states")
    p_tr = (base / (L.c / L.p**z + R.c / R.p**z)) ** (1.0 / z)

    def q(p, gk):
        return np.where(p_tr <= p, 1.0, np.sqrt(1.0 + (gk + 1.0) / (2.0 * gk) * (p_tr / p - 1.0)))

    SL = unL - L.c * q(L.p, L.gamma)
    SR = unR + R.c * q(R.p, R.gamma)
    mL = L.rho * (SL - unL)
    mR = R.rho * (SR - unR)
    S = 0.5 * (unL + unR) + ((R.p - L.p) + 0.5 * (mL + mR) * (unL - unR)) / (mL - mR)

    def analytic(P: Primitives, un):
        mass = P.rho * un
        mom = [mass * P.vel[i] + P.p * n[i] for i in range(3)]
        energy = un * (P.rhoE + P.p)
        spec = [mass * y for y in P.Y]
        return [mass, *mom, energy, *spec]

    def star(P: Primitives, un, Sk, m):
        chi = (Sk - un) / (Sk - S)
        rho_s = P.rho * chi
        p_s = P.p + m * (S - un)
        rhoE_s = chi * (P.rhoE + (S - un) * (P.rho * S + P.p / (Sk - un)))
        return rho_s, p_s, rhoE_s

    rL, psL, EL = star(L, unL, SL, mL)
    rR, psR, ER = star(R, unR, SR, mR)
    p_star = 0.5 * (psL + psR)

    def star_flux(P: Primitives, un, rho_s, rhoE_s):
        mass = S * rho_s
        mom = [mass * (P.vel[i] + (S - un) * n[i]) + p_star * n[i] for i in range(3)]
        energy = S * (rhoE_s + p_star)
        spec = [mass * y for y in P.Y]
        return [mass, *mom, energy, *spec]

    FL = analytic(L, unL)
    FR = analytic(R, unR)
    FsL = star_flux(L, unL, rL, EL)
    FsR = star_flux(R, unR, rR, ER)
    out = np.stack(
        [
            np.where(SL >= 0, a, np.where(S >= 0, b, np.where(SR > 0, c, d)))
            for a, b, c, d in zip(FL, FsL, FsR, FR)
        ]
    )
    return out, HLLCWaves(p_tr, p_star, SL, S, SR)


def hllc_flux(
    mech: Mechanism,
    left: ConservedState,
    right: ConservedState,
    normal,
    T_guess: float = 1000.0,
    return_waves: bool = False,
):
    """HLLC flux between two conserved states across a face with unit ``normal``.

    The result is ordered [ρ, ρu, ρv, ρw, ρE, ρY_1..ρY_Ns]; with
    ``return_waves`` an :class:`HLLCWaves` is returned alongside.
    """
    def prim(q: ConservedState) -> Primitives:
        rho = np.asarray(q.rho, dtype=float)
        if np.any(rho <= 0):
            raise FlowError("vacuum state (non-positive density)")
        vel = np.asarray(q.mom, dtype=float) / rho
        Y = np.asarray(q.rhoY, dtype=float) / rho
        e = np.asarray(q.rhoE) / rho - 0.5 * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
        ns = mech.n_species
        T = np.asarray(
            temperature_from_energy(mech, Y.reshape(ns, -1), np.ravel(e), np.full(np.size(e), T_guess))
        ).reshape(rho.shape)
        p, c, gamma = _thermo(mech, rho, T, Y)
        return Primitives(rho, vel, T, Y, p, c, gamma, np.asarray(q.rhoE, dtype=float))

    n = np.asarray(normal, dtype=float)
    if n.shape != (3,) or abs(np.dot(n, n) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit 3-vector")
    F, waves = _hllc(prim(left), prim(right), n)
    return (F, waves) if return_waves else F


# ------------------------------------------------------------ reconstruction


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _take(a: np.ndarray, axis: int, sl: slice) -> np.ndarray:
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def _face_states(mech: Mechanism, P: Primitives, d: int, g: int, n: int, recon: str):
    """Left/right states on the n+1 faces along axis d of a patch (other axes full)."""
    lo, hi = slice(g - 1, g + n), slice(g, g + n + 1)

    def sub(P: Primitives, sl: slice) -> Primitives:
        return Primitives(
            _take(P.rho, d, sl),
            _take(P.vel, d + 1, sl),
            _take(P.T, d, sl),
            _take(P.Y, d + 1, sl),
            _take(P.p, d, sl),
            _take(P.c, d, sl),
            _take(P.gamma, d, sl),
            _take(P.rhoE, d, sl),
        )

    if recon == "constant":
        return sub(P, lo), sub(P, hi)
    if recon != "minmod":
        raise ValueError(f"unknown reconstruction {recon!r}")

    def slope(f: np.ndarray, ax: int) -> np.ndarray:
        m = f.shape[ax]
        dm = _take(f, ax, slice(1, m - 1)) - _take(f, ax, slice(0, m - 2))
        dp = _take(f, ax, slice(2, m)) - _take(f, ax, slice(1, m - 1))
        return _minmod(dm, dp)  # defined on cells 1..m-2

    # cells g-1 .. g+n need slopes -> slope array index i-1
    def faces(f: np.ndarray, ax: int):
        s = slope(f, ax)
        left = _take(f, ax, lo) + 0.5 * _take(s, ax, slice(g - 2, g + n - 1))
        right = _take(f, ax, hi) - 0.5 * _take(s, ax, slice(g - 1, g + n))
        return left, right

    rl, rr = faces(P.rho, d)
    vl, vr = faces(P.vel, d + 1)
    Tl, Tr = faces(P.T, d)
    Yl, Yr = faces(P.Y, d + 1)

    def build(rho, vel, T, Y) -> Primitives:
        if np.any(rho <= 0) or np.any(T <= 0):
            raise FlowError("reconstruction produced a non-physical face state")
        T = np.clip(T, mech.T_min, mech.T_max)
        p, c, gamma = _thermo(mech, rho, T, Y)
        shape = rho.shape
        e = np.asarray(internal_energy(mech, Y.reshape(Y.shape[0], -1), T.ravel())).reshape(shape)
        rhoE = rho * (e + 0.5 * (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]))
        return Primitives(rho, vel, T, Y, p, c, gamma, rhoE)

    return build(rl, vl, Tl, Yl), build(rr, vr, Tr, Yr)


# ------------------------------------------------------------------ diffusion


def _diffusive_face_flux(
    P: Primitives, d: int, g: int, n: int, dx: tuple[float, ...], tr: TransportConfig, ncons: int
) -> np.ndarray:
    """Diffusive flux on the n+1 faces along axis d (other axes full padded extent)."""
    dim = P.rho.ndim
    lo, hi = slice(g - 1, g + n), slice(g, g + n + 1)
    F = np.zeros((ncons,) + _take(P.rho, d, lo).shape)
    if not tr.active:
        return F
    h = dx[d]

    def diff(f, ax_off=0):
        return (_take(f, d + ax_off, hi) - _take(f, d + ax_off, lo)) / h

    def avg(f, ax_off=0):
        return 0.5 * (_take(f, d + ax_off, lo) + _take(f, d + ax_off, hi))

    if tr.mu > 0:
        # velocity gradient tensor at the face: grad[i][j] = d u_i / d x_j
        grad = [[np.zeros_like(F[0]) for _ in range(3)] for _ in range(3)]
        for i in range(3):
            u = P.vel[i]
            grad[i][d] = diff(u)
            for t in range(dim):
                if t == d:
                    continue
                m = u.shape[t]
                cd = np.zeros_like(u)
                inner = [slice(None)] * dim
                inner[t] = slice(1, m - 1)
                cd[tuple(inner)] = (_take(u, t, slice(2, m)) - _take(u, t, slice(0, m - 2))) / (2 * dx[t])
                grad[i][t] = avg(cd)
        div = sum(grad[j][j] for j in range(dim))
        tau = []
        for i in range(3):
            t_id = tr.mu * (grad[i][d] + grad[d][i])
            if i == d:
                t_id = t_id - (2.0 / 3.0) * tr.mu * div
            tau.append(t_id)
        for i in range(3):
            F[MOMENTUM[i]] = tau[i]
        F[RHOE] = sum(avg(P.vel[i]) * tau[i] for i in range(3))
    if tr.alpha > 0:
        F[RHOE] = F[RHOE] + tr.alpha * diff(P.T)
    if tr.D > 0:
        rho_f = avg(P.rho)
        for k in range(P.Y.shape[0]):
            F[SPEC0 + k] = rho_f * tr.D * diff(P.Y[k])
    return F


def diffusive_flux(mech: Mechanism, patch: GridPatch, dx, transport: TransportConfig) -> list[np.ndarray]:
    """Diffusive face fluxes of a ghost-filled patch, one array per axis.

    Each array has a leading component axis and covers the interior faces
    normal to that axis over the interior cells of the other axes.
    """
    P = primitives(mech, patch.array())
    g = patch.n_ghost
    out = []
    for d, n in enumerate(patch.box.shape):
        F = _diffusive_face_flux(P, d, g, n, tuple(dx), transport, patch.n_comp)
        out.append(F[(slice(None),) + _other_interior(patch, d)])
    return out


def _other_interior(patch: GridPatch, d: int) -> tuple[slice, ...]:
    g = patch.n_ghost
    return tuple(slice(None) if a == d else slice(g, g + n) for a, n in enumerate(patch.box.shape))


# ------------------------------------------------------------------ operator


def _patch_rhs(
    mech: Mechanism, patch: GridPatch, dx, tr: TransportConfig, recon: str
) -> np.ndarray:
    """dU/dt on interior cells, shaped box.shape + (n_comp,)."""
    P = primitives(mech, patch.array())
    g = patch.n_ghost
    ns = mech.n_species
    out = np.zeros(patch.box.shape + (patch.n_comp,))
    cons = list(CONSERVED_FIXED) + [SPEC0 + k for k in range(ns)]
    for d, n in enumerate(patch.box.shape):
        L, R = _face_states(mech, P, d, g, n, recon)
        normal = np.zeros(3)
        normal[d] = 1.0
        Fc, _ = _hllc(L, R, normal)
        Fd = _diffusive_face_flux(P, d, g, n, tuple(dx), tr, patch.n_comp)
        sel = _other_interior(patch, d)
        for row, comp in enumerate(cons):
            f = Fc[row] - Fd[comp]
            f = f[sel]
            m = f.shape[d]
            dF = _take(f, d, slice(1, m)) - _take(f, d, slice(0, m - 1))
            out[..., comp] -= dF / dx[d]
    return out


def _finalize(mech: Mechanism, h: LevelHierarchy) -> None:
    """Refresh internal energy and temperature on interiors and guard positivity."""
    for level in h.levels:
        for p in level.patches:
            internal_energy_kernel(p)
            a = p.array()[p.interior]
            P = primitives(mech, a)
            if np.any(P.p <= 0):
                raise FlowError("non-positive pressure after stage")
            p.array()[p.interior + (TEMP,)] = P.T


@dataclass
class Timers:
    convection: float = 0.0
    chemistry: float = 0.0
    communication: float = 0.0
    other: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def euler_stage(
    mech: Mechanism,
    h: LevelHierarchy,
    dt: float,
    transport: TransportConfig,
    bc: BCSet,
    reconstruction: str = "constant",
    timers: Timers | None = None,
) -> None:
    """U <- U + dt L(U) on every level, in place."""
    timers = timers or Timers()
    t0 = _time.perf_counter()
    fill_all_ghosts(h, bc)
    t1 = _time.perf_counter()
    updates = []
    for lev, level in enumerate(h.levels):
        dx = h.dx(lev)
        for p in level.patches:
            updates.append((p, _patch_rhs(mech, p, dx, transport, reconstruction)))
    for p, L in updates:
        a = p.array()
        a[p.interior] = a[p.interior] + dt * L
    _finalize(mech, h)
    t2 = _time.perf_counter()
    timers.communication += t1 - t0
    timers.convection += t2 - t1


def _interiors(h: LevelHierarchy) -> list[np.ndarray]:
    return [p.array()[p.interior].copy() for level in h.levels for p in level.patches]


def rk2_advance(
    mech: Mechanism,
    h: LevelHierarchy,
    dt: float,
    transport: TransportConfig,
    bc: BCSet,
    reconstruction: str = "constant",
    timers: Timers | None = None,
) -> None:
    """Two-stage TVD Runge-Kutta over the whole hierarchy, in place."""
    timers = timers or Timers()
    U0 = _interiors(h)
    euler_stage(mech, h, dt, transport, bc, reconstruction, timers)
    euler_stage(mech, h, dt, transport, bc, reconstruction, timers)
    t0 = _time.perf_counter()
    patches = [p for level in h.levels for p in level.patches]
    for p, u0 in zip(patches, U0):
        a = p.array()
        a[p.interior] = 0.5 * u0 + 0.5 * a[p.interior]
    _finalize(mech, h)
    t1 = _time.perf_counter()
    average_down_all(h)
    t2 = _time.perf_counter()
    timers.convection += t1 - t0
    timers.communication += t2 - t1


def cfl_dt(mech: Mechanism, h: LevelHierarchy, cfl: float) -> float:
    """cfl * min over cells and axes of dx / (|u| + c)."""
    if not cfl > 0:
        raise ValueError("cfl number must be positive")
    best = np.inf
    for lev, level in enumerate(h.levels):
        dx = h.dx(lev)
        for p in level.patches:
            P = primitives(mech, p.array()[p.interior], recompute_T=False)
            for d in range(h.dim):
                best = min(best, float(np.min(dx[d] / (np.abs(P.vel[d]) + P.c))))
    return cfl * best


# ------------------------------------------------------------------ splitting


@dataclass
class SplitConfig:
    cfl: float = 0.5
    transport: TransportConfig = field(default_factory=TransportConfig)
    bc: BCSet | None = None
    reconstruction: str = "constant"
    splitting: str = "lie"  # "lie" | "strang"
    scheduler: str = "bulk-sparse"  # "naive" | "bulk-sparse"
    chemistry: kinetics.KineticsConfig = field(default_factory=kinetics.KineticsConfig)
    dt: float | None = None  # fixed step overrides the CFL estimate

    def __post_init__(self) -> None:
        if self.splitting not in ("lie", "strang"):
            raise ValueError(f"unknown splitting {self.splitting!r}")
        if self.scheduler not in ("naive", "bulk-sparse"):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.reconstruction not in ("constant", "minmod"):
            raise ValueError(f"unknown reconstruction {self.reconstruction!r}")
        if not self.cfl > 0:
            raise ValueError("cfl number must be positive")


@dataclass
class StepReport:
    dt: float
    chemistry: list[kinetics.KineticsResult]
    timers: Timers


def _chemistry(mech, h, cfg: SplitConfig, dt: float, time: float, timers: Timers) -> kinetics.KineticsResult:
    t0 = _time.perf_counter()
    kcfg = kinetics.KineticsConfig(**{**cfg.chemistry.__dict__, "t_final": dt})
    run = kinetics.integrate_naive if cfg.scheduler == "naive" else kinetics.integrate_bulk_sparse
    res = run(mech, h, kcfg, time=time)
    t1 = _time.perf_counter()
    average_down_all(h)
    t2 = _time.perf_counter()
    timers.chemistry += t1 - t0
    timers.communication += t2 - t1
    return res


def split_step(mech: Mechanism, h: LevelHierarchy, cfg: SplitConfig, time: float = 0.0) -> StepReport:
    """Advance flow and chemistry by one global step (Lie by default)."""
    timers = Timers()
    t0 = _time.perf_counter()
    bc = cfg.bc or BCSet.uniform("outflow", h.dim, MOMENTUM)
    dt = cfg.dt if cfg.dt is not None else cfl_dt(mech, h, cfg.cfl)
    timers.other += _time.perf_counter() - t0
    chem = []
    if cfg.splitting == "strang":
        chem.append(_chemistry(mech, h, cfg, 0.5 * dt, time, timers))
        rk2_advance(mech, h, dt, cfg.transport, bc, cfg.reconstruction, timers)
        chem.append(_chemistry(mech, h, cfg, 0.5 * dt, time + 0.5 * dt, timers))
    else:
        rk2_advance(mech, h, dt, cfg.transport, bc, cfg.reconstruction, timers)
        chem.append(_chemistry(mech, h, cfg, dt, time, timers))
    return StepReport(dt, chem, timers)


# ------------------------------------------------------------------ utilities


def totals(h: LevelHierarchy, comps: list[int], level: int = 0) -> np.ndarray:
    """Volume integrals of the given components over one level's patches."""
    vol = float(np.prod(h.dx(level)))
    out = np.zeros(len(comps))
    for p in h.levels[level].patches:
        a = p.array()[p.interior]
        for i, c in enumerate(comps):
            out[i] += a[..., c].sum() * vol
    return out


def fill_from(h: LevelHierarchy, fn: Callable[[tuple[np.ndarray, ...]], np.ndarray]) -> None:
    """Set every patch interior from a function of cell-centre coordinates."""
    for lev, level in enumerate(h.levels):
        for p in level.patches:
            p.array()[p.interior] = fn(h.cell_centers(lev, p.box))


def layout_for(mech: Mechanism) -> StateLayout:
    return StateLayout(mech.n_species)
