"""Chemical mechanisms: text parsing plus thermodynamics and finite-rate kinetics.

Mechanisms are stored in a small line-oriented text format::

    units: SI-molar
    [elements]
    H   1.00794e-3
    [species]
    H2  H:2
    [thermo]
    H2  200 1000 3500  a1 .. a7 (low)  a1 .. a7 (high)
    [reactions]
    H + O2 <=> O + OH   A=2.65e10 b=-0.6707 Ea=7.13e4
    H + O2 + M <=> HO2 + M   A=2.8e6 b=-0.86 Ea=0 eff=O2:0,H2O:0

Thermo uses 7-coefficient polynomials in ``cp/R`` (NASA form) per temperature
range; ``a6`` carries the formation enthalpy and ``a7`` the entropy offset.
All rate evaluation is vectorized over cells (the last array axis) using
elementwise operations only, so a cell's result does not depend on which
other cells share the batch.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

R_UNIVERSAL = 8.314462618  # J/mol/K
P_STANDARD = 101325.0  # Pa, reference pressure for equilibrium constants

BUNDLED_MECHANISMS = {"h2o2_mini": "h2o2_mini.mech"}

_SECTIONS = ("elements", "species", "thermo", "reactions")
_COEF_RE = re.compile(r"^(\d+(?:\.\d*)?)([A-Za-z].*)$")
_KEYS = ("A", "b", "Ea", "eff")


class MechanismError(ValueError):
    """Invalid mechanism text or content."""


@dataclass(frozen=True)
class NasaPoly:
    T_low: float
    T_mid: float
    T_high: float
    low: tuple[float, ...]
    high: tuple[float, ...]


@dataclass(frozen=True)
class Species:
    name: str
    composition: dict[str, float]
    W: float
    thermo: NasaPoly


@dataclass(frozen=True)
class Reaction:
    reactants: dict[str, float]
    products: dict[str, float]
    A: float
    b: float
    Ea: float
    reversible: bool = True
    third_body: dict[str, float] | None = None

    @property
    def equation(self) -> str:
        def side(d: dict[str, float]) -> str:
            terms = [_fmt_term(n, v) for n, v in d.items()]
            if self.third_body is not None:
                terms.append("M")
            return " + ".join(terms)

        arrow = "<=>" if self.reversible else "=>"
        return f"{side(self.reactants)} {arrow} {side(self.products)}"


def _fmt_term(name: str, nu: float) -> str:
    if nu == 1:
        return name
    if float(nu).is_integer():
        return f"{int(nu)} {name}"
    return f"{nu!r} {name}"


@dataclass(frozen=True, eq=False)
class Mechanism:
    elements: dict[str, float]
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]
    R_u: float = R_UNIVERSAL

    def __post_init__(self) -> None:
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise MechanismError("duplicate species names")
        object.__setattr__(self, "_arrays", _MechArrays(self))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mechanism):
            return NotImplemented
        return (
            self.elements == other.elements
            and self.species == other.species
            and self.reactions == other.reactions
            and self.R_u == other.R_u
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    def species_index(self, name: str) -> int:
        return self.species_names.index(name)

    @property
    def W(self) -> np.ndarray:
        return self._arrays.W

    @property
    def T_min(self) -> float:
        return max(s.thermo.T_low for s in self.species)

    @property
    def T_max(self) -> float:
        return min(s.thermo.T_high for s in self.species)


class _MechArrays:
    """Dense arrays derived from a mechanism for vectorized evaluation."""

    def __init__(self, mech: Mechanism) -> None:
        ns = mech.n_species
        index = {s.name: i for i, s in enumerate(mech.species)}
        self.W = np.array([s.W for s in mech.species])
        self.T_low = np.array([s.thermo.T_low for s in mech.species])
        self.T_mid = np.array([s.thermo.T_mid for s in mech.species])
        self.T_high = np.array([s.thermo.T_high for s in mech.species])
        self.lo = np.array([s.thermo.low for s in mech.species])  # (ns, 7)
        self.hi = np.array([s.thermo.high for s in mech.species])

        nr = mech.n_reactions
        self.nu_f = np.zeros((ns, nr))
        self.nu_r = np.zeros((ns, nr))
        for j, r in enumerate(mech.reactions):
            for n, v in r.reactants.items():
                self.nu_f[index[n], j] += v
            for n, v in r.products.items():
                self.nu_r[index[n], j] += v
        self.nu = self.nu_r - self.nu_f
        self.dnu = self.nu.sum(axis=0)
        self.logA = np.array([math.log(r.A) if r.A > 0 else -np.inf for r in mech.reactions])
        self.b = np.array([r.b for r in mech.reactions])
        self.Ea_R = np.array([r.Ea / mech.R_u for r in mech.reactions])
        self.reversible = np.array([r.reversible for r in mech.reactions], dtype=bool)
        self.rev_rows = np.flatnonzero(self.reversible)

        # reactant / product slots: species index repeated by integer stoichiometry,
        # padded with the index ``ns`` which points at a unit "concentration"
        self.f_slots, self.f_pow = _slots(mech.reactions, index, ns, "reactants")
        self.r_slots, self.r_pow = _slots(mech.reactions, index, ns, "products")

        self.tb = np.array([r.third_body is not None for r in mech.reactions], dtype=bool)
        self.tb_eff = np.ones((nr, ns))
        for j, r in enumerate(mech.reactions):
            for n, e in (r.third_body or {}).items():
                self.tb_eff[j, index[n]] = e
        self.tb_rows = np.flatnonzero(self.tb)


def _slots(reactions, index, ns, attr):
    slots: list[list[int]] = []
    pows: list[tuple[int, float]] = []
    for j, r in enumerate(reactions):
        row: list[int] = []
        for n, v in getattr(r, attr).items():
            if float(v).is_integer():
                row.extend([index[n]] * int(v))
            else:
                pows.append((j, index[n], v))
        slots.append(row)
    width = max((len(s) for s in slots), default=0)
    arr = np.full((len(reactions), width), ns, dtype=np.intp)
    for j, row in enumerate(slots):
        arr[j, : len(row)] = row
    return arr, pows


# --------------------------------------------------------------------------- parsing


def parse_mechanism(text: str) -> Mechanism:
    """Parse mechanism text, validating species data and reaction balance."""
    section = None
    units_seen = False
    elements: dict[str, float] = {}
    comps: dict[str, tuple[dict[str, float], int]] = {}
    thermo: dict[str, NasaPoly] = {}
    rxn_lines: list[tuple[int, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("units:"):
            units = line.split(":", 1)[1].strip()
            if units != "SI-molar":
                raise MechanismError(f"line {lineno}: unsupported units {units!r}")
            units_seen = True
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise MechanismError(f"line {lineno}: unknown section [{section}]")
            continue
        toks = line.split()
        if section == "elements":
            if len(toks) != 2:
                raise MechanismError(f"line {lineno}: expected '<element> <weight>'")
            elements[toks[0]] = _float(toks[1], lineno)
        elif section == "species":
            comp: dict[str, float] = {}
            for t in toks[1:]:
                el, _, n = t.partition(":")
                if not n:
                    raise MechanismError(f"line {lineno}: bad composition token {t!r}")
                comp[el] = _float(n, lineno)
            if not comp:
                raise MechanismError(f"line {lineno}: species {toks[0]} has empty composition")
            if toks[0] in comps:
                raise MechanismError(f"line {lineno}: duplicate species {toks[0]}")
            comps[toks[0]] = (comp, lineno)
        elif section == "thermo":
            if len(toks) != 18:
                raise MechanismError(
                    f"line {lineno}: thermo record needs name, 3 temperatures, 14 coefficients"
                )
            vals = [_float(t, lineno) for t in toks[1:]]
            t_lo, t_mid, t_hi = vals[:3]
            if not (0 < t_lo < t_mid < t_hi):
                raise MechanismError(
                    f"line {lineno}: overlapping or unordered thermo ranges for {toks[0]}"
                )
            thermo[toks[0]] = NasaPoly(t_lo, t_mid, t_hi, tuple(vals[3:10]), tuple(vals[10:17]))
        elif section == "reactions":
            rxn_lines.append((lineno, line))
        else:
            raise MechanismError(f"line {lineno}: content outside of a section")

    if not units_seen:
        raise MechanismError("missing 'units: SI-molar' header")

    species = []
    for name, (comp, lineno) in comps.items():
        for el in comp:
            if el not in elements:
                raise MechanismError(f"line {lineno}: unknown element {el!r} in {name}")
        if name not in thermo:
            raise MechanismError(f"line {lineno}: no thermo record for species {name}")
        W = sum(elements[el] * n for el, n in comp.items())
        if W <= 0:
            raise MechanismError(f"line {lineno}: non-positive molecular weight for {name}")
        species.append(Species(name, comp, W, thermo[name]))
    extra = set(thermo) - set(comps)
    if extra:
        raise MechanismError(f"thermo given for undeclared species: {sorted(extra)}")

    by_name = {s.name: s for s in species}
    reactions = [_parse_reaction(line, lineno, by_name) for lineno, line in rxn_lines]
    return Mechanism(elements, tuple(species), tuple(reactions))


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MechanismError(f"line {lineno}: expected a number, got {tok!r}") from None


def _parse_side(tokens: list[str], lineno: int) -> tuple[dict[str, float], bool]:
    side: dict[str, float] = {}
    has_m = False
    coef = 1.0
    expect_term = True
    for tok in tokens:
        if tok == "+":
            if expect_term:
                raise MechanismError(f"line {lineno}: dangling '+'")
            expect_term = True
            continue
        if not expect_term and tok != "+":
            raise MechanismError(f"line {lineno}: missing '+' before {tok!r}")
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        m = _COEF_RE.match(tok)
        name = tok
        if m:
            coef, name = float(m.group(1)), m.group(2)
        if name == "M":
            has_m = True
        else:
            side[name] = side.get(name, 0.0) + coef
        coef = 1.0
        expect_term = False
    if expect_term:
        raise MechanismError(f"line {lineno}: incomplete reaction side")
    return side, has_m


def _parse_reaction(line: str, lineno: int, species: dict[str, Species]) -> Reaction:
    toks = line.split()
    eq_toks = [t for t in toks if not any(t.startswith(k + "=") for k in _KEYS)]
    kv = dict(t.split("=", 1) for t in toks if t not in eq_toks)
    arrows = [t for t in eq_toks if t in ("<=>", "=>")]
    if len(arrows) != 1:
        raise MechanismError(f"line {lineno}: reaction needs exactly one '<=>' or '=>'")
    k = eq_toks.index(arrows[0])
    reac, m_left = _parse_side(eq_toks[:k], lineno)
    prod, m_right = _parse_side(eq_toks[k + 1 :], lineno)
    if m_left != m_right:
        raise MechanismError(f"line {lineno}: third body 'M' must appear on both sides")
    for name in list(reac) + list(prod):
        if name not in species:
            raise MechanismError(f"line {lineno}: unknown species {name!r}")
    for key in ("A", "b", "Ea"):
        if key not in kv:
            raise MechanismError(f"line {lineno}: missing rate parameter {key}")
    eff = None
    if m_left:
        eff = {}
        if kv.get("eff"):
            for item in kv["eff"].split(","):
                name, _, val = item.partition(":")
                if name not in species:
                    raise MechanismError(f"line {lineno}: unknown species {name!r} in eff")
                eff[name] = _float(val, lineno)
    elif "eff" in kv:
        raise MechanismError(f"line {lineno}: efficiencies given without third body")
    if any(v <= 0 for v in list(reac.values()) + list(prod.values())):
        raise MechanismError(f"line {lineno}: stoichiometric coefficients must be positive")

    rxn = Reaction(
        reac,
        prod,
        _float(kv["A"], lineno),
        _float(kv["b"], lineno),
        _float(kv["Ea"], lineno),
        reversible=arrows[0] == "<=>",
        third_body=eff,
    )
    _check_balance(rxn, species, lineno)
    return rxn


def _check_balance(rxn: Reaction, species: dict[str, Species], lineno: int) -> None:
    mass_in = sum(species[n].W * v for n, v in rxn.reactants.items())
    mass_out = sum(species[n].W * v for n, v in rxn.products.items())
    if abs(mass_in - mass_out) > 1e-10 * max(mass_in, mass_out):
        raise MechanismError(f"line {lineno}: reaction is not mass balanced")
    els: dict[str, float] = {}
    for sign, side in ((1, rxn.reactants), (-1, rxn.products)):
        for n, v in side.items():
            for el, a in species[n].composition.items():
                els[el] = els.get(el, 0.0) + sign * v * a
    bad = [el for el, d in els.items() if d != 0]
    if bad:
        raise MechanismError(f"line {lineno}: reaction does not balance elements {bad}")


def serialize_mechanism(mech: Mechanism) -> str:
    """Inverse of :func:`parse_mechanism` (floats written with ``repr``)."""
    out = ["units: SI-molar", "", "[elements]"]
    out += [f"{e} {w!r}" for e, w in mech.elements.items()]
    out += ["", "[species]"]
    out += [s.name + " " + " ".join(f"{e}:{n!r}" for e, n in s.composition.items()) for s in mech.species]
    out += ["", "[thermo]"]
    for s in mech.species:
        t = s.thermo
        nums = (t.T_low, t.T_mid, t.T_high, *t.low, *t.high)
        out.append(s.name + " " + " ".join(repr(float(x)) for x in nums))
    out += ["", "[reactions]"]
    for r in mech.reactions:
        line = f"{r.equation}  A={r.A!r} b={r.b!r} Ea={r.Ea!r}"
        if r.third_body:
            line += " eff=" + ",".join(f"{n}:{v!r}" for n, v in r.third_body.items())
        out.append(line)
    return "\n".join(out) + "\n"


def load_mechanism(path_or_name: str | Path) -> Mechanism:
    """Load a mechanism from a file path or a bundled name (``h2o2_mini``)."""
    key = str(path_or_name)
    if key in BUNDLED_MECHANISMS:
        text = resources.files("reactamr.data").joinpath(BUNDLED_MECHANISMS[key]).read_text()
    else:
        text = Path(path_or_name).read_text(encoding="utf-8")
    return parse_mechanism(text)


# ------------------------------------------------------------------------- thermo


_warned: set[str] = set()


def _clamped(mech: Mechanism, T: np.ndarray) -> np.ndarray:
    a = mech._arrays
    Tc = np.clip(T[None, :], a.T_low[:, None], a.T_high[:, None])
    if not np.array_equal(Tc, np.broadcast_to(T, Tc.shape)):
        for k in np.flatnonzero((Tc != T[None, :]).any(axis=1)):
            name = mech.species[k].name
            if name not in _warned:
                _warned.add(name)
                logger.warning("temperature outside thermo range of %s; clamping", name)
    return Tc


def _coeffs(mech: Mechanism, Tc: np.ndarray) -> np.ndarray:
    a = mech._arrays
    use_lo = Tc < a.T_mid[:, None]
    return np.where(use_lo[:, :, None], a.lo[:, None, :], a.hi[:, None, :])  # (ns, n, 7)


def species_thermo(mech: Mechanism, T: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return dimensionless ``cp/R``, ``h/RT`` and ``s/R`` per species, shape (ns, n)."""
    T = np.asarray(T, dtype=float)
    Tc = _clamped(mech, T)
    c = _coeffs(mech, Tc)
    a1, a2, a3, a4, a5, a6, a7 = (c[..., i] for i in range(7))
    cp = a1 + Tc * (a2 + Tc * (a3 + Tc * (a4 + Tc * a5)))
    h = a1 + Tc * (a2 / 2 + Tc * (a3 / 3 + Tc * (a4 / 4 + Tc * a5 / 5))) + a6 / Tc
    s = a1 * np.log(Tc) + Tc * (a2 + Tc * (a3 / 2 + Tc * (a4 / 3 + Tc * a5 / 4))) + a7
    return cp, h, s


def _cv_u_molar(mech: Mechanism, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Molar cv (J/mol/K) and molar internal energy (J/mol), shape (ns, n)."""
    T = np.asarray(T, dtype=float)
    Tc = _clamped(mech, T)
    c = _coeffs(mech, Tc)
    a1, a2, a3, a4, a5, a6 = (c[..., i] for i in range(6))
    R = mech.R_u
    cp = a1 + Tc * (a2 + Tc * (a3 + Tc * (a4 + Tc * a5)))
    h_RT = a1 + Tc * (a2 / 2 + Tc * (a3 / 3 + Tc * (a4 / 4 + Tc * a5 / 5))) + a6 / Tc
    return R * (cp - 1.0), R * Tc * (h_RT - 1.0)


def cv_mass(mech: Mechanism, k: int, T):
    """Mass-specific constant-volume heat capacity of species ``k`` (J/kg/K)."""
    Tv = np.atleast_1d(np.asarray(T, dtype=float))
    cv, _ = _cv_u_molar(mech, Tv)
    out = cv[k] / mech.W[k]
    return out if np.ndim(T) else float(out[0])


def _mix(Y: np.ndarray, per_species: np.ndarray) -> np.ndarray:
    # fixed-order accumulation over species
    acc = Y[0] * per_species[0]
    for k in range(1, Y.shape[0]):
        acc = acc + Y[k] * per_species[k]
    return acc


def _as_batch(Y, T):
    Y = np.asarray(Y, dtype=float)
    scalar = Y.ndim == 1
    Yb = Y[:, None] if scalar else Y
    Tb = np.broadcast_to(np.asarray(T, dtype=float), Yb.shape[1:]).astype(float)
    return Yb, Tb, scalar


def mixture_cv(mech: Mechanism, Y, T):
    """Mixture cv = sum_k Y_k cv_k (J/kg/K)."""
    Yb, Tb, scalar = _as_batch(Y, T)
    cv, _ = _cv_u_molar(mech, Tb)
    out = _mix(Yb, cv / mech.W[:, None])
    return float(out[0]) if scalar else out


def internal_energy(mech: Mechanism, Y, T):
    """Mass-specific internal energy u = sum_k (Y_k / W_k) eps_k(T) (J/kg)."""
    Yb, Tb, scalar = _as_batch(Y, T)
    _, u = _cv_u_molar(mech, Tb)
    out = _mix(Yb, u / mech.W[:, None])
    return float(out[0]) if scalar else out


def _u_cv_mix(mech: Mechanism, Y: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cv, u = _cv_u_molar(mech, T)
    W = mech.W[:, None]
    return _mix(Y, u / W), _mix(Y, cv / W)


def mixture_R(mech: Mechanism, Y) -> np.ndarray:
    """Specific gas constant R_u * sum_k Y_k / W_k (J/kg/K)."""
    Y = np.asarray(Y, dtype=float)
    inv_W = 1.0 / mech.W
    acc = Y[0] * inv_W[0]
    for k in range(1, Y.shape[0]):
        acc = acc + Y[k] * inv_W[k]
    return mech.R_u * acc


def temperature_from_energy(
    mech: Mechanism,
    Y,
    u_target,
    T_guess,
    max_iter: int = 50,
    rtol: float = 1e-12,
    atol: float = 1e-9,
    T_rtol: float = 1e-10,
):
    """Newton solve of internal_energy(Y, T) = u_target at fixed composition.

    A cell is converged when its energy residual is within
    ``max(rtol*|u|, atol)`` or its last applied temperature step was below
    ``T_rtol*T``.  Each cell iterates independently; converged cells are
    frozen, so the result for a cell does not depend on the rest of the batch.
    """
    Yb, Ub, scalar = _as_batch(Y, u_target)
    T = np.broadcast_to(np.asarray(T_guess, dtype=float), Ub.shape).astype(float)
    T_lo, T_hi = mech.T_min, mech.T_max
    tol = np.maximum(rtol * np.abs(Ub), atol)

    u_lo, _ = _u_cv_mix(mech, Yb, np.full_like(Ub, T_lo))
    u_hi, _ = _u_cv_mix(mech, Yb, np.full_like(Ub, T_hi))
    if np.any(Ub < u_lo - tol) or np.any(Ub > u_hi + tol):
        raise ValueError(
            f"internal energy outside the range reachable in [{T_lo}, {T_hi}] K"
        )
    T = np.clip(T, T_lo, T_hi)

    todo = np.arange(Ub.size)
    for _ in range(max_iter + 1):
        u, cv = _u_cv_mix(mech, Yb[:, todo], T[todo])
        res = u - Ub[todo]
        done = np.abs(res) <= tol[todo]
        todo = todo[~done]
        if todo.size == 0:
            break
        step = res[~done] / cv[~done]
        T_new = np.clip(T[todo] - step, T_lo, T_hi)
        small = np.abs(T_new - T[todo]) <= T_rtol * T_new
        T[todo] = T_new
        todo = todo[~small]
        if todo.size == 0:
            break
    else:
        raise RuntimeError(f"temperature Newton iteration did not converge in {max_iter} steps")
    return float(T[0]) if scalar else T


# ------------------------------------------------------------------------ kinetics


def _production_rates(mech: Mechanism, T: np.ndarray, rho: np.ndarray, Y: np.ndarray) -> np.ndarray:
    a = mech._arrays
    ns, n = Y.shape
    C = np.empty((ns + 1, n))
    C[:ns] = rho * Y / a.W[:, None]
    C[ns] = 1.0

    lnT = np.log(T)
    log_kf = a.logA[:, None] + a.b[:, None] * lnT - a.Ea_R[:, None] / T
    kf = np.exp(log_kf)

    fwd = _slot_product(C, a.f_slots, a.f_pow)
    rev = _slot_product(C, a.r_slots, a.r_pow)
    q = kf * fwd
    if a.reversible.any():
        _, h, s = species_thermo(mech, T)
        g = h - s  # (ns, n) dimensionless Gibbs energy
        dg = a.nu[0][:, None] * g[0]
        for k in range(1, ns):
            dg = dg + a.nu[k][:, None] * g[k]
        ln_conc = np.log(P_STANDARD / (mech.R_u * T))
        # kr = kf / Kc,  ln Kc = -dg + dnu ln(P0 / RT)
        rows = a.rev_rows
        kr = np.exp(log_kf[rows] + dg[rows] - a.dnu[rows, None] * ln_conc)
        q[rows] = q[rows] - kr * rev[rows]
    if a.tb_rows.size:
        eff = a.tb_eff[a.tb_rows]
        M = eff[:, 0, None] * C[0]
        for k in range(1, ns):
            M = M + eff[:, k, None] * C[k]
        q[a.tb_rows] = q[a.tb_rows] * M

    omega = np.zeros((ns, n))
    for j in range(mech.n_reactions):
        omega = omega + a.nu[:, j, None] * q[j]
    return omega


def _slot_product(C: np.ndarray, slots: np.ndarray, pows) -> np.ndarray:
    n = C.shape[1]
    if slots.shape[1] == 0:
        out = np.ones((slots.shape[0], n))
    else:
        out = C[slots[:, 0]]
        for i in range(1, slots.shape[1]):
            out = out * C[slots[:, i]]
    for j, k, v in pows:
        out[j] = out[j] * C[k] ** v
    return out


def production_rates(mech: Mechanism, T, rho, Y):
    """Molar production rates Omega_k (mol/m^3/s) for one cell or a batch.

    ``Y`` has shape (ns,) or (ns, n); ``T`` and ``rho`` broadcast over cells.
    """
    Yb, Tb, scalar = _as_batch(Y, T)
    rho_b = np.broadcast_to(np.asarray(rho, dtype=float), Tb.shape)
    if np.any(Tb <= 0) or np.any(rho_b <= 0):
        raise ValueError("temperature and density must be positive")
    omega = _production_rates(mech, Tb, rho_b, Yb)
    if not np.all(np.isfinite(omega)):
        raise FloatingPointError("non-finite production rates (thermo out of range?)")
    return omega[:, 0] if scalar else omega


def mole_to_mass(mech: Mechanism, X: dict[str, float]) -> np.ndarray:
    """Mass fractions from (unnormalized) mole amounts by species name."""
    x = np.zeros(mech.n_species)
    for name, v in X.items():
        x[mech.species_index(name)] = v
    m = x * mech.W
    return m / m.sum()
