"""Case files in ``section.key = value`` form.

Values are whitespace-separated tokens.  Keys are checked against a schema
so typos fail loudly; perturbation zones use ``perturb.<name>.<key>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .costmodel import DeviceSpec


class ConfigError(ValueError):
    pass


_KEY = re.compile(r"^[A-Za-z_][\w]*(\.[\w]+)+$")

# key -> (type, default); type is one of float, int, str, "floats", "ints"
SCHEMA: dict[str, tuple[Any, Any]] = {
    "geometry.prob_lo": ("floats", None),
    "geometry.prob_hi": ("floats", None),
    "amr.n_cell": ("ints", None),
    "amr.max_level": (int, 0),
    "amr.blocking_factor": (int, 8),
    "amr.max_grid_size": (int, 32),
    "amr.ref_ratio": (int, 2),
    "amr.regrid_int": (int, 10),
    "amr.tag_field": (str, "T"),
    "amr.tag_threshold": (float, 100.0),
    "flow.cfl": (float, 0.5),
    "flow.reconstruction": (str, "constant"),
    "flow.splitting": (str, "lie"),
    "flow.tile_size": ("ints", None),
    "transport.mu": (float, 0.0),
    "transport.alpha": (float, 0.0),
    "transport.D": (float, 0.0),
    "chem.mechanism": (str, "h2o2_mini"),
    "chem.eps_change": (float, 0.01),
    "chem.T_reaction_min": (float, 500.0),
    "chem.K_max_bulk": (int, 5),
    "chem.N_active_star": (int, 10_000),
    "chem.K_max_sparse": (int, 100_000),
    "init.T": (float, 300.0),
    "init.p": (float, 101325.0),
    "init.composition": (str, "H2:2,O2:1,N2:3.76"),
    "init.u": ("floats", [0.0, 0.0, 0.0]),
    "init.noise": (float, 0.0),
    "driver.lo": ("floats", None),
    "driver.hi": ("floats", None),
    "driver.T": (float, None),
    "driver.p": (float, None),
    "driver.composition": (str, None),
    "bc.xlo": (str, "outflow"),
    "bc.xhi": (str, "outflow"),
    "bc.ylo": (str, "outflow"),
    "bc.yhi": (str, "outflow"),
    "run.steps": (int, 10),
    "run.plot_int": (int, 0),
    "run.seed": (int, 0),
    **{f"device.{k}": (float if k != "warp_size" else int, None) for k in DeviceSpec.__dataclass_fields__},
}
PERTURB_KEYS = {"lo": "floats", "hi": "floats", "T": float, "p": float, "composition": str}
REQUIRED = ("geometry.prob_lo", "geometry.prob_hi", "amr.n_cell")


def _convert(kind, raw: str, key: str, lineno: int):
    toks = raw.split()
    try:
        if kind == "floats":
            return [float(t) for t in toks]
        if kind == "ints":
            return [int(t) for t in toks]
        if len(toks) != 1:
            raise ValueError
        return kind(toks[0])
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None


def parse_config(text: str) -> dict[str, Any]:
    """Parse case text into a flat dict with defaults filled in."""
    out: dict[str, Any] = {k: d for k, (_, d) in SCHEMA.items()}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not _KEY.match(key) or not value:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        seen.add(key)
        parts = key.split(".")
        if parts[0] == "perturb":
            if len(parts) != 3 or parts[2] not in PERTURB_KEYS:
                raise ConfigError(f"line {lineno}: unknown perturbation key {key}")
            out[key] = _convert(PERTURB_KEYS[parts[2]], value, key, lineno)
            continue
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key}")
        out[key] = _convert(SCHEMA[key][0], value, key, lineno)
    missing = [k for k in REQUIRED if out[k] is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    _validate(out)
    return out


def _validate(cfg: dict[str, Any]) -> None:
    dim = len(cfg["amr.n_cell"])
    if dim not in (1, 2):
        raise ConfigError("only 1D and 2D cases are supported")
    for k in ("geometry.prob_lo", "geometry.prob_hi"):
        if len(cfg[k]) != dim:
            raise ConfigError(f"{k} needs {dim} values")
    if any(h <= l for l, h in zip(cfg["geometry.prob_lo"], cfg["geometry.prob_hi"])):
        raise ConfigError("prob_hi must exceed prob_lo")
    if cfg["flow.cfl"] <= 0:
        raise ConfigError("flow.cfl must be positive")
    if cfg["run.steps"] < 0:
        raise ConfigError("run.steps must be non-negative")
    if cfg["flow.splitting"] not in ("lie", "strang"):
        raise ConfigError("flow.splitting must be lie or strang")
    if cfg["flow.reconstruction"] not in ("constant", "minmod"):
        raise ConfigError("flow.reconstruction must be constant or minmod")
    if cfg["amr.tag_field"] not in ("T", "rho", "p"):
        raise ConfigError("amr.tag_field must be T, rho or p")
    for side in ("xlo", "xhi", "ylo", "yhi"):
        if cfg[f"bc.{side}"] not in ("wall", "periodic", "outflow"):
            raise ConfigError(f"bc.{side} must be wall, periodic or outflow")
    if len(cfg["init.u"]) != 3:
        raise ConfigError("init.u needs 3 values")
    driver = [cfg[f"driver.{k}"] for k in ("lo", "hi", "T", "p")]
    if any(v is not None for v in driver) and any(v is None for v in driver):
        raise ConfigError("driver needs lo, hi, T and p together")
    for name in perturbation_names(cfg):
        for k in ("lo", "hi", "T", "p"):
            if f"perturb.{name}.{k}" not in cfg:
                raise ConfigError(f"perturbation {name} is missing {k}")


def perturbation_names(cfg: dict[str, Any]) -> list[str]:
    return sorted({k.split(".")[1] for k in cfg if k.startswith("perturb.")})


def device_spec(cfg: dict[str, Any]) -> DeviceSpec:
    over = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("device.") and v is not None}
    try:
        return DeviceSpec(**over)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        from importlib import resources

        bundled = resources.files("reactamr.data") / f"{path}.inputs"
        if not bundled.is_file():
            raise ConfigError(f"config file not found: {path}")
        return parse_config(bundled.read_text())
    return parse_config(p.read_text())


def parse_composition(text: str) -> dict[str, float]:
    out = {}
    for tok in text.split(","):
        name, _, val = tok.strip().partition(":")
        try:
            out[name] = float(val)
        except ValueError:
            raise ConfigError(f"bad composition entry {tok!r}") from None
    return out


@dataclass(frozen=True)
class Zone:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    T: float
    p: float
    composition: str | None

    def contains(self, centers: tuple[np.ndarray, ...]) -> np.ndarray:
        inside = np.ones(centers[0].shape, dtype=bool)
        for c, l, h in zip(centers, self.lo, self.hi):
            inside &= (c >= l) & (c <= h)
        return inside


def zones(cfg: dict[str, Any]) -> list[Zone]:
    """Driver first, then perturbations in name order; later zones win."""
    out = []
    if cfg["driver.T"] is not None:
        out.append(Zone(tuple(cfg["driver.lo"]), tuple(cfg["driver.hi"]), cfg["driver.T"], cfg["driver.p"], cfg["driver.composition"]))
    for name in perturbation_names(cfg):
        pre = f"perturb.{name}."
        out.append(Zone(tuple(cfg[pre + "lo"]), tuple(cfg[pre + "hi"]), cfg[pre + "T"], cfg[pre + "p"], cfg.get(pre + "composition")))
    return out
