from __future__ import annotations

import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reactamr.mechanism import R_UNIVERSAL, load_mechanism, parse_mechanism  # noqa: E402

# One species with R = 1 J/kg/K and cp/R = 3.5, i.e. gamma = 1.4.
GAMMA_GAS = f"""
units: SI-molar
[elements]
X {R_UNIVERSAL!r}
[species]
A X:1
[thermo]
A 1e-3 1.0 1e6  3.5 0 0 0 0 0 0  3.5 0 0 0 0 0 0
[reactions]
"""


def decay_mech(A: float = 1000.0, Ea: float = 0.0, heat: float = 0.0) -> str:
    """Isomers A -> B with equal heat capacity; ``heat`` (K) lowers B's energy."""
    return f"""
units: SI-molar
[elements]
X 0.03
[species]
A X:1
B X:1
[thermo]
A 200 1000 6000  2.5 0 0 0 0 0 0  2.5 0 0 0 0 0 0
B 200 1000 6000  2.5 0 0 0 0 {-heat!r} 0  2.5 0 0 0 0 {-heat!r} 0
[reactions]
A => B  A={A!r} b=0 Ea={Ea!r}
"""


def two_gas_mech(cv1: float, cv2: float, W: float = 0.03) -> str:
    """Two inert constant-cv species of equal weight."""
    a1 = cv1 * W / R_UNIVERSAL + 1.0
    a2 = cv2 * W / R_UNIVERSAL + 1.0
    return f"""
units: SI-molar
[elements]
X {W!r}
[species]
P X:1
Q X:1
[thermo]
P 10 1000 9000  {a1!r} 0 0 0 0 0 0  {a1!r} 0 0 0 0 0 0
Q 10 1000 9000  {a2!r} 0 0 0 0 0 0  {a2!r} 0 0 0 0 0 0
[reactions]
"""


def zero_rate_h2() -> str:
    """The bundled species and thermo with every reaction removed."""
    from reactamr.mechanism import serialize_mechanism

    text = serialize_mechanism(load_mechanism("h2o2_mini"))
    return text[: text.index("[reactions]")] + "[reactions]\n"


@pytest.fixture(scope="session")
def h2o2():
    return load_mechanism("h2o2_mini")


@pytest.fixture(scope="session")
def gamma_gas():
    return parse_mechanism(GAMMA_GAS)


@pytest.fixture(scope="session")
def zero_rate():
    return parse_mechanism(zero_rate_h2())


@pytest.fixture(scope="session")
def stoich_Y(h2o2):
    from reactamr.mechanism import mole_to_mass

    return mole_to_mass(h2o2, {"H2": 2.0, "O2": 1.0, "N2": 3.76})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


R_GAS = 8.314462618
# Arrhenius isomerization with Y_A = Y_B = 0.5: about 2 steps at 1000 K and
# 500 steps at 2000 K over 1 ms with eps_change = 0.05.
LONG_TAIL_MECH = decay_mech(A=6.25e6, Ea=11043 * R_GAS)


def chem_hierarchy(
    mech,
    cells,
    T,
    Y,
    max_grid_size=16,
    p=101325.0,
    max_level=0,
    tag=None,
    blocking_factor=8,
):
    """Quiescent hierarchy on the unit box; ``T(centers)`` gives temperature."""
    from reactamr.flow import fill_from, state_from_pressure
    from reactamr.grid import build_hierarchy
    from reactamr.state import SPEC0

    d = len(cells)
    h = build_hierarchy(
        (0.0,) * d,
        (1.0,) * d,
        cells,
        max_level,
        blocking_factor,
        max_grid_size,
        tag=tag,
        n_comp=SPEC0 + mech.n_species,
    )
    Y = np.asarray(Y, dtype=float)
    fill_from(h, lambda c: state_from_pressure(mech, p, 0.0, T(c), Y))
    return h


def hierarchy_arrays(h):
    """Copies of every patch's flat storage, for bitwise comparison."""
    return [h.patch(pid).data.copy() for pid in h.patch_ids()]


def long_tail_field(n: int, seed: int = 0):
    """Temperature field on an n x n unit-box grid with exact fractions:
    90% of cells at 1000 K, 9% spread over 1100-1500 K, 1% at 2000 K."""
    m = n * n
    n_hot = max(1, m // 100)
    n_mid = (9 * m) // 100
    vals = np.full(m, 1000.0)
    vals[:n_hot] = 2000.0
    vals[n_hot : n_hot + n_mid] = np.linspace(1100.0, 1500.0, n_mid)
    table = np.random.default_rng(seed).permutation(vals).reshape(n, n)

    def T(c):
        i = np.minimum((c[0] * n).astype(int), n - 1)
        j = np.minimum((c[1] * n).astype(int), n - 1)
        return table[i, j]

    return T


# ------------------------------------------------------------------ acceptance report

ACCEPTANCE: list[tuple[int, str, bool, float, str]] = []


@contextmanager
def criterion(number: int, title: str, limit_s: float, note: str = ""):
    """Time a numbered acceptance check, record PASS/FAIL, enforce its runtime bound."""
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE.append((number, title, False, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}".splitlines()[0]))
        raise
    elapsed = time.perf_counter() - t0
    ok = elapsed < limit_s
    ACCEPTANCE.append((number, title, ok, elapsed, note if ok else f"runtime {elapsed:.1f} s exceeds {limit_s:g} s"))
    assert ok, f"criterion {number} took {elapsed:.1f} s (limit {limit_s:g} s)"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok, elapsed, note in sorted(ACCEPTANCE):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.2f} s)"
        terminalreporter.write_line(line + (f"  [{note}]" if note else ""))
