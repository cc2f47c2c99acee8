from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import decay_mech, two_gas_mech
from reactamr.mechanism import (
    MechanismError,
    R_UNIVERSAL,
    cv_mass,
    internal_energy,
    load_mechanism,
    mixture_cv,
    parse_mechanism,
    production_rates,
    serialize_mechanism,
    temperature_from_energy,
)

H2O2 = load_mechanism("h2o2_mini")


def _random_Y(rng: np.random.Generator, n: int) -> np.ndarray:
    Y = rng.random(n) ** 3
    return Y / Y.sum()


@st.composite
def gas_states(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    T = draw(st.floats(600.0, 3400.0))
    rho = draw(st.floats(0.01, 20.0))
    return T, rho, _random_Y(rng, H2O2.n_species)


# ------------------------------------------------------------------ parsing


def test_minimal_two_species_file():
    mech = parse_mechanism(decay_mech())
    assert mech.n_species == 2
    assert mech.n_reactions == 1
    assert mech.species_names == ["A", "B"]
    assert not mech.reactions[0].reversible


def test_undeclared_species_in_reaction_is_rejected():
    text = decay_mech().replace("A => B", "A => C")
    with pytest.raises(MechanismError, match="unknown species 'C'"):
        parse_mechanism(text)


def test_bundled_mechanism_round_trips():
    text = serialize_mechanism(H2O2)
    again = parse_mechanism(text)
    assert again == H2O2
    assert serialize_mechanism(again) == text


def test_bundled_mechanism_size():
    assert H2O2.n_species <= 9
    assert H2O2.n_reactions <= 20


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda t: t.replace("A => B", "A => 2 B"), "not mass balanced"),
        (lambda t: t.replace("A 200 1000 6000", "A 200 7000 6000"), "overlapping or unordered"),
        (lambda t: t.replace("units: SI-molar", ""), "units"),
        (lambda t: t.replace("A=1000.0", "A=fast"), "line"),
        (lambda t: t.replace("[species]", "[nonsense]"), "unknown section"),
    ],
)
def test_parse_errors(mutate, message):
    with pytest.raises(MechanismError, match=message):
        parse_mechanism(mutate(decay_mech()))


def test_syntax_error_names_line():
    text = decay_mech().replace("A => B  A=1000.0", "A => => B  A=1000.0")
    with pytest.raises(MechanismError, match=r"line \d+"):
        parse_mechanism(text)


def test_element_imbalance_is_rejected():
    text = """
units: SI-molar
[elements]
X 0.01
Y 0.01
[species]
A X:1
B Y:1
[thermo]
A 200 1000 6000  2.5 0 0 0 0 0 0  2.5 0 0 0 0 0 0
B 200 1000 6000  2.5 0 0 0 0 0 0  2.5 0 0 0 0 0 0
[reactions]
A => B  A=1 b=0 Ea=0
"""
    with pytest.raises(MechanismError, match="balance elements"):
        parse_mechanism(text)


def test_parse_time_mass_balance_of_bundled_reactions():
    for r in H2O2.reactions:
        W = {s.name: s.W for s in H2O2.species}
        m_in = sum(W[n] * v for n, v in r.reactants.items())
        m_out = sum(W[n] * v for n, v in r.products.items())
        assert abs(m_in - m_out) <= 1e-10 * m_in


# ------------------------------------------------------------------ rates


def test_irreversible_unit_concentration_rate():
    mech = parse_mechanism(decay_mech(A=1e3))
    W = mech.W[0]
    # [A] = 1 mol/m^3 with rho = W and pure A
    om = production_rates(mech, 1000.0, W, np.array([1.0, 0.0]))
    assert om[0] == pytest.approx(-1000.0, rel=1e-14)
    assert om[1] == pytest.approx(1000.0, rel=1e-14)


def test_non_reacting_species_give_zero_rates():
    Y = np.zeros(H2O2.n_species)
    Y[H2O2.species_index("N2")] = 1.0
    om = production_rates(H2O2, 1500.0, 0.4, Y)
    assert np.all(om == 0.0)


def test_rates_match_scalar_oracle(stoich_Y):
    om = production_rates(H2O2, 1500.0, 0.4, stoich_Y)
    ref = np.array(oracles.rates(H2O2, 1500.0, 0.4, list(stoich_Y)))
    scale = np.abs(ref).max()
    assert np.abs(om - ref).max() <= 1e-8 * scale


@settings(max_examples=60, deadline=None)
@given(gas_states())
def test_rates_match_scalar_oracle_random_states(state):
    T, rho, Y = state
    om = production_rates(H2O2, T, rho, Y)
    ref = np.array(oracles.rates(H2O2, T, rho, list(Y)))
    nz = np.abs(ref) > 1e-6 * np.abs(ref).max()
    np.testing.assert_allclose(om[nz], ref[nz], rtol=1e-8)


@settings(max_examples=100, deadline=None)
@given(gas_states())
def test_rates_conserve_mass(state):
    T, rho, Y = state
    om = production_rates(H2O2, T, rho, Y)
    wom = H2O2.W * om
    assert abs(wom.sum()) <= 1e-10 * np.abs(wom).max()


@settings(max_examples=100, deadline=None)
@given(gas_states())
def test_rates_conserve_elements(state):
    T, rho, Y = state
    om = production_rates(H2O2, T, rho, Y)
    for el in H2O2.elements:
        a = np.array([s.composition.get(el, 0.0) for s in H2O2.species])
        terms = a * om
        scale = np.abs(terms).max()
        if scale > 0:
            assert abs(terms.sum()) <= 1e-10 * scale


def test_rates_reject_bad_state(stoich_Y):
    with pytest.raises(ValueError):
        production_rates(H2O2, -1.0, 0.4, stoich_Y)


def test_batched_rates_equal_single_cell_bitwise(rng):
    Y = np.stack([_random_Y(rng, H2O2.n_species) for _ in range(17)], axis=1)
    T = rng.uniform(800, 3000, 17)
    rho = rng.uniform(0.1, 5, 17)
    batch = production_rates(H2O2, T, rho, Y)
    for i in range(17):
        assert np.array_equal(batch[:, i], production_rates(H2O2, T[i], rho[i], Y[:, i]))


# ------------------------------------------------------------------ thermo


def test_constant_cv_gas():
    W = 0.03
    a1 = 717.0 * W / R_UNIVERSAL + 1.0
    mech = parse_mechanism(two_gas_mech(717.0, 717.0, W))
    for T in (300.0, 1234.5, 5000.0):
        assert cv_mass(mech, 0, T) == pytest.approx(717.0, rel=1e-13)
    assert a1 > 1


def test_mixture_cv_is_linear():
    mech = parse_mechanism(two_gas_mech(700.0, 900.0))
    assert mixture_cv(mech, np.array([0.5, 0.5]), 1000.0) == pytest.approx(800.0, rel=1e-13)


def test_h2_cv_matches_polynomial():
    k = H2O2.species_index("H2")
    sp = H2O2.species[k]
    assert cv_mass(H2O2, k, 1000.0) == pytest.approx(oracles.cv_mass(sp, 1000.0), rel=1e-13)


@pytest.mark.parametrize("name", [s.name for s in H2O2.species])
def test_cv_continuous_at_range_boundary(name):
    k = H2O2.species_index(name)
    Tm = H2O2.species[k].thermo.T_mid
    lo = cv_mass(H2O2, k, np.nextafter(Tm, 0))
    hi = cv_mass(H2O2, k, Tm)
    assert abs(hi - lo) <= 1e-6 * abs(hi)
    assert lo > 0 and hi > 0


def test_internal_energy_constant_cv_difference():
    mech = parse_mechanism(two_gas_mech(717.0, 717.0))
    Y = np.array([1.0, 0.0])
    du = internal_energy(mech, Y, 1500.0) - internal_energy(mech, Y, 400.0)
    assert du == pytest.approx(717.0 * 1100.0, rel=1e-12)


def test_internal_energy_single_species():
    k = H2O2.species_index("O2")
    Y = np.zeros(H2O2.n_species)
    Y[k] = 1.0
    sp = H2O2.species[k]
    eps = (oracles.h_over_RT(sp, 1300.0) - 1.0) * R_UNIVERSAL * 1300.0
    assert internal_energy(H2O2, Y, 1300.0) == pytest.approx(eps / sp.W, rel=1e-12)


def test_du_dT_matches_mixture_cv(stoich_Y):
    h = 1e-3
    fd = (internal_energy(H2O2, stoich_Y, 1200.0 + h) - internal_energy(H2O2, stoich_Y, 1200.0 - h)) / (2 * h)
    assert fd == pytest.approx(mixture_cv(H2O2, stoich_Y, 1200.0), rel=1e-4)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_internal_energy_strictly_increasing(seed):
    rng = np.random.default_rng(seed)
    Y = _random_Y(rng, H2O2.n_species)
    T = np.sort(rng.uniform(H2O2.T_min, H2O2.T_max, 50))
    T = np.unique(T)
    u = internal_energy(H2O2, np.repeat(Y[:, None], T.size, axis=1), T)
    assert np.all(np.diff(u) > 0)


def test_temperature_from_energy_linear_gas_one_step():
    mech = parse_mechanism(two_gas_mech(717.0, 717.0))
    Y = np.array([1.0, 0.0])
    u = internal_energy(mech, Y, 1500.0)
    for guess in (20.0, 700.0, 8000.0):
        assert temperature_from_energy(mech, Y, u, guess) == pytest.approx(1500.0, rel=1e-12)


def test_temperature_round_trip(rng):
    for _ in range(100):
        Y = _random_Y(rng, H2O2.n_species)
        T = rng.uniform(H2O2.T_min + 1, H2O2.T_max - 1)
        u = internal_energy(H2O2, Y, T)
        T_rec = temperature_from_energy(H2O2, Y, u, rng.uniform(H2O2.T_min, H2O2.T_max))
        assert abs(T_rec - T) <= 1e-6
        assert abs(internal_energy(H2O2, Y, T_rec) - u) <= max(1e-9 * abs(u), 1e-6)


def test_temperature_below_range_is_an_error(stoich_Y):
    u_min = internal_energy(H2O2, stoich_Y, H2O2.T_min)
    with pytest.raises(ValueError, match="outside"):
        temperature_from_energy(H2O2, stoich_Y, u_min - 1e4, 1000.0)


def test_clamping_outside_thermo_range_logs(caplog, monkeypatch):
    import reactamr.mechanism as mechanism

    monkeypatch.setattr(mechanism, "_warned", set())
    mech = parse_mechanism(decay_mech())
    Y = np.array([1.0, 0.0])
    with caplog.at_level("WARNING", logger="reactamr.mechanism"):
        cold = internal_energy(mech, Y, 10.0)
    assert "clamping" in caplog.text
    assert cold == internal_energy(mech, Y, 200.0)
