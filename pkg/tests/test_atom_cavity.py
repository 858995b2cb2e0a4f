import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbsqc.atom_cavity import (
    AtomState,
    CompositeState,
    DispersiveParams,
    LeakageError,
    RamseyParams,
    cavity_factor,
    compose,
    dispersive_evolve,
    measure_atom,
    measure_cavity_logical,
    pi_di,
    ramsey_apply,
    ramsey_matrix,
)
from gbsqc.fock import CavityState, NgbsParams, fock_state, make_ngbs, state_fidelity

SQ2 = math.sqrt(2)


def basis(phi):
    return make_ngbs(NgbsParams(2, 0.5, phi), 2)


def logical(a, b, phi=0.0):
    return CavityState(a * basis(phi).amplitudes + b * basis(phi + math.pi).amplitudes)


def random_unit(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


unit_pairs = st.tuples(*[st.floats(-1, 1)] * 4).filter(
    lambda t: sum(x * x for x in t) > 1e-3
)


def pair(t):
    v = np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]])
    return v / np.linalg.norm(v)


# --- compose ---------------------------------------------------------------

def test_compose_ground_vacuum():
    s = compose(AtomState.ground(), [fock_state(0, 2)])
    assert s.factor_dims == (2, 3)
    assert s.amplitude(0, 0) == 1
    assert np.count_nonzero(s.amplitudes) == 1


def test_compose_is_elementwise_product():
    atom = AtomState(1 / SQ2, 1 / SQ2)
    cav = basis(0.0)
    s = compose(atom, [cav])
    assert s.amplitudes.size == 6
    for a in range(2):
        for n in range(3):
            assert s.amplitude(a, n) == pytest.approx(atom.amplitudes[a] * cav.amplitudes[n])
    assert np.sum(np.abs(s.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-15)


def test_compose_two_cavities():
    s = compose(AtomState.excited(), [basis(0.0), basis(0.0)])
    assert s.factor_dims == (2, 3, 3)
    assert s.amplitudes.size == 18


def test_compose_requires_a_cavity():
    with pytest.raises(ValueError):
        compose(AtomState.ground(), [])


def test_composite_validation():
    with pytest.raises(ValueError, match="factor_dims"):
        CompositeState((2, 3), np.ones(5) / math.sqrt(5))
    with pytest.raises(ValueError, match="normalized"):
        CompositeState((2, 3), np.ones(6))


# --- Ramsey zones ------------------------------------------------------------

def test_ramsey_half_pulse_on_ground():
    out = ramsey_apply(AtomState.ground(), RamseyParams(math.pi / 2, 0.0))
    assert out.amp_g == pytest.approx(1 / SQ2)
    assert out.amp_e == pytest.approx(1 / SQ2)


@pytest.mark.parametrize("varphi", [0.0, 0.4, 2.0, -3.0])
def test_ramsey_zero_area_is_identity(varphi):
    np.testing.assert_array_equal(ramsey_matrix(0.0, varphi), np.eye(2))


def test_ramsey_pi_half_phase_is_sigma_x_up_to_minus_i():
    p = RamseyParams(math.pi, math.pi / 2)
    g = ramsey_apply(AtomState.ground(), p)
    e = ramsey_apply(AtomState.excited(), p)
    assert g.amp_g == pytest.approx(0, abs=1e-16) and g.amp_e == pytest.approx(-1j)
    assert e.amp_e == pytest.approx(0, abs=1e-16) and e.amp_g == pytest.approx(-1j)


def test_ramsey_on_composite_leaves_cavity_alone():
    s = compose(AtomState.ground(), [basis(0.3)])
    out = ramsey_apply(s, RamseyParams(math.pi / 2, 0.0))
    want = compose(AtomState(1 / SQ2, 1 / SQ2), [basis(0.3)])
    np.testing.assert_allclose(out.amplitudes, want.amplitudes, atol=1e-15)


def test_ramsey_matches_hand_written_u_rotation():
    # (cos, -e^{i v} sin; e^{-i v} sin, cos)
    theta, v = 1.234, -0.77
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    want = np.array([[c, -np.exp(1j * v) * s], [np.exp(-1j * v) * s, c]])
    np.testing.assert_allclose(ramsey_matrix(theta, v), want, atol=1e-15)


@given(t1=st.floats(-10, 10), t2=st.floats(-10, 10), v=st.floats(-10, 10))
def test_ramsey_same_axis_additivity(t1, t2, v):
    np.testing.assert_allclose(
        ramsey_matrix(t2, v) @ ramsey_matrix(t1, v), ramsey_matrix(t1 + t2, v), atol=1e-12
    )


# --- dispersive interaction --------------------------------------------------

@pytest.mark.parametrize("phi", np.arange(8) * math.pi / 4)
def test_pi_di_flips_binomial_state_when_excited(phi):
    s = pi_di(compose(AtomState.excited(), [basis(phi)]), 0)
    want = compose(AtomState.excited(), [basis(phi + math.pi)])
    assert state_fidelity(s, want) == pytest.approx(1.0, abs=1e-12)


def test_pi_di_leaves_ground_alone():
    s = compose(AtomState.ground(), [basis(0.0)])
    np.testing.assert_array_equal(pi_di(s, 0).amplitudes, s.amplitudes)


def test_dispersive_phase_per_photon():
    s = compose(AtomState.excited(), [logical(0.6, 0.8)])
    chi = 0.37
    out = dispersive_evolve(s, 0, DispersiveParams(chi))
    for n in range(3):
        assert out.amplitude(1, n) == pytest.approx(s.amplitude(1, n) * np.exp(-1j * n * chi))


def test_full_period_is_identity():
    rng = np.random.default_rng(0)
    s = CompositeState((2, 3), random_unit(rng, 6))
    out = dispersive_evolve(s, 0, DispersiveParams(2 * math.pi))
    np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-12)


def test_pi_di_by_linearity_swaps_logical_coefficients():
    s = pi_di(compose(AtomState.excited(), [logical(0.6, 0.8j)]), 0)
    want = compose(AtomState.excited(), [logical(0.8j, 0.6)])
    np.testing.assert_allclose(s.amplitudes, want.amplitudes, atol=1e-15)


def test_pi_di_twice_is_identity():
    rng = np.random.default_rng(1)
    s = CompositeState((2, 3, 3), random_unit(rng, 18))
    for k in (0, 1):
        np.testing.assert_allclose(pi_di(pi_di(s, k), k).amplitudes, s.amplitudes, atol=1e-12)


@given(ab=unit_pairs, cd=unit_pairs)
@settings(max_examples=100)
def test_pi_di_realizes_cnot_superposition(ab, cd):
    a, b = pair(ab)
    c, d = pair(cd)
    out = pi_di(compose(AtomState(c, d), [logical(a, b)]), 0)
    zero, one = basis(0.0).amplitudes, basis(math.pi).amplitudes
    g, e = np.array([1, 0]), np.array([0, 1])
    want = (
        a * c * np.kron(g, zero)
        + b * c * np.kron(g, one)
        + a * d * np.kron(e, one)
        + b * d * np.kron(e, zero)
    )
    np.testing.assert_allclose(out.amplitudes, want, atol=1e-12)


def test_dispersive_bad_cavity_index():
    s = compose(AtomState.ground(), [basis(0.0)])
    with pytest.raises(IndexError):
        pi_di(s, 1)


def test_dispersive_commutes_across_cavities():
    rng = np.random.default_rng(2)
    s = CompositeState((2, 3, 3), random_unit(rng, 18))
    p1, p2 = DispersiveParams(0.9), DispersiveParams(2.3)
    x = dispersive_evolve(dispersive_evolve(s, 0, p1), 1, p2)
    y = dispersive_evolve(dispersive_evolve(s, 1, p2), 0, p1)
    np.testing.assert_allclose(x.amplitudes, y.amplitudes, atol=1e-14)


def test_unitarity_on_random_inputs():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        s = CompositeState((2, 3, 3), random_unit(rng, 18))
        r = ramsey_apply(s, RamseyParams(*rng.uniform(-7, 7, 2)))
        d = dispersive_evolve(s, int(rng.integers(2)), DispersiveParams(rng.uniform(-7, 7)))
        for out in (r, d):
            assert abs(np.vdot(out.amplitudes, out.amplitudes).real - 1) < 1e-12


# --- measurement -------------------------------------------------------------

def test_measure_equal_superposition():
    s = compose(AtomState(1 / SQ2, 1 / SQ2), [basis(0.0)])
    g, e = measure_atom(s)
    assert (g.outcome_label, e.outcome_label) == ("g", "e")
    assert g.probability == pytest.approx(0.5) and e.probability == pytest.approx(0.5)
    assert g.post_state.amplitude(0, 1) == pytest.approx(1 / SQ2)


def test_measure_keeps_null_branch():
    g, e = measure_atom(compose(AtomState.excited(), [basis(0.0)]))
    assert g.probability == 0.0 and g.post_state is None
    assert e.probability == 1.0


def test_remeasure_is_repeatable():
    rng = np.random.default_rng(4)
    s = CompositeState((2, 3), random_unit(rng, 6))
    for br in measure_atom(s):
        again = {b.outcome_label: b.probability for b in measure_atom(br.post_state)}
        assert again[br.outcome_label] == pytest.approx(1.0, abs=1e-12)


def test_logical_measurement_equal_split():
    s = compose(AtomState.ground(), [logical(1 / SQ2, 1 / SQ2)])
    b0, b1, leak = measure_cavity_logical(s, 0, 0.0)
    assert [b.outcome_label for b in (b0, b1, leak)] == ["logical_0", "logical_1", "leak"]
    assert b0.probability == pytest.approx(0.5) and b1.probability == pytest.approx(0.5)
    assert leak.probability < 1e-30 and leak.post_state is None


def _copy_state(a, b):
    s = compose(AtomState(1 / SQ2, 1 / SQ2), [logical(a, b)])
    return pi_di(s, 0)


def test_logical_measurement_copies_cavity_into_atom():
    a, b = 0.6, 0.8j
    b0, b1, _ = measure_cavity_logical(_copy_state(a, b), 0, 0.0)
    atom0 = b0.post_state.tensor() @ basis(0.0).amplitudes.conj()
    atom1 = b1.post_state.tensor() @ basis(math.pi).amplitudes.conj()
    assert abs(np.vdot(atom0, [a, b])) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(atom1, [b, a])) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_logical_measurement_detects_leak():
    # |0> has half its weight on (|0> - |2>)/sqrt2, outside the logical span
    s = compose(AtomState.ground(), [fock_state(0, 2)])
    with pytest.raises(LeakageError) as info:
        measure_cavity_logical(s, 0, 0.0)
    assert info.value.probability == pytest.approx(0.5)
    branches = measure_cavity_logical(s, 0, 0.0, leak_tolerance=None)
    assert branches[2].probability == pytest.approx(0.5)
    assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)


def test_logical_measurement_needs_three_levels():
    s = compose(AtomState.ground(), [fock_state(0, 1)])
    with pytest.raises(ValueError):
        measure_cavity_logical(s, 0, 0.0)


def test_measure_probabilities_sum_to_one():
    rng = np.random.default_rng(5)
    for _ in range(200):
        s = CompositeState((2, 3, 3), random_unit(rng, 18))
        for branches in (
            measure_atom(s),
            measure_cavity_logical(s, 1, rng.uniform(0, 6), leak_tolerance=None),
        ):
            assert abs(sum(b.probability for b in branches) - 1) < 1e-12
            for b in branches:
                if b.post_state is not None:
                    assert abs(np.vdot(b.post_state.amplitudes, b.post_state.amplitudes) - 1) < 1e-12


def test_cavity_factor_of_product_state():
    cav = logical(0.6, 0.8)
    s = compose(AtomState(0.6, 0.8j), [basis(1.0), cav])
    assert state_fidelity(cavity_factor(s, 1), cav) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError, match="entangled"):
        cavity_factor(pi_di(compose(AtomState(1 / SQ2, 1 / SQ2), [cav]), 0), 0)
