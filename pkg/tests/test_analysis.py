import cmath
import math

import numpy as np
import pytest

from gbsqc.analysis import (
    CNOT,
    HADAMARD,
    GateMatrix,
    NonLinearityError,
    extract_logical_gate,
    gate_fidelity,
    jitter_sweep,
    monte_carlo_run,
    probe_inputs,
)

PARAMS = {
    "prepare": {},
    "cnot": {},
    "rotate-u": {"theta": 1.3, "varphi": -0.4},
    "rotate-z": {"theta": 2.2},
    "hadamard": {},
    "qpg": {},
}


def _logical_vec(k, phi=0.0):
    ph = phi + k * math.pi
    return [math.sqrt(math.comb(2, n)) / 2 * cmath.exp(1j * n * ph) for n in range(3)]


def cnot_jitter_oracle(v, eps):
    """|<ideal|noisy>|^2 for the atom-cavity CNOT, built without the package."""

    def joint(chi):
        out = []
        for c in range(2):
            for n in range(3):
                amp = v[2 * c] * _logical_vec(0)[n] + v[2 * c + 1] * _logical_vec(1)[n]
                out.append(amp * (cmath.exp(-1j * n * chi) if c == 1 else 1))
        return out

    a, b = joint(math.pi), joint(math.pi * (1 + eps))
    return abs(sum(x.conjugate() * y for x, y in zip(a, b))) ** 2


# Worst case of cnot_jitter_oracle over the probe inputs at eps = 0.01.
CNOT_JITTER_AT_1PCT = 0.999260023160602


# --- gate extraction -----------------------------------------------------------------

def test_extract_cnot():
    m = extract_logical_gate("cnot")
    assert m.dim == 4 and m.basis == ["00", "01", "10", "11"]
    np.testing.assert_allclose(m.entries, CNOT, atol=1e-9)


def test_extract_rotate_z_pi():
    np.testing.assert_allclose(
        extract_logical_gate("rotate-z", {"theta": math.pi}).entries, np.diag([1, -1]), atol=1e-9
    )


def test_extract_qpg():
    np.testing.assert_allclose(extract_logical_gate("qpg").entries, np.diag([1, -1]), atol=1e-9)


def test_extract_prepare_branches():
    np.testing.assert_allclose(extract_logical_gate("prepare").entries, np.eye(2), atol=1e-9)
    np.testing.assert_allclose(
        extract_logical_gate("prepare", path="g").entries, np.diag([1, -1]), atol=1e-9
    )


def test_extract_corrected_path_matches_primary():
    m0 = extract_logical_gate("rotate-u", PARAMS["rotate-u"])
    m1 = extract_logical_gate("rotate-u", PARAMS["rotate-u"], path="logical_1/e")
    assert gate_fidelity(m0, m1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("theta", np.arange(15) * 2 * math.pi / 14)
@pytest.mark.parametrize("varphi", np.arange(7) * math.pi / 3)
def test_extract_rotate_u_grid(theta, varphi):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    want = np.array([[c, -np.exp(1j * varphi) * s], [np.exp(-1j * varphi) * s, c]])
    m = extract_logical_gate("rotate-u", {"theta": theta, "varphi": varphi})
    assert m.is_unitary()
    assert gate_fidelity(m, want) == pytest.approx(1.0, abs=1e-9)


def test_extract_hadamard():
    m = extract_logical_gate("hadamard")
    assert gate_fidelity(m, HADAMARD) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(m.entries, HADAMARD, atol=1e-9)


def test_extract_phase_convention():
    m = extract_logical_gate("rotate-u", {"theta": 1.0, "varphi": 0.5}).entries
    assert m[0, 0].imag == pytest.approx(0, abs=1e-15) and m[0, 0].real > 0


def test_extract_flags_nonlinear_branch(monkeypatch):
    import gbsqc.analysis as analysis

    real = analysis.run_protocol

    def skewed(name, vec, phi=0.0, **params):
        # unbalance the superposition input
        if np.count_nonzero(vec) > 1:
            vec = np.array([0.6, 0.8])
        return real(name, vec, phi, **params)

    monkeypatch.setattr(analysis, "run_protocol", skewed)
    with pytest.raises(NonLinearityError):
        extract_logical_gate("rotate-z", {"theta": 0.0})


# --- gate fidelity ----------------------------------------------------------------------

def test_gate_fidelity_examples():
    u = extract_logical_gate("rotate-u", PARAMS["rotate-u"])
    assert gate_fidelity(u, u) == pytest.approx(1.0, abs=1e-12)
    assert gate_fidelity(u, 1j * u.entries) == pytest.approx(1.0, abs=1e-12)
    assert gate_fidelity(CNOT, np.eye(4)) == pytest.approx(0.5, abs=1e-15)


def test_gate_fidelity_errors():
    with pytest.raises(ValueError, match="dimension"):
        gate_fidelity(np.eye(2), np.eye(4))
    with pytest.raises(ValueError, match="unitary"):
        gate_fidelity(np.eye(2), 2 * np.eye(2))
    with pytest.raises(ValueError):
        GateMatrix(np.ones((2, 3)))


# --- jitter ------------------------------------------------------------------------------

def test_probe_inputs():
    probes = probe_inputs(4)
    assert len(probes) == 6
    for v in probes:
        assert np.linalg.norm(v) == pytest.approx(1.0)


@pytest.mark.parametrize("name", sorted(PARAMS))
def test_jitter_zero_is_exact(name):
    (pt,) = jitter_sweep(name, [0.0], PARAMS[name])
    assert pt.fidelity == pytest.approx(1.0, abs=1e-12)
    assert pt.protocol == name


@pytest.mark.parametrize("eps", [0.01, -0.01, 0.03, 0.05])
def test_cnot_jitter_matches_oracle(eps):
    want = min(cnot_jitter_oracle(v, eps) for v in probe_inputs(4))
    (pt,) = jitter_sweep("cnot", [eps])
    assert pt.fidelity == pytest.approx(want, abs=1e-12)


def test_cnot_jitter_regression_value():
    (pt,) = jitter_sweep("cnot", [0.01])
    assert pt.fidelity >= 0.99
    assert pt.fidelity == pytest.approx(CNOT_JITTER_AT_1PCT, abs=1e-6)


def test_cnot_jitter_symmetric():
    eps = np.linspace(0, 0.05, 11)
    plus = jitter_sweep("cnot", eps)
    minus = jitter_sweep("cnot", -eps)
    for p, m in zip(plus, minus):
        assert p.fidelity == pytest.approx(m.fidelity, abs=1e-12)


@pytest.mark.parametrize("name", sorted(PARAMS))
def test_jitter_monotone(name):
    fs = [p.fidelity for p in jitter_sweep(name, np.linspace(0, 0.05, 11), PARAMS[name])]
    assert all(b <= a + 1e-12 for a, b in zip(fs, fs[1:]))


def test_jitter_independent_mode_is_seeded():
    a = jitter_sweep("rotate-u", [0.02, 0.02], PARAMS["rotate-u"], mode="independent", seed=5)
    b = jitter_sweep("rotate-u", [0.02, 0.02], PARAMS["rotate-u"], mode="independent", seed=5)
    assert [p.fidelity for p in a] == [p.fidelity for p in b]
    # the two points own different derived seeds
    assert a[0].fidelity != a[1].fidelity
    with pytest.raises(ValueError):
        jitter_sweep("cnot", [0.0], mode="bogus")


# --- Monte Carlo ---------------------------------------------------------------------------

def test_sample_prepare_frequency():
    stats = monte_carlo_run("prepare", 100_000, 0, vec=[0.6, 0.8])
    assert sum(stats.counts.values()) == 100_000
    assert abs(stats.frequencies["e"] - 0.5) <= 0.005


def test_sample_cnot_single_outcome():
    stats = monte_carlo_run("cnot", 1234, 9)
    assert stats.counts == {"deterministic": 1234}


def test_sample_is_reproducible():
    a = monte_carlo_run("rotate-u", 5000, 42, PARAMS["rotate-u"])
    b = monte_carlo_run("rotate-u", 5000, 42, PARAMS["rotate-u"])
    assert a.counts == b.counts and a.seed == 42
    assert a.rng.startswith("numpy")


@pytest.mark.parametrize("name", sorted(PARAMS))
def test_sampling_converges(name):
    # at most one 3-sigma excursion per outcome label across the 20 seeds
    shots = 100_000
    excursions = {}
    for seed in range(20):
        stats = monte_carlo_run(name, shots, seed, PARAMS[name])
        for label, p in stats.probabilities.items():
            sigma = math.sqrt(p * (1 - p) / shots)
            if abs(stats.frequencies[label] - p) > 3 * sigma + 1e-15:
                excursions[label] = excursions.get(label, 0) + 1
    assert max(excursions.values(), default=0) <= 1


def test_sample_retry_attempts():
    stats = monte_carlo_run("prepare", 20_000, 1, max_attempts=3)
    assert sum(stats.attempts.values()) == 20_000
    # a shot fails all three attempts with probability 1/8
    failed = stats.counts["g"] / 20_000
    assert abs(failed - 0.125) < 4 * math.sqrt(0.125 * 0.875 / 20_000)


def test_sample_validation():
    with pytest.raises(ValueError):
        monte_carlo_run("prepare", 0, 0)
    with pytest.raises(ValueError):
        monte_carlo_run("prepare", 10, 0, max_attempts=0)
