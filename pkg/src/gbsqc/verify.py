"""Self-check suite behind ``gbsqc verify``.

Each check recomputes a known identity of the model (orthogonality of the
binomial partners, gate matrices, branch probabilities, ...) and reports
pass/fail with the measured deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gbsqc.analysis import (
    CNOT,
    HADAMARD,
    extract_logical_gate,
    gate_fidelity,
    jitter_sweep,
    monte_carlo_run,
)
from gbsqc.atom_cavity import AtomState, compose, pi_di
from gbsqc.fock import (
    NgbsParams,
    coherent_state,
    inner_product,
    make_ngbs,
    orthogonal_partner,
    state_fidelity,
)
from gbsqc.protocols import (
    LogicalQubit,
    hadamard_gate,
    hadamard_stages,
    prepare_qubit,
    rotate_u,
    rotate_z,
    u_axis_matrix,
    z_axis_matrix,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_qubits(rng, n, phi=0.0):
    out = []
    for _ in range(n):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        out.append(LogicalQubit(v[0], v[1], phi))
    return out


def check_orthogonality():
    worst = 0.0
    for big_n in range(1, 11):
        for p in np.linspace(0, 1, 11):
            for phi in np.arange(9) * math.pi / 4:
                x = NgbsParams(big_n, float(p), float(phi))
                ov = inner_product(make_ngbs(x, big_n), make_ngbs(orthogonal_partner(x), big_n))
                worst = max(worst, abs(ov))
    return CheckResult("orthogonality", worst < 1e-12, f"max overlap {worst:.2e}")


def check_limits():
    ok = True
    for big_n in range(1, 11):
        for phi in (0.0, 0.7, 2.0):
            vac = make_ngbs(NgbsParams(big_n, 0.0, phi), big_n).amplitudes
            num = make_ngbs(NgbsParams(big_n, 1.0, phi), big_n).amplitudes
            ok &= vac[0] == 1 and not vac[1:].any()
            ok &= num[big_n] == np.exp(1j * big_n * phi) and not num[:big_n].any()
    f = state_fidelity(coherent_state(1.0, 40), make_ngbs(NgbsParams(40, 1 / 40, 0.0), 40))
    return CheckResult("limits", bool(ok) and f >= 0.99, f"coherent fidelity at N=40: {f:.6f}")


def check_pi_di():
    worst = 0.0
    for phi in np.arange(8) * math.pi / 4:
        s = compose(AtomState.excited(), [make_ngbs(NgbsParams(2, 0.5, phi), 2)])
        want = compose(AtomState.excited(), [make_ngbs(NgbsParams(2, 0.5, phi + math.pi), 2)])
        worst = max(worst, 1 - state_fidelity(pi_di(s, 0), want))
        worst = max(worst, float(np.max(np.abs(pi_di(pi_di(s, 0), 0).amplitudes - s.amplitudes))))
    return CheckResult("pi-di", worst < 1e-12, f"max deviation {worst:.2e}")


def check_cnot():
    f = gate_fidelity(extract_logical_gate("cnot").entries, CNOT)
    return CheckResult("cnot", abs(1 - f) < 1e-9, f"gate fidelity {f:.15f}")


def check_rotations():
    rng = np.random.default_rng(7)
    worst_f = worst_p = 0.0
    for theta in np.arange(8) * 2 * math.pi / 7:
        for varphi in np.arange(8) * math.pi / 4:
            for q in _random_qubits(rng, 3):
                tu = rotate_u(q, theta, varphi)
                tz = rotate_z(q, theta)
                for tree, m in ((tu, u_axis_matrix(theta, varphi)), (tz, z_axis_matrix(theta))):
                    want = LogicalQubit.from_vector(m @ q.vector, q.phi).to_cavity_state()
                    for lf in tree.success_leaves:
                        worst_f = max(worst_f, 1 - state_fidelity(lf.cavity, want))
                    worst_p = max(worst_p, abs(tree.success_probability - 0.5))
    ok = worst_f < 1e-9 and worst_p < 1e-12
    return CheckResult("rotations", ok, f"infidelity {worst_f:.2e}, |P-1/2| {worst_p:.2e}")


def check_preparation():
    rng = np.random.default_rng(11)
    worst = 0.0
    for q in _random_qubits(rng, 50):
        tree = prepare_qubit(q.a, q.b, q.phi)
        e, g = tree.leaf("e"), tree.leaf("g")
        alt = LogicalQubit(q.a, -q.b, q.phi).to_cavity_state()
        worst = max(
            worst,
            1 - state_fidelity(e.cavity, q.to_cavity_state()),
            1 - state_fidelity(g.cavity, alt),
            abs(e.probability - 0.5),
            abs(g.probability - 0.5),
        )
    return CheckResult("preparation", worst < 1e-12, f"max deviation {worst:.2e}")


def check_hadamard():
    m = np.eye(2, dtype=complex)
    for spec in hadamard_stages():
        m = spec.matrix() @ m
    dev = float(np.max(np.abs(m - 1j * HADAMARD)))
    tree = hadamard_gate(LogicalQubit(1.0, 0.0))
    f = gate_fidelity(extract_logical_gate("hadamard").entries, HADAMARD)
    ok = dev < 1e-12 and abs(1 - f) < 1e-9 and abs(tree.success_probability - 1 / 8) < 1e-12
    return CheckResult(
        "hadamard", ok,
        f"product deviation {dev:.2e}, gate fidelity {f:.15f}, P {tree.success_probability!r}",
    )


def check_qpg():
    m = extract_logical_gate("qpg").entries
    dev = float(np.max(np.abs(m - np.diag([1, -1]))))
    return CheckResult("qpg", dev < 1e-9, f"max deviation from diag(1,-1) {dev:.2e}")


def check_jitter():
    p0, p1 = jitter_sweep("cnot", [0.0, 0.01])
    ok = abs(1 - p0.fidelity) < 1e-12 and p1.fidelity >= 0.99
    return CheckResult("jitter", ok, f"cnot worst fidelity at eps=0.01: {p1.fidelity:.9f}")


def check_sampling():
    sigma = math.sqrt(0.25 / 100_000)
    inside = 0
    for seed in range(20):
        stats = monte_carlo_run("prepare", 100_000, seed, vec=[0.6, 0.8])
        inside += abs(stats.frequencies["e"] - 0.5) <= 0.005
    again = monte_carlo_run("prepare", 100_000, 3, vec=[0.6, 0.8]).counts
    same = again == monte_carlo_run("prepare", 100_000, 3, vec=[0.6, 0.8]).counts
    return CheckResult(
        "sampling", inside >= 19 and same, f"{inside}/20 seeds within 0.5 +/- 0.005 (3 sigma = {3 * sigma:.4f})"
    )


CHECKS = (
    check_orthogonality,
    check_limits,
    check_pi_di,
    check_cnot,
    check_rotations,
    check_preparation,
    check_hadamard,
    check_qpg,
    check_jitter,
    check_sampling,
)


def run_checks() -> list:
    """Run every check; leakage surfaces as a failed check rather than an exception."""
    results = []
    for fn in CHECKS:
        name = fn.__name__.removeprefix("check_")
        try:
            results.append(fn())
        except Exception as exc:  # noqa: BLE001 - report, don't abort the suite
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
