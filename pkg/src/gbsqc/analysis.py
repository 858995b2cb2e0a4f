"""Gate extraction, fidelities, seeded sampling and timing-jitter sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from gbsqc.atom_cavity import LEAK_TOL, CompositeState, logical_basis
from gbsqc.fock import state_fidelity
from gbsqc.protocols import PROTOCOLS, BranchTree, Leaf, LogicalQubit, run_protocol

RNG_NAME = "numpy.random.Generator(PCG64)"

UNITARY_TOL = 1e-9
LINEARITY_TOL = 1e-9

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class NonLinearityError(RuntimeError):
    """Protocol outputs are not related by a single linear map."""


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """Logical-basis matrix; for two qubits the control slot comes first."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"gate matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def basis(self) -> list:
        return ["0", "1"] if self.dim == 2 else ["00", "01", "10", "11"][: self.dim]

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.entries
        return bool(np.allclose(m.conj().T @ m, np.eye(self.dim), atol=tol, rtol=0))


@dataclass(frozen=True)
class JitterPoint:
    epsilon: float
    fidelity: float
    protocol: str


@dataclass
class SampleStats:
    shots: int
    seed: int
    counts: dict
    probabilities: dict
    rng: str = RNG_NAME
    attempts: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> dict:
        return {k: v / self.shots for k, v in self.counts.items()}


def _as_matrix(m) -> np.ndarray:
    return m.entries if isinstance(m, GateMatrix) else np.asarray(m, dtype=complex)


def fix_global_phase(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Rotate ``m`` so its first-column leading nonzero entry is real positive."""
    col = m[:, 0]
    k = int(np.flatnonzero(np.abs(col) > tol)[0])
    return m * np.exp(-1j * np.angle(col[k]))


def leaf_logical_vector(leaf: Leaf, leak_tolerance: float = LEAK_TOL) -> np.ndarray:
    """Output of a leaf as a logical-basis vector (length 2, or 4 for cnot)."""
    if leaf.state is None:
        raise ValueError(f"leaf {leaf.label!r} has zero probability and no state")
    if leaf.output_cavity is not None:
        return LogicalQubit.from_cavity_state(leaf.cavity, leaf.phi, leak_tolerance).vector
    return joint_logical_vector(leaf.state, leaf.phi, leak_tolerance)


def joint_logical_vector(
    state: CompositeState, phi: float, leak_tolerance: float = LEAK_TOL
) -> np.ndarray:
    """Atom x cavity state projected on |g/e> (x) |phi/phi+pi>."""
    if len(state.factor_dims) != 2:
        raise ValueError("expected an atom and a single cavity")
    zero, one = logical_basis(phi, state.factor_dims[1])
    t = state.tensor()
    vec = np.array([t[a] @ v.conj() for a in (0, 1) for v in (zero, one)])
    leak = 1.0 - float(np.vdot(vec, vec).real)
    if leak > leak_tolerance:
        raise ValueError(f"joint state leaks out of the logical subspace ({leak:.3e})")
    return vec


def _select_leaf(tree: BranchTree, path: Optional[str]) -> Leaf:
    return tree.leaf(path) if path is not None else tree.primary_leaf()


def extract_logical_gate(
    protocol: str,
    params: Optional[dict] = None,
    *,
    phi: float = 0.0,
    path: Optional[str] = None,
) -> GateMatrix:
    """Logical matrix realized along one branch of a protocol.

    The protocol is run on every logical basis state and on the uniform
    superposition; the latter fixes the relative column phases. ``path``
    selects the leaf (default: the correction-free success leaf).

    Raises
    ------
    NonLinearityError
        If the superposition output is not the matching combination of the
        basis outputs within 1e-9.
    """
    params = params or {}
    n_qubits = PROTOCOLS[protocol][0]
    d = 2**n_qubits
    cols = []
    for k in range(d):
        e_k = np.zeros(d, dtype=complex)
        e_k[k] = 1.0
        tree = run_protocol(protocol, e_k, phi, **params)
        cols.append(leaf_logical_vector(_select_leaf(tree, path)))
    basis_out = np.column_stack(cols)
    sup = np.full(d, 1 / math.sqrt(d), dtype=complex)
    v_sup = leaf_logical_vector(_select_leaf(run_protocol(protocol, sup, phi, **params), path))
    coeff, *_ = np.linalg.lstsq(basis_out, v_sup, rcond=None)
    residual = float(np.linalg.norm(basis_out @ coeff - v_sup))
    scale = np.abs(coeff) * math.sqrt(d)
    if residual > LINEARITY_TOL or np.max(np.abs(scale - 1.0)) > LINEARITY_TOL:
        raise NonLinearityError(
            f"{protocol}: superposition check failed (residual {residual:.3e})"
        )
    m = basis_out * (coeff / np.abs(coeff))
    return GateMatrix(fix_global_phase(m))


def gate_fidelity(u, v) -> float:
    """|Tr(U^dagger V)| / d, insensitive to a global phase."""
    mu, mv = _as_matrix(u), _as_matrix(v)
    if mu.shape != mv.shape:
        raise ValueError(f"dimension mismatch: {mu.shape} vs {mv.shape}")
    for m in (mu, mv):
        if not GateMatrix(m).is_unitary():
            raise ValueError("gate_fidelity needs unitary inputs")
    f = abs(np.trace(mu.conj().T @ mv)) / mu.shape[0]
    return float(min(f, 1.0))


def probe_inputs(dim: int) -> list:
    """Logical basis states plus two fixed superpositions."""
    inputs = [np.eye(dim, dtype=complex)[k] for k in range(dim)]
    inputs.append(np.full(dim, 1 / math.sqrt(dim), dtype=complex))
    inputs.append(np.array([1j**k for k in range(dim)], dtype=complex) / math.sqrt(dim))
    return inputs


def _output_state(leaf: Leaf):
    return leaf.state if leaf.output_cavity is None else leaf.cavity


def conditional_fidelity(ideal: BranchTree, noisy: BranchTree) -> float:
    """Fidelity of the noisy post-selected output with the ideal one.

    Averages |<ideal_i|noisy_i>|^2 over the success leaves, weighted by the
    noisy branch probabilities (fidelity of the conditional mixed state).
    """
    num = den = 0.0
    for ref in ideal.success_leaves:
        try:
            lf = noisy.leaf(ref.label)
        except KeyError:
            continue
        if lf.state is None or ref.state is None:
            continue
        num += lf.probability * state_fidelity(_output_state(ref), _output_state(lf))
        den += lf.probability
    return num / den if den > 0 else 0.0


def jitter_sweep(
    protocol: str,
    epsilons: Sequence[float],
    params: Optional[dict] = None,
    *,
    phi: float = 0.0,
    mode: str = "systematic",
    seed: int = 0,
) -> list:
    """Worst-case output fidelity when every dispersive phase is ``pi (1 + eps)``.

    ``mode="systematic"`` uses the same error on every crossing (one atomic
    velocity per run). ``mode="independent"`` draws a Gaussian relative
    error of standard deviation ``|eps|`` per crossing, from a generator
    seeded with ``seed + i`` for the i-th sweep point.
    """
    if mode not in ("systematic", "independent"):
        raise ValueError(f"unknown jitter mode {mode!r}")
    params = dict(params or {})
    dim = 2 ** PROTOCOLS[protocol][0]
    inputs = probe_inputs(dim)
    ideal = [run_protocol(protocol, v, phi, **params) for v in inputs]
    points = []
    for i, eps in enumerate(epsilons):
        if mode == "systematic":
            chi = math.pi * (1.0 + eps)
        else:
            rng = np.random.default_rng(seed + i)
            chi = lambda rng=rng, eps=eps: math.pi * (1.0 + abs(eps) * rng.standard_normal())
        worst = 1.0
        for v, ref in zip(inputs, ideal):
            noisy = run_protocol(protocol, v, phi, chi=chi, leak_tolerance=None, **params)
            worst = min(worst, conditional_fidelity(ref, noisy))
        points.append(JitterPoint(float(eps), float(worst), protocol))
    return points


def monte_carlo_run(
    protocol: str,
    shots: int,
    seed: int,
    params: Optional[dict] = None,
    *,
    vec=None,
    phi: float = 0.0,
    max_attempts: int = 1,
) -> SampleStats:
    """Sample leaf outcomes from the exact branch distribution.

    With ``max_attempts > 1`` a shot is repeated until it lands on a success
    leaf, which presumes a fresh copy of the input for every attempt.
    ``counts`` then records the final outcome of each shot and ``attempts``
    the histogram of attempts used.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    n_qubits = PROTOCOLS[protocol][0]
    if vec is None:
        vec = np.eye(2**n_qubits, dtype=complex)[0]
    tree = run_protocol(protocol, vec, phi, **(params or {}))
    labels = [lf.label for lf in tree.leaves]
    probs = np.clip([lf.probability for lf in tree.leaves], 0.0, None)
    probs = probs / probs.sum()
    success = np.array([lf.is_success for lf in tree.leaves])

    rng = np.random.default_rng(seed)
    final = np.empty(shots, dtype=int)
    used = np.zeros(shots, dtype=int)
    pending = np.arange(shots)
    for _ in range(max_attempts):
        draw = rng.choice(len(labels), size=pending.size, p=probs)
        final[pending] = draw
        used[pending] += 1
        pending = pending[~success[draw]]
        if pending.size == 0:
            break
    counts = np.bincount(final, minlength=len(labels))
    attempts = {}
    if max_attempts > 1:
        hist = np.bincount(used, minlength=max_attempts + 1)
        attempts = {int(k): int(hist[k]) for k in range(1, max_attempts + 1)}
    return SampleStats(
        shots=shots,
        seed=seed,
        counts={lab: int(c) for lab, c in zip(labels, counts)},
        probabilities={lab: float(p) for lab, p in zip(labels, probs)},
        attempts=attempts,
    )
