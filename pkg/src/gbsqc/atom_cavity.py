"""Two-level atom, Ramsey zones, dispersive coupling and projective measurement.

Joint atom-cavity states are dense vectors with the atom as the slowest
index, followed by each cavity in order. Everything here works in the
interaction picture: a dispersive crossing only imprints the phase
``exp(-i n chi)`` on the excited-atom component, with
``chi = Omega**2 t / delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from gbsqc.fock import NORM_TOL, CavityState, NgbsParams, make_ngbs

#: Looser normalization tolerance for joint states produced by pipelines.
COMPOSITE_NORM_TOL = 1e-9

#: Default bound on population outside the logical subspace.
LEAK_TOL = 1e-9

# Branches at or below this probability carry no post-measurement state.
_NULL_BRANCH_PROB = 1e-14

ATOM_LABELS = ("g", "e")
LOGICAL_LABELS = ("logical_0", "logical_1", "leak")


class LeakageError(RuntimeError):
    """Population found outside span{|phi>, |phi + pi>} of a measured cavity."""

    def __init__(self, probability: float, cavity_index: int):
        self.probability = probability
        self.cavity_index = cavity_index
        super().__init__(
            f"cavity {cavity_index}: leak probability {probability:.3e} exceeds tolerance"
        )


@dataclass(frozen=True)
class AtomState:
    """Effective two-level atom ``amp_g |g> + amp_e |e>``."""

    amp_g: complex
    amp_e: complex

    def __post_init__(self):
        object.__setattr__(self, "amp_g", complex(self.amp_g))
        object.__setattr__(self, "amp_e", complex(self.amp_e))
        norm = abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"atom state is not normalized (norm^2 = {norm!r})")

    @classmethod
    def ground(cls) -> "AtomState":
        return cls(1.0, 0.0)

    @classmethod
    def excited(cls) -> "AtomState":
        return cls(0.0, 1.0)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.amp_g, self.amp_e], dtype=complex)


@dataclass(frozen=True)
class RamseyParams:
    """Ramsey pulse area ``theta`` and classical-field phase ``varphi`` (radians)."""

    theta: float
    varphi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.varphi)):
            raise ValueError("Ramsey angles must be finite")


@dataclass(frozen=True)
class DispersiveParams:
    """Accumulated dispersive phase ``chi``; ``chi = pi`` is the pi-DI."""

    chi: float = math.pi

    def __post_init__(self):
        if not math.isfinite(self.chi):
            raise ValueError("chi must be finite")


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Atom (first factor, dimension 2) times one or more cavity modes.

    Attributes
    ----------
    factor_dims : tuple of int
        ``(2, d_1, d_2, ...)``.
    amplitudes : ndarray of complex
        Flattened in C order, so the atom index varies slowest. Read-only.
    """

    factor_dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        arr = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if len(dims) < 2 or dims[0] != 2:
            raise ValueError(f"factor_dims must be (2, d_1, ...), got {dims}")
        if math.prod(dims) != arr.size:
            raise ValueError(
                f"{arr.size} amplitudes do not match factor_dims {dims}"
            )
        norm = float(np.vdot(arr, arr).real)
        if abs(norm - 1.0) > COMPOSITE_NORM_TOL:
            raise ValueError(f"composite state is not normalized (norm^2 = {norm!r})")
        arr.setflags(write=False)
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "amplitudes", arr)

    @property
    def n_cavities(self) -> int:
        return len(self.factor_dims) - 1

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to ``factor_dims`` (a copy)."""
        return self.amplitudes.reshape(self.factor_dims).copy()

    def amplitude(self, atom: int, *photons: int) -> complex:
        return complex(self.amplitudes.reshape(self.factor_dims)[(atom, *photons)])

    def __repr__(self):
        return f"CompositeState(factor_dims={self.factor_dims})"


@dataclass(frozen=True)
class MeasurementBranch:
    """One Born-rule outcome; ``post_state`` is None for null branches."""

    outcome_label: str
    probability: float
    post_state: Optional[CompositeState]


def compose(atom: AtomState, cavities: Sequence[CavityState]) -> CompositeState:
    """Tensor product ``atom (x) cavities[0] (x) cavities[1] ...``."""
    if not cavities:
        raise ValueError("at least one cavity is required")
    vec = atom.amplitudes
    for cav in cavities:
        vec = np.kron(vec, cav.amplitudes)
    return CompositeState((2, *(c.dim for c in cavities)), vec)


def ramsey_matrix(theta: float, varphi: float) -> np.ndarray:
    """Matrix of R_{theta,varphi} in the (g, e) basis; columns are images."""
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * varphi) * s], [np.exp(-1j * varphi) * s, c]], dtype=complex
    )


def apply_atom_unitary(
    state: Union[AtomState, CompositeState], unitary: np.ndarray
) -> Union[AtomState, CompositeState]:
    if isinstance(state, AtomState):
        g, e = unitary @ state.amplitudes
        return AtomState(g, e)
    mat = state.amplitudes.reshape(2, -1)
    return CompositeState(state.factor_dims, unitary @ mat)


def ramsey_apply(
    state: Union[AtomState, CompositeState], params: RamseyParams
) -> Union[AtomState, CompositeState]:
    """Pass the atom through a Ramsey zone; cavity factors are untouched."""
    return apply_atom_unitary(state, ramsey_matrix(params.theta, params.varphi))


def _cavity_axis(state: CompositeState, cavity_index: int) -> int:
    if not 0 <= cavity_index < state.n_cavities:
        raise IndexError(
            f"cavity_index {cavity_index} out of range for {state.n_cavities} cavities"
        )
    return cavity_index + 1


def dispersive_evolve(
    state: CompositeState, cavity_index: int, params: DispersiveParams
) -> CompositeState:
    """Dispersive crossing of cavity ``cavity_index`` (0-based).

    ``|g>|n>`` is left alone and ``|e>|n>`` picks up ``exp(-i n chi)``.
    """
    axis = _cavity_axis(state, cavity_index)
    dims = state.factor_dims
    n = np.arange(dims[axis])
    shape = [1] * len(dims)
    shape[axis] = dims[axis]
    phases = np.exp(-1j * n * params.chi).reshape(shape)
    t = state.tensor()
    t[1] = t[1] * phases[0]
    return CompositeState(dims, t)


def pi_di(state: CompositeState, cavity_index: int) -> CompositeState:
    return dispersive_evolve(state, cavity_index, DispersiveParams(math.pi))


def _collapse(label: str, projected: np.ndarray, dims) -> MeasurementBranch:
    prob = float(np.vdot(projected, projected).real)
    if prob <= _NULL_BRANCH_PROB:
        return MeasurementBranch(label, prob, None)
    return MeasurementBranch(label, prob, CompositeState(dims, projected / math.sqrt(prob)))


def measure_atom(state: CompositeState) -> list[MeasurementBranch]:
    """Projective measurement of the atom in {g, e}; branches in that order."""
    t = state.tensor()
    branches = []
    for level, label in enumerate(ATOM_LABELS):
        proj = np.zeros_like(t)
        proj[level] = t[level]
        branches.append(_collapse(label, proj.reshape(-1), state.factor_dims))
    return branches


def logical_basis(phi: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectors |phi> = |2,1/2,phi> and |phi+pi> padded to ``dim`` levels."""
    zero = make_ngbs(NgbsParams(2, 0.5, phi), dim - 1).amplitudes
    one = make_ngbs(NgbsParams(2, 0.5, phi + math.pi), dim - 1).amplitudes
    return zero, one


def measure_cavity_logical(
    state: CompositeState,
    cavity_index: int,
    phi: float,
    leak_tolerance: Optional[float] = LEAK_TOL,
) -> list[MeasurementBranch]:
    """Measure one cavity in the two-photon binomial logical basis.

    Returns branches ``logical_0``, ``logical_1`` and ``leak`` (the
    complement of the logical subspace), in that order.

    Raises
    ------
    LeakageError
        If the leak probability exceeds ``leak_tolerance``. Pass ``None``
        to keep the leak branch instead, e.g. for timing-error studies.
    """
    axis = _cavity_axis(state, cavity_index)
    dim = state.factor_dims[axis]
    if dim < 3:
        raise ValueError("logical measurement needs a cavity dimension of at least 3")
    v0, v1 = logical_basis(phi, dim)
    t = np.moveaxis(state.tensor(), axis, -1)
    parts = []
    for v in (v0, v1):
        coeff = t @ v.conj()
        parts.append(coeff[..., None] * v)
    parts.append(t - parts[0] - parts[1])
    branches = [
        _collapse(label, np.moveaxis(p, -1, axis).reshape(-1), state.factor_dims)
        for label, p in zip(LOGICAL_LABELS, parts)
    ]
    if leak_tolerance is not None and branches[2].probability > leak_tolerance:
        raise LeakageError(branches[2].probability, cavity_index)
    return branches


def factor_state(state: CompositeState, factor: int, tol: float = 1e-9) -> np.ndarray:
    """Normalized vector of one factor of a product state.

    ``factor`` indexes ``factor_dims`` (0 is the atom). The global phase is
    fixed by the slice of largest weight.

    Raises
    ------
    ValueError
        If the factor is entangled with the rest beyond ``tol``.
    """
    mat = np.moveaxis(state.tensor(), factor, 0).reshape(state.factor_dims[factor], -1)
    col = int(np.argmax(np.sum(np.abs(mat) ** 2, axis=0)))
    vec = mat[:, col] / np.linalg.norm(mat[:, col])
    rest = vec.conj() @ mat
    residual = float(np.linalg.norm(mat - np.outer(vec, rest)) ** 2)
    if residual > tol:
        raise ValueError(f"factor {factor} is entangled (residual {residual:.3e})")
    return vec


def cavity_factor(state: CompositeState, cavity_index: int) -> CavityState:
    return CavityState(factor_state(state, _cavity_axis(state, cavity_index)))
