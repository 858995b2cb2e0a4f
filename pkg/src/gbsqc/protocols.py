"""Measurement-branching gate protocols on binomial-state cavity qubits.

The logical qubit lives in one cavity as ``a|phi> + b|phi+pi>`` where
``|phi> = |2,1/2,phi>`` and ``|phi+pi> = |2,1/2,phi+pi>``. Every protocol
is executed by exact branch enumeration: each measurement fans the current
paths out into all of its outcomes, and the result is a :class:`BranchTree`
whose leaves carry the Born probability and the collapsed joint state.

Leaf classifications:

``success``
    target output produced without any conditional correction
``corrected``
    target output produced after a feed-forward correction
``alternate``
    a known, non-target output (e.g. ``a|phi> - b|phi+pi>``)
``failure``
    a path to be discarded
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from gbsqc.atom_cavity import (
    LEAK_TOL,
    AtomState,
    CompositeState,
    DispersiveParams,
    RamseyParams,
    cavity_factor,
    compose,
    dispersive_evolve,
    logical_basis,
    measure_atom,
    measure_cavity_logical,
    ramsey_apply,
)
from gbsqc.fock import NORM_TOL, CavityState, NgbsParams, make_ngbs

#: Axis phase of the middle u-rotation in the Hadamard decomposition.
HADAMARD_AXIS_PHASE = -math.pi / 2

SUCCESS_CLASSES = ("success", "corrected")

ChiSource = Union[float, Callable[[], float]]


@dataclass(frozen=True)
class LogicalQubit:
    """``a|phi> + b|phi+pi>`` on the two-photon binomial basis with phase ``phi``."""

    a: complex
    b: complex
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"logical qubit is not normalized (|a|^2+|b|^2 = {norm!r})")

    @classmethod
    def from_vector(cls, vec, phi: float = 0.0) -> "LogicalQubit":
        return cls(vec[0], vec[1], phi)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=complex)

    def to_cavity_state(self, n_max: int = 2) -> CavityState:
        zero, one = logical_basis(self.phi, n_max + 1)
        return CavityState(self.a * zero + self.b * one)

    @classmethod
    def from_cavity_state(
        cls, state: CavityState, phi: float, leak_tolerance: float = LEAK_TOL
    ) -> "LogicalQubit":
        """Project a cavity state onto the logical basis.

        Raises
        ------
        ValueError
            If more than ``leak_tolerance`` of the population lies outside
            the logical subspace.
        """
        zero, one = logical_basis(phi, state.dim)
        a = np.vdot(zero, state.amplitudes)
        b = np.vdot(one, state.amplitudes)
        leak = 1.0 - (abs(a) ** 2 + abs(b) ** 2)
        if leak > leak_tolerance:
            raise ValueError(f"cavity state leaks out of the logical subspace ({leak:.3e})")
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        return cls(a / norm, b / norm, phi)


@dataclass(frozen=True)
class RotationSpec:
    """A single-qubit rotation: ``u_axis`` uses ``varphi``, ``z_axis`` ignores it."""

    axis: str
    theta: float
    varphi: float = 0.0

    def __post_init__(self):
        if self.axis not in ("u_axis", "z_axis"):
            raise ValueError(f"axis must be 'u_axis' or 'z_axis', got {self.axis!r}")
        if not (math.isfinite(self.theta) and math.isfinite(self.varphi)):
            raise ValueError("rotation angles must be finite")

    def matrix(self) -> np.ndarray:
        if self.axis == "u_axis":
            return u_axis_matrix(self.theta, self.varphi)
        return z_axis_matrix(self.theta)


def u_axis_matrix(theta: float, varphi: float) -> np.ndarray:
    """Rotation by ``theta`` about ``u = (-sin varphi, cos varphi, 0)``."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * varphi) * s], [np.exp(-1j * varphi) * s, c]], dtype=complex
    )


def z_axis_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(1j * theta / 2), np.exp(-1j * theta / 2)])


@dataclass(frozen=True)
class Leaf:
    """Terminal path of a protocol run.

    ``output_cavity`` names the cavity (0-based) that holds the protocol's
    output; ``None`` means the whole joint state is the output (CNOT).
    """

    path: tuple
    probability: float
    classification: str
    state: Optional[CompositeState]
    phi: float
    output_cavity: Optional[int] = None

    @property
    def label(self) -> str:
        return "/".join(self.path)

    @property
    def is_success(self) -> bool:
        return self.classification in SUCCESS_CLASSES

    @property
    def cavity(self) -> Optional[CavityState]:
        if self.state is None or self.output_cavity is None:
            return None
        return output_cavity_state(self.state, self.output_cavity, self.phi)

    @property
    def qubit(self) -> Optional[LogicalQubit]:
        cav = self.cavity
        return None if cav is None else LogicalQubit.from_cavity_state(cav, self.phi)


@dataclass
class BranchTree:
    protocol: str
    phi: float
    steps: list = field(default_factory=list)
    leaves: list = field(default_factory=list)

    @property
    def total_probability(self) -> float:
        return math.fsum(leaf.probability for leaf in self.leaves)

    @property
    def success_probability(self) -> float:
        return math.fsum(leaf.probability for leaf in self.leaves if leaf.is_success)

    @property
    def success_leaves(self) -> list:
        return [leaf for leaf in self.leaves if leaf.is_success]

    def leaf(self, label: str) -> Leaf:
        for lf in self.leaves:
            if lf.label == label:
                return lf
        raise KeyError(label)

    def primary_leaf(self) -> Leaf:
        """First leaf classified ``success`` (the correction-free target path)."""
        for lf in self.leaves:
            if lf.classification == "success":
                return lf
        raise LookupError(f"{self.protocol}: no success leaf")


def output_cavity_state(state: CompositeState, cavity_index: int, phi: float) -> CavityState:
    """Output cavity of a collapsed joint state, with a basis-covariant phase.

    The other factors are contracted against the basis vectors they were
    measured in (atom level, logical |phi> or |phi+pi>), so the returned
    amplitudes are ``<atom|<C_other|Psi>`` normalized. Factors not sitting
    on such a basis vector (e.g. after a leak outcome) fall back to
    :func:`cavity_factor`.
    """
    t = state.tensor()
    axis = cavity_index + 1
    for k in reversed(range(len(state.factor_dims))):
        if k == axis:
            continue
        if k == 0:
            refs = list(np.eye(2, dtype=complex))
        else:
            refs = list(logical_basis(phi, state.factor_dims[k]))
        weights = [np.linalg.norm(np.tensordot(t, r.conj(), axes=([k], [0]))) for r in refs]
        best = int(np.argmax(weights))
        if abs(weights[best] - np.linalg.norm(t)) > 1e-9:
            return cavity_factor(state, cavity_index)
        t = np.tensordot(t, refs[best].conj(), axes=([k], [0]))
    return CavityState(t / np.linalg.norm(t))


def _chi_source(chi: ChiSource) -> Callable[[], float]:
    if callable(chi):
        return chi
    value = float(chi)
    return lambda: value


class _Paths:
    """Live measurement paths of one enumerated run."""

    def __init__(self, state: CompositeState, chi: ChiSource, steps: list):
        self.items = [((), 1.0, state)]
        self.halted = []
        self.steps = steps
        self._chi = _chi_source(chi)

    def apply(self, desc, fn, when=None):
        self.steps.append(desc)
        self.items = [
            (path, p, fn(s) if s is not None and (when is None or when(path)) else s)
            for path, p, s in self.items
        ]

    def ramsey(self, theta, varphi, when=None, note=""):
        params = RamseyParams(theta, varphi)
        self.apply(
            f"ramsey theta={theta!r} varphi={varphi!r}{note}",
            lambda s: ramsey_apply(s, params),
            when,
        )

    def dispersive(self, cavity_index):
        params = DispersiveParams(self._chi())
        self.apply(
            f"dispersive C{cavity_index + 1} chi={params.chi!r}",
            lambda s: dispersive_evolve(s, cavity_index, params),
        )

    def measure(self, desc, fn):
        self.steps.append(desc)
        out = []
        for path, p, s in self.items:
            if s is None:
                out.append((path, p, s))
                continue
            for br in fn(s):
                out.append((path + (br.outcome_label,), p * br.probability, br.post_state))
        self.items = out

    def halt(self, pred):
        """Stop the paths matching ``pred``; they become leaves as they are."""
        self.halted += [item for item in self.items if pred(item[0])]
        self.items = [item for item in self.items if not pred(item[0])]


def _check_qubit(qubit):
    if not isinstance(qubit, (LogicalQubit, CavityState)):
        raise TypeError(f"expected LogicalQubit or CavityState, got {type(qubit).__name__}")


def _first_ramsey_angles(a: complex, b: complex) -> tuple[float, float]:
    """Ramsey angles taking |g> to a|g> + b|e> up to a global phase."""
    theta = 2.0 * math.atan2(abs(b), abs(a))
    if abs(b) == 0.0:
        return theta, 0.0
    # a is made real-positive by a global phase; a = 0 keeps arg(b)
    rel = b * np.exp(-1j * np.angle(a)) if abs(a) > 0 else b
    return theta, -float(np.angle(rel))


def prepare_qubit(
    a: complex,
    b: complex,
    phi: float = 0.0,
    *,
    n_max: int = 2,
    chi: ChiSource = math.pi,
    leak_tolerance: Optional[float] = LEAK_TOL,
    correct_alternate: bool = False,
) -> BranchTree:
    """Conditional preparation of ``a|phi> + b|phi+pi>``.

    Leaf ``e`` holds the target, leaf ``g`` holds ``a|phi> - b|phi+pi>``.
    With ``correct_alternate`` the ``g`` leaf is fed through :func:`qpg_pi`
    and its phase-flipped output is classified ``corrected``.
    """
    target = LogicalQubit(a, b, phi)
    theta0, varphi0 = _first_ramsey_angles(target.a, target.b)
    cavity = make_ngbs(NgbsParams(2, 0.5, phi), n_max)
    tree = BranchTree("prepare", phi)
    run = _Paths(compose(AtomState.ground(), [cavity]), chi, tree.steps)
    run.ramsey(theta0, varphi0, note=" (load coefficients)")
    run.dispersive(0)
    run.ramsey(math.pi / 2, 0.0)
    run.measure("measure atom", measure_atom)
    for path, p, s in run.items:
        cls = "success" if path[-1] == "e" else "alternate"
        leaf = Leaf(path, p, cls, s, phi, output_cavity=0)
        if cls == "alternate" and correct_alternate and s is not None:
            sub = qpg_pi(leaf.cavity, phi=phi, chi=chi, leak_tolerance=leak_tolerance)
            tree.steps.append("on g: quantum phase gate")
            for sl in sub.leaves:
                sub_cls = "corrected" if sl.is_success else "alternate"
                tree.leaves.append(
                    Leaf(path + tuple("qpg." + x for x in sl.path), p * sl.probability,
                         sub_cls, sl.state, phi, sl.output_cavity)
                )
            continue
        tree.leaves.append(leaf)
    return tree


def _cnot_on(state: CompositeState, chi: ChiSource) -> CompositeState:
    return dispersive_evolve(state, 0, DispersiveParams(_chi_source(chi)()))


def cnot_gate(
    control: AtomState,
    target: LogicalQubit,
    *,
    n_max: int = 2,
    chi: ChiSource = math.pi,
) -> CompositeState:
    """Atom-controlled NOT on a cavity qubit: a single dispersive crossing."""
    return _cnot_on(compose(control, [target.to_cavity_state(n_max)]), chi)


def cnot_tree(state: CompositeState, phi: float = 0.0, *, chi: ChiSource = math.pi) -> BranchTree:
    """CNOT on an arbitrary atom x cavity input, recorded as a one-leaf tree."""
    tree = BranchTree("cnot", phi)
    run = _Paths(state, chi, tree.steps)
    run.dispersive(0)
    ((_, p, s),) = run.items
    tree.leaves.append(Leaf(("deterministic",), p, "success", s, phi, output_cavity=None))
    return tree


def _rotation_run(
    name: str,
    cavity_in: CavityState,
    phi: float,
    atom_ops: Sequence[tuple[float, float]],
    *,
    success_on: str,
    chi: ChiSource,
    leak_tolerance: Optional[float],
) -> BranchTree:
    """Copy C1 into the atom, rotate the atom, copy it back into C2, measure.

    ``success_on`` is the final atomic outcome that yields the target.
    """
    n_max = cavity_in.n_max
    ancilla = make_ngbs(NgbsParams(2, 0.5, phi), n_max)
    tree = BranchTree(name, phi)
    run = _Paths(compose(AtomState.ground(), [cavity_in, ancilla]), chi, tree.steps)
    # (i) copy cavity -> atom
    run.ramsey(math.pi / 2, 0.0)
    run.dispersive(0)
    run.measure(
        "measure C1 logical",
        lambda s: measure_cavity_logical(s, 0, phi, leak_tolerance),
    )
    run.halt(lambda path: path[-1] == "leak")
    run.ramsey(
        math.pi, math.pi / 2,
        when=lambda path: path[-1] == "logical_1",
        note=" (on logical_1: sigma_x correction)",
    )
    # (ii) rotate the atomic copy
    for theta, varphi in atom_ops:
        run.ramsey(theta, varphi)
    # (iii) copy atom -> C2, (iv) detect
    run.dispersive(1)
    run.ramsey(math.pi / 2, 0.0)
    run.measure("measure atom", measure_atom)
    for path, p, s in run.items:
        if path[-1] == success_on:
            cls = "success" if path[0] == "logical_0" else "corrected"
        else:
            cls = "failure" if name.startswith("rotate") else "alternate"
        tree.leaves.append(Leaf(path, p, cls, s, phi, output_cavity=1))
    for path, p, s in run.halted:
        tree.leaves.append(Leaf(path, p, "failure", s, phi, output_cavity=1))
    return tree


def _input_cavity(qubit, n_max: int) -> tuple[CavityState, float]:
    _check_qubit(qubit)
    if isinstance(qubit, LogicalQubit):
        return qubit.to_cavity_state(n_max), qubit.phi
    return qubit, None


def rotate_u(
    qubit: Union[LogicalQubit, CavityState],
    theta: float,
    varphi: float,
    *,
    phi: Optional[float] = None,
    n_max: int = 2,
    chi: ChiSource = math.pi,
    leak_tolerance: Optional[float] = LEAK_TOL,
) -> BranchTree:
    """Rotation by ``theta`` about ``u = (-sin varphi, cos varphi, 0)``.

    Success leaves (final atom ``e``) have total probability 1/2 and hold
    ``u_axis_matrix(theta, varphi) @ (a, b)`` in cavity C2.
    """
    cav, qphi = _input_cavity(qubit, n_max)
    phi = qphi if phi is None else phi
    if phi is None:
        raise ValueError("phi is required when passing a raw CavityState")
    spec = RotationSpec("u_axis", theta, varphi)
    return _rotation_run(
        "rotate-u", cav, phi, [(spec.theta, spec.varphi)],
        success_on="e", chi=chi, leak_tolerance=leak_tolerance,
    )


def rotate_z(
    qubit: Union[LogicalQubit, CavityState],
    theta: float,
    *,
    phi: Optional[float] = None,
    n_max: int = 2,
    chi: ChiSource = math.pi,
    leak_tolerance: Optional[float] = LEAK_TOL,
) -> BranchTree:
    """Rotation by ``theta`` about z; the atomic step is R_{pi,0} then R_{pi,theta/2}."""
    cav, qphi = _input_cavity(qubit, n_max)
    phi = qphi if phi is None else phi
    if phi is None:
        raise ValueError("phi is required when passing a raw CavityState")
    spec = RotationSpec("z_axis", theta)
    return _rotation_run(
        "rotate-z", cav, phi, [(math.pi, 0.0), (math.pi, spec.theta / 2)],
        success_on="e", chi=chi, leak_tolerance=leak_tolerance,
    )


def rotate(qubit: LogicalQubit, spec: RotationSpec, **kwargs) -> BranchTree:
    if spec.axis == "u_axis":
        return rotate_u(qubit, spec.theta, spec.varphi, **kwargs)
    return rotate_z(qubit, spec.theta, **kwargs)


def qpg_pi(
    qubit: Union[LogicalQubit, CavityState],
    *,
    phi: Optional[float] = None,
    n_max: int = 2,
    chi: ChiSource = math.pi,
    leak_tolerance: Optional[float] = LEAK_TOL,
) -> BranchTree:
    """Pi phase gate: copy out and back with no rotation; success on atom ``g``.

    The ``g`` leaves hold ``a|phi> - b|phi+pi>``; the ``e`` leaves hold the
    unchanged input and are classified ``alternate``.
    """
    cav, qphi = _input_cavity(qubit, n_max)
    phi = qphi if phi is None else phi
    if phi is None:
        raise ValueError("phi is required when passing a raw CavityState")
    return _rotation_run(
        "qpg", cav, phi, [], success_on="g", chi=chi, leak_tolerance=leak_tolerance
    )


def hadamard_stages(axis_phase: float = HADAMARD_AXIS_PHASE) -> list:
    """``U_z(pi/4) U_u(pi/4) U_z(pi/4)`` as rotation specs in application order."""
    return [
        RotationSpec("z_axis", math.pi / 2),
        RotationSpec("u_axis", math.pi / 2, axis_phase),
        RotationSpec("z_axis", math.pi / 2),
    ]


def hadamard_gate(
    qubit: LogicalQubit,
    *,
    axis_phase: float = HADAMARD_AXIS_PHASE,
    n_max: int = 2,
    chi: ChiSource = math.pi,
    leak_tolerance: Optional[float] = LEAK_TOL,
) -> BranchTree:
    """Hadamard (up to a global phase) from three chained conditional rotations.

    Each stage runs only on the success leaves of the previous one, so the
    cumulative success probability is 1/8.
    """
    cav, phi = _input_cavity(qubit, n_max)
    tree = BranchTree("hadamard", phi)
    frontier = [((), 1.0, cav, True)]
    stages = hadamard_stages(axis_phase)
    for k, spec in enumerate(stages, start=1):
        tag = f"s{k}{'u' if spec.axis == 'u_axis' else 'z'}"
        tree.steps.append(f"stage {k}: {spec.axis} theta={spec.theta!r} varphi={spec.varphi!r}")
        nxt = []
        for path, p, state, clean in frontier:
            sub = rotate(state, spec, phi=phi, chi=chi, leak_tolerance=leak_tolerance)
            for lf in sub.leaves:
                lpath = path + tuple(f"{tag}.{x}" for x in lf.path)
                lp = p * lf.probability
                if not lf.is_success or lf.state is None:
                    tree.leaves.append(Leaf(lpath, lp, "failure", lf.state, phi, 1))
                elif k == len(stages):
                    cls = "success" if clean and lf.classification == "success" else "corrected"
                    tree.leaves.append(Leaf(lpath, lp, cls, lf.state, phi, 1))
                else:
                    nxt.append((lpath, lp, lf.cavity, clean and lf.classification == "success"))
        frontier = nxt
    # success leaves first so that primary_leaf() finds the clean path
    tree.leaves.sort(key=lambda lf: (not lf.is_success, lf.classification != "success"))
    return tree


def embed_two_qubit(vec, phi: float = 0.0, n_max: int = 2) -> CompositeState:
    """Atom (control) x cavity (target) state from a 4-vector over |c t>."""
    vec = np.asarray(vec, dtype=complex)
    zero, one = logical_basis(phi, n_max + 1)
    joint = np.concatenate([vec[0] * zero + vec[1] * one, vec[2] * zero + vec[3] * one])
    return CompositeState((2, n_max + 1), joint)


# name -> (number of logical qubits, runner(vector, phi, **params) -> BranchTree)
def _run_prepare(vec, phi, chi=math.pi, leak_tolerance=LEAK_TOL, **params):
    return prepare_qubit(vec[0], vec[1], phi, chi=chi, leak_tolerance=leak_tolerance, **params)


def _run_cnot(vec, phi, chi=math.pi, leak_tolerance=LEAK_TOL):
    return cnot_tree(embed_two_qubit(vec, phi), phi, chi=chi)


def _run_rotate_u(vec, phi, theta=0.0, varphi=0.0, **kw):
    return rotate_u(LogicalQubit.from_vector(vec, phi), theta, varphi, **kw)


def _run_rotate_z(vec, phi, theta=0.0, **kw):
    return rotate_z(LogicalQubit.from_vector(vec, phi), theta, **kw)


def _run_hadamard(vec, phi, **kw):
    return hadamard_gate(LogicalQubit.from_vector(vec, phi), **kw)


def _run_qpg(vec, phi, **kw):
    return qpg_pi(LogicalQubit.from_vector(vec, phi), **kw)


PROTOCOLS = {
    "prepare": (1, _run_prepare),
    "cnot": (2, _run_cnot),
    "rotate-u": (1, _run_rotate_u),
    "rotate-z": (1, _run_rotate_z),
    "hadamard": (1, _run_hadamard),
    "qpg": (1, _run_qpg),
}


def run_protocol(name: str, vec, phi: float = 0.0, **params) -> BranchTree:
    """Run a named protocol on a logical input vector (length 2, or 4 for cnot)."""
    try:
        n_qubits, runner = PROTOCOLS[name]
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; choose from {sorted(PROTOCOLS)}") from None
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != (2**n_qubits,):
        raise ValueError(f"{name} expects a logical vector of length {2**n_qubits}")
    return runner(vec, phi, **params)
