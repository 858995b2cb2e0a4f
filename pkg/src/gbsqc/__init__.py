"""Cavity-QED gate protocols over two-photon generalized binomial state qubits."""

from gbsqc.fock import (
    CavityState,
    NgbsParams,
    coherent_state,
    inner_product,
    make_ngbs,
    orthogonal_partner,
    state_fidelity,
)
from gbsqc.atom_cavity import (
    AtomState,
    CompositeState,
    DispersiveParams,
    LeakageError,
    MeasurementBranch,
    RamseyParams,
    compose,
    dispersive_evolve,
    measure_atom,
    measure_cavity_logical,
    pi_di,
    ramsey_apply,
    ramsey_matrix,
)
from gbsqc.protocols import (
    BranchTree,
    Leaf,
    LogicalQubit,
    RotationSpec,
    cnot_gate,
    hadamard_gate,
    prepare_qubit,
    qpg_pi,
    rotate_u,
    rotate_z,
)

__version__ = "0.1.0"
