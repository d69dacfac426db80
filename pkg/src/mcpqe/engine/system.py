"""A molecular problem prepared for propagation: shifted qubit Hamiltonian, groups, ansatz pool."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..ansatz import AnsatzState, enumerate_uccsd, generator_operator, screen_connected
from ..chem.fermion import FermionOperator, to_fermion_operator
from ..chem.integrals import SpinOrbitalIntegrals, freeze_core
from ..oracle import DeterminantBasis, build_sector_hamiltonian, connected_block, fci_spectrum
from ..qubit.grouping import CommutingGroup, group_qubitwise
from ..qubit.jordan_wigner import jordan_wigner
from ..qubit.pauli import QubitOperator


@dataclass
class System:
    """Active-space integrals plus the qubit Hamiltonian.

    The Hamiltonian is kept in absolute energy, identity term included, so
    that sampling noise on that term is part of the measurement. Reported
    energies are relative to ``e_ref``, the energy of the reference
    determinant (the Hartree-Fock energy for SCF orbitals).
    """

    ints: SpinOrbitalIntegrals
    fermion: FermionOperator
    hamiltonian: QubitOperator
    e_ref: float
    grouping: str = "xy_pattern"
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def reference(self) -> int:
        return self.ints.reference_mask()

    @cached_property
    def groups(self) -> list[CommutingGroup]:
        return group_qubitwise(self.hamiltonian, self.grouping)

    @cached_property
    def basis(self) -> DeterminantBasis:
        return DeterminantBasis.from_integrals(self.ints)

    @cached_property
    def sector_matrix(self) -> np.ndarray:
        """Slater-Condon sector Hamiltonian in absolute energy."""
        return build_sector_hamiltonian(self.ints, self.basis)

    @cached_property
    def fci(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute FCI eigenvalues and eigenvectors of the reference sector."""
        return fci_spectrum(self.sector_matrix)

    @property
    def fci_correlation(self) -> float:
        return float(self.fci[0][0] - self.e_ref)

    def ansatz(self, reference: int | None = None, screen: bool = True) -> AnsatzState:
        """UCCSD pool from ``reference``; optionally screened to its Hamiltonian-connected block."""
        ref = self.reference if reference is None else reference
        a = enumerate_uccsd(self.ints.n_spin_orbitals, ref, self.ints.spin_orbital_energies())
        if screen:
            a = screen_connected(a, connected_block(self.sector_matrix, self.basis, ref))
        return a


def build_system(ints: SpinOrbitalIntegrals, frozen_core: int = 0, grouping: str = "xy_pattern",
                 name: str = "") -> System:
    active = freeze_core(ints, frozen_core)
    ferm = to_fermion_operator(active)
    e_ref = active.reference_energy()
    h = jordan_wigner(ferm, active.n_spin_orbitals).real()
    return System(active, ferm, h, e_ref, grouping, name)


class StatePreparer:
    """Fast U(theta)|phi_0> for a fixed excitation pool.

    For a fermionic excitation, kappa^3 = -kappa, so
    exp(theta kappa) = 1 + sin(theta) kappa + (1 - cos(theta)) kappa^2, applied
    with two sparse products. Equivalent to the gadget circuit.
    """

    def __init__(self, ansatz: AnsatzState):
        self.reference = ansatz.reference
        self.n_qubits = ansatz.n_qubits
        self.labels = [e.label for e in ansatz.excitations]
        self._kappa = [sp.csr_matrix(generator_operator(ansatz, k).to_sparse().real)
                       for k in range(len(ansatz))]

    def __call__(self, theta) -> np.ndarray:
        psi = np.zeros(1 << self.n_qubits)
        psi[self.reference] = 1.0
        return self.apply(theta, psi)

    def _rotate(self, k: int, t: float, v: np.ndarray) -> np.ndarray:
        kv = self._kappa[k] @ v
        return v + np.sin(t) * kv + (1.0 - np.cos(t)) * (self._kappa[k] @ kv)

    def apply(self, theta, v: np.ndarray) -> np.ndarray:
        """U(theta) v, first excitation applied first."""
        for k, t in enumerate(theta):
            if t != 0.0:
                v = self._rotate(k, t, v)
        return v

    def apply_inverse(self, theta, v: np.ndarray) -> np.ndarray:
        """U(theta)^dagger v."""
        for k in reversed(range(len(theta))):
            if theta[k] != 0.0:
                v = self._rotate(k, -theta[k], v)
        return v
