"""Exact FCI reference in a fixed particle-number / S_z sector.

The sector Hamiltonian is built from the spatial integrals with
Slater-Condon rules, independently of the qubit mapping, so comparing it
with the Jordan-Wigner operator restricted to the same sector checks both.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .chem.integrals import SpinOrbitalIntegrals, freeze_core
from .qubit.pauli import QubitOperator, parity_array, popcount

DEFAULT_CAP = 4096
_I_POW = np.array([1.0, 1j, -1.0, -1j])


class SectorTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class DeterminantBasis:
    n_spin_orbitals: int
    n_electrons: int
    ms2: int
    determinants: tuple[int, ...]

    @classmethod
    def sector(cls, n_spin_orbitals: int, n_electrons: int, ms2: int = 0) -> "DeterminantBasis":
        n_alpha, rem = divmod(n_electrons + ms2, 2)
        if rem or n_alpha < 0 or n_alpha > n_electrons:
            raise ValueError(f"no sector with {n_electrons} electrons and MS2={ms2}")
        n_beta = n_electrons - n_alpha
        alpha = range(0, n_spin_orbitals, 2)
        beta = range(1, n_spin_orbitals, 2)
        dets = []
        for a in combinations(alpha, n_alpha):
            for b in combinations(beta, n_beta):
                dets.append(sum(1 << p for p in a + b))
        return cls(n_spin_orbitals, n_electrons, ms2, tuple(sorted(dets)))

    @classmethod
    def from_integrals(cls, ints: SpinOrbitalIntegrals) -> "DeterminantBasis":
        return cls.sector(ints.n_spin_orbitals, ints.n_electrons, ints.ms2)

    def __len__(self):
        return len(self.determinants)

    def index(self) -> dict[int, int]:
        return {d: k for k, d in enumerate(self.determinants)}


def _occupied(det: int) -> list[int]:
    return [p for p in range(det.bit_length()) if det >> p & 1]


def _sign_between(det: int, lo: int, hi: int) -> int:
    """(-1)^(number of occupied orbitals strictly between lo and hi)."""
    if lo > hi:
        lo, hi = hi, lo
    mask = ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)
    return -1 if popcount(det & mask) % 2 else 1


def _excite(det: int, i: int, a: int) -> tuple[int, int]:
    """a+_a a_i |det>: new determinant and fermionic sign."""
    sign = -1 if popcount(det & ((1 << i) - 1)) % 2 else 1
    det ^= 1 << i
    sign *= -1 if popcount(det & ((1 << a) - 1)) % 2 else 1
    return det | (1 << a), sign


def _spin_orbital_tensors(ints: SpinOrbitalIntegrals):
    n = ints.n_spin_orbitals
    spat = np.arange(n) // 2
    spin = np.arange(n) % 2
    h = ints.one_body[np.ix_(spat, spat)] * (spin[:, None] == spin[None, :])
    g = ints.two_body[np.ix_(spat, spat, spat, spat)]
    same = spin[:, None] == spin[None, :]
    # <pq|rs> = (pr|qs), nonzero when spin(p)=spin(r) and spin(q)=spin(s)
    phys = g.transpose(0, 2, 1, 3) * same[:, None, :, None] * same[None, :, None, :]
    anti = phys - phys.transpose(0, 1, 3, 2)
    return h, anti


def build_sector_hamiltonian(ints: SpinOrbitalIntegrals, basis: DeterminantBasis | None = None,
                             frozen_core: int = 0) -> np.ndarray:
    """Dense sector Hamiltonian from Slater-Condon rules (includes the core energy)."""
    ints = freeze_core(ints, frozen_core)
    basis = basis or DeterminantBasis.from_integrals(ints)
    if basis.n_spin_orbitals != ints.n_spin_orbitals:
        raise ValueError("basis and integrals span different orbital spaces")
    h, anti = _spin_orbital_tensors(ints)
    index = basis.index()
    dim = len(basis)
    out = np.zeros((dim, dim))
    n = ints.n_spin_orbitals
    for col, det in enumerate(basis.determinants):
        occ = _occupied(det)
        virt = [p for p in range(n) if not det >> p & 1]
        occ_arr = np.array(occ, dtype=int)
        diag = ints.core_energy + sum(h[i, i] for i in occ)
        diag += 0.5 * anti[np.ix_(occ_arr, occ_arr, occ_arr, occ_arr)].trace(axis1=0, axis2=2).trace()
        out[col, col] = diag
        for i in occ:
            for a in virt:
                if (i - a) % 2:
                    continue
                new, sign = _excite(det, i, a)
                row = index.get(new)
                if row is None:
                    continue
                out[row, col] += sign * (h[a, i] + anti[a, occ_arr, i, occ_arr].sum())
        for i, j in combinations(occ, 2):
            for a, b in combinations(virt, 2):
                if sorted((i % 2, j % 2)) != sorted((a % 2, b % 2)):
                    continue
                d1, s1 = _excite(det, i, a)
                d2, s2 = _excite(d1, j, b)
                row = index.get(d2)
                if row is None:
                    continue
                # a+_b a_j a+_a a_i = a+_a a+_b a_j a_i (a_j and a+_a anticommute, j != a)
                out[row, col] += s1 * s2 * anti[a, b, i, j]
    return out


def qubit_sector_matrix(op: QubitOperator, basis: DeterminantBasis) -> np.ndarray:
    """<phi_r| op |phi_c> over the sector determinants, from the Pauli terms directly."""
    dets = np.array(basis.determinants, dtype=np.int64)
    lookup = -np.ones(1 << op.n_qubits, dtype=np.int64)
    lookup[dets] = np.arange(dets.size)
    par = parity_array(op.n_qubits)
    out = np.zeros((dets.size, dets.size), dtype=complex)
    cols = np.arange(dets.size)
    for (x, z), c in op.terms.items():
        rows = lookup[dets ^ x]
        ok = rows >= 0
        val = c * _I_POW[popcount(x & z) % 4] * (1 - 2 * par[dets & z].astype(float))
        np.add.at(out, (rows[ok], cols[ok]), val[ok])
    return out


def fci_spectrum(matrix: np.ndarray, cap: int = DEFAULT_CAP):
    """Ascending eigenvalues and eigenvectors (columns) of a dense symmetric matrix."""
    if matrix.shape[0] > cap:
        raise SectorTooLarge(f"sector dimension {matrix.shape[0]} exceeds cap {cap}")
    return np.linalg.eigh(matrix)


def fci_energy(ints: SpinOrbitalIntegrals, frozen_core: int = 0) -> float:
    return float(fci_spectrum(build_sector_hamiltonian(ints, frozen_core=frozen_core))[0][0])


def connected_block(matrix: np.ndarray, basis: DeterminantBasis, start: int,
                    tol: float = 1e-10) -> set[int]:
    """Determinants reachable from ``start`` through nonzero off-diagonal elements."""
    index = basis.index()
    seen = {index[start]}
    todo = deque(seen)
    while todo:
        k = todo.popleft()
        for m in np.nonzero(np.abs(matrix[:, k]) > tol)[0]:
            if int(m) not in seen:
                seen.add(int(m))
                todo.append(int(m))
    return {basis.determinants[k] for k in seen}


def exact_state(ansatz, basis: DeterminantBasis) -> np.ndarray:
    """Sector amplitudes of U(theta)|phi_0> for an :class:`~mcpqe.ansatz.AnsatzState`."""
    from .ansatz import build_circuit
    from .statevector import run_circuit

    psi = run_circuit(build_circuit(ansatz), ansatz.reference, ansatz.n_qubits).amplitudes
    vec = psi[np.array(basis.determinants)]
    leak = 1.0 - np.vdot(vec, vec).real
    if leak > 1e-10:
        raise ValueError(f"state leaks {leak:.2e} of its norm out of the sector")
    return vec
