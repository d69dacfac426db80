"""Molecular-orbital integral container and frozen-core folding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpinOrbitalIntegrals:
    """Integrals over spatial orbitals for a real, restricted orbital basis.

    ``one_body[p, q]`` is h_pq and ``two_body[p, q, r, s]`` is (pq|rs) in
    chemists' notation. The spin-orbital Hamiltonian is built from these by
    :func:`mcpqe.chem.fermion.to_fermion_operator` (alpha = even index,
    beta = odd index).
    """

    n_spatial: int
    n_electrons: int
    ms2: int
    core_energy: float
    one_body: np.ndarray
    two_body: np.ndarray
    orbital_energies: np.ndarray | None = None
    frozen: int = field(default=0, compare=False)

    def __post_init__(self):
        n = self.n_spatial
        if self.one_body.shape != (n, n):
            raise ValueError(f"one_body has shape {self.one_body.shape}, expected {(n, n)}")
        if self.two_body.shape != (n, n, n, n):
            raise ValueError(f"two_body has shape {self.two_body.shape}")
        if not 0 <= self.n_electrons <= 2 * n:
            raise ValueError(f"{self.n_electrons} electrons do not fit in {n} orbitals")
        if abs(self.ms2) > self.n_electrons or (self.n_electrons - self.ms2) % 2:
            raise ValueError(f"MS2={self.ms2} incompatible with NELEC={self.n_electrons}")

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_spatial

    @property
    def n_alpha(self) -> int:
        return (self.n_electrons + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_electrons - self.ms2) // 2

    def reference_mask(self) -> int:
        """Aufbau determinant: lowest alpha and beta orbitals occupied."""
        mask = 0
        for i in range(self.n_alpha):
            mask |= 1 << (2 * i)
        for i in range(self.n_beta):
            mask |= 1 << (2 * i + 1)
        return mask

    def reference_energy(self) -> float:
        """Energy of :meth:`reference_mask` (closed- or high-spin open-shell)."""
        h, g = self.one_body, self.two_body
        occ_a = range(self.n_alpha)
        occ_b = range(self.n_beta)
        e = self.core_energy
        e += sum(h[i, i] for i in occ_a) + sum(h[i, i] for i in occ_b)
        for occ in (occ_a, occ_b):
            for i in occ:
                for j in occ:
                    e += 0.5 * (g[i, i, j, j] - g[i, j, j, i])
        for i in occ_a:
            for j in occ_b:
                e += g[i, i, j, j]
        return float(e)

    def fock_diagonal(self) -> np.ndarray:
        """Diagonal of the spin-orbital Fock operator of the reference determinant."""
        h, g = self.one_body, self.two_body
        occ = [p for p in range(self.n_spin_orbitals) if self.reference_mask() >> p & 1]
        eps = np.empty(self.n_spin_orbitals)
        for p in range(self.n_spin_orbitals):
            sp, pp = p % 2, p // 2
            f = h[pp, pp]
            for j in occ:
                jj = j // 2
                f += g[pp, pp, jj, jj]
                if j % 2 == sp:
                    f -= g[pp, jj, jj, pp]
            eps[p] = f
        return eps

    def spin_orbital_energies(self) -> np.ndarray:
        """Orbital energies per spin orbital; falls back to the Fock diagonal."""
        if self.orbital_energies is None:
            return self.fock_diagonal()
        return np.repeat(np.asarray(self.orbital_energies, dtype=float), 2)


def freeze_core(ints: SpinOrbitalIntegrals, n_frozen: int) -> SpinOrbitalIntegrals:
    """Fold the lowest ``n_frozen`` doubly occupied orbitals into an effective Hamiltonian."""
    if n_frozen == 0:
        return ints
    if n_frozen < 0 or 2 * n_frozen >= ints.n_electrons or n_frozen > ints.n_beta:
        raise ValueError(
            f"cannot freeze {n_frozen} orbitals with {ints.n_electrons} electrons"
        )
    h, g = ints.one_body, ints.two_body
    c = range(n_frozen)
    act = slice(n_frozen, ints.n_spatial)
    e_core = ints.core_energy
    for i in c:
        e_core += 2.0 * h[i, i]
        for j in c:
            e_core += 2.0 * g[i, i, j, j] - g[i, j, j, i]
    h_eff = h.copy()
    for i in c:
        h_eff += 2.0 * g[:, :, i, i] - g[:, i, i, :]
    eps = None
    if ints.orbital_energies is not None:
        eps = np.asarray(ints.orbital_energies)[act].copy()
    return SpinOrbitalIntegrals(
        n_spatial=ints.n_spatial - n_frozen,
        n_electrons=ints.n_electrons - 2 * n_frozen,
        ms2=ints.ms2,
        core_energy=float(e_core),
        one_body=h_eff[act, act].copy(),
        two_body=g[act, act, act, act].copy(),
        orbital_energies=eps,
        frozen=ints.frozen + n_frozen,
    )
