"""Spawn-target sampling from a prepared state and the fermionic Hamiltonian terms.

One draw picks a non-constant fermionic term F_k with probability
|h_k| / sum |h_k|, applies a Pauli string of its Jordan-Wigner image to the
prepared state and measures the register. Every string in the image of F_k
flips the same qubits, so the outcome distribution is
``p~(i) = sum_k w_k |c_{i xor x_k}|^2``; outcomes outside the particle/S_z
sector of the reference are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from ..chem.fermion import FermionOperator
from ..oracle import DeterminantBasis
from ..statevector import Statevector, measure_register, pauli_apply


@dataclass(frozen=True)
class TermTable:
    flips: np.ndarray  # qubit flip mask of each term
    weights: np.ndarray  # |h_k| / sum |h_k|


def term_table(fermion: FermionOperator) -> TermTable:
    flips, mags = [], []
    for v, cre, ann in fermion:
        if not cre and not ann:
            continue
        mask = 0
        for p in cre + ann:
            mask ^= 1 << p
        flips.append(mask)
        mags.append(abs(v))
    mags = np.array(mags, dtype=float)
    if mags.size == 0 or mags.sum() == 0:
        raise ValueError("Hamiltonian has no non-constant terms")
    return TermTable(np.array(flips, dtype=np.int64), mags / mags.sum())


@dataclass
class SpawnSample:
    determinants: np.ndarray  # accepted outcomes
    n_rejected: int


def sample_spawn_targets(psi: np.ndarray, fermion: FermionOperator, basis: DeterminantBasis,
                         n_samples: int, rng: np.random.Generator) -> SpawnSample:
    """Draw ``n_samples`` outcomes; out-of-sector outcomes are counted and dropped."""
    table = term_table(fermion)
    n = int(np.log2(psi.size))
    counts = rng.multinomial(n_samples, table.weights)
    sector = np.zeros(psi.size, dtype=bool)
    sector[list(basis.determinants)] = True
    out = []
    for k in np.nonzero(counts)[0]:
        v = pauli_apply(psi.astype(complex), n, int(table.flips[k]), 0)
        out.append(measure_register(Statevector(n, v), rng, size=int(counts[k])))
    draws = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
    keep = sector[draws]
    return SpawnSample(draws[keep], int((~keep).sum()))


def analytic_ptilde(psi: np.ndarray, fermion: FermionOperator, basis: DeterminantBasis) -> np.ndarray:
    """Accepted-outcome distribution of the sampler over ``basis.determinants``."""
    table = term_table(fermion)
    dets = np.array(basis.determinants, dtype=np.int64)
    prob = np.abs(psi) ** 2
    p = np.zeros(dets.size)
    for x, w in zip(table.flips, table.weights):
        p += w * prob[dets ^ x]
    total = p.sum()
    if total == 0:
        raise ValueError("sampler never lands in the sector")
    return p / total


def p_gen(sector_matrix: np.ndarray, coefficients: np.ndarray, shift: float) -> np.ndarray:
    """Ideal generation probability, proportional to |<phi_i|H - S|Psi>| over the sector."""
    r = np.abs(sector_matrix @ coefficients - shift * coefficients)
    total = r.sum()
    if total == 0:
        raise ValueError("state is an exact eigenvector at this shift")
    return r / total


def kl_divergence(p, q) -> float:
    """sum p ln(p / q); q may vanish only where p does."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same shape")
    if np.any((q == 0) & (p > 0)):
        raise ValueError("q vanishes where p does not")
    return float(rel_entr(p, q).sum())


def restrict(p, support) -> np.ndarray:
    """Renormalized restriction of ``p`` to a boolean support mask."""
    p = np.where(support, np.asarray(p, dtype=float), 0.0)
    return p / p.sum()
