"""Linear hydrogen chains in STO-3G: s-type Gaussian integrals and closed-shell RHF."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import eigh
from scipy.special import erf

from .integrals import SpinOrbitalIntegrals

log = logging.getLogger(__name__)

BOHR_PER_ANGSTROM = 1.0 / 0.52917721092

# STO-3G hydrogen 1s (zeta = 1.24), normalised primitives applied below
STO3G_H_EXPONENTS = np.array([3.42525091, 0.62391373, 0.16885540])
STO3G_H_COEFFS = np.array([0.15432897, 0.53532814, 0.44463454])


class SCFConvergenceError(RuntimeError):
    pass


def to_bohr(length: float, unit: str) -> float:
    unit = unit.lower()
    if unit in ("a", "angstrom", "ang", "å"):
        return length * BOHR_PER_ANGSTROM
    if unit in ("a0", "bohr", "au"):
        return float(length)
    raise ValueError(f"unknown length unit {unit!r} (use 'angstrom' or 'bohr')")


def boys0(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    big = t > 1e-12
    st = np.sqrt(t[big])
    out[big] = 0.5 * math.sqrt(math.pi) * erf(st) / st
    small = ~big
    out[small] = 1.0 - t[small] / 3.0
    return out


def _primitives(centres: np.ndarray):
    """Flattened primitive data: centre, exponent, normalised contraction weight, basis index."""
    norm = (2.0 * STO3G_H_EXPONENTS / math.pi) ** 0.75
    rows = []
    for mu, c in enumerate(centres):
        for a, d, nrm in zip(STO3G_H_EXPONENTS, STO3G_H_COEFFS, norm):
            rows.append((c, a, d * nrm, mu))
    pos = np.array([r[0] for r in rows])
    alpha = np.array([r[1] for r in rows])
    w = np.array([r[2] for r in rows])
    idx = np.array([r[3] for r in rows])
    return pos, alpha, w, idx


def _contract2(prim: np.ndarray, w: np.ndarray, idx: np.ndarray, nbf: int) -> np.ndarray:
    m = prim * w[:, None] * w[None, :]
    out = np.zeros((nbf, nbf))
    np.add.at(out, (idx[:, None], idx[None, :]), m)
    return out


def sto3g_integrals(positions: np.ndarray, charges: np.ndarray):
    """AO overlap, core Hamiltonian and ERI tensor for 1s functions on ``positions`` (bohr, 3-vectors)."""
    positions = np.asarray(positions, dtype=float)
    nbf = len(positions)
    pos, a, w, idx = _primitives(positions)
    p = a[:, None] + a[None, :]
    mu = a[:, None] * a[None, :] / p
    r2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    kab = np.exp(-mu * r2)
    s_prim = (math.pi / p) ** 1.5 * kab
    t_prim = mu * (3.0 - 2.0 * mu * r2) * s_prim
    centre_p = (a[:, None, None] * pos[:, None, :] + a[None, :, None] * pos[None, :, :]) / p[..., None]
    v_prim = np.zeros_like(s_prim)
    for z, rc in zip(charges, positions):
        pc2 = np.sum((centre_p - rc) ** 2, axis=-1)
        v_prim -= z * 2.0 * math.pi / p * kab * boys0(p * pc2)

    S = _contract2(s_prim, w, idx, nbf)
    T = _contract2(t_prim, w, idx, nbf)
    V = _contract2(v_prim, w, idx, nbf)

    # (ab|cd) over primitives, then contract
    npr = len(a)
    pp = p.reshape(npr * npr)
    kk = kab.reshape(npr * npr)
    cc = centre_p.reshape(npr * npr, 3)
    denom = pp[:, None] * pp[None, :]
    rho = denom / (pp[:, None] + pp[None, :])
    pq2 = np.sum((cc[:, None, :] - cc[None, :, :]) ** 2, axis=-1)
    eri_prim = (
        2.0 * math.pi ** 2.5 / (denom * np.sqrt(pp[:, None] + pp[None, :]))
        * kk[:, None] * kk[None, :] * boys0(rho * pq2)
    ).reshape(npr, npr, npr, npr)
    eri_prim = eri_prim * (
        w[:, None, None, None] * w[None, :, None, None] * w[None, None, :, None] * w[None, None, None, :]
    )
    eri = np.zeros((nbf,) * 4)
    np.add.at(eri, (idx[:, None, None, None], idx[None, :, None, None],
                    idx[None, None, :, None], idx[None, None, None, :]), eri_prim)
    return S, T + V, eri


def nuclear_repulsion(positions: np.ndarray, charges: np.ndarray) -> float:
    e = 0.0
    for i in range(len(positions)):
        for j in range(i):
            e += charges[i] * charges[j] / np.linalg.norm(positions[i] - positions[j])
    return float(e)


def fix_orbital_phases(c: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Make the first significant AO coefficient of every MO positive (stable scans)."""
    c = c.copy()
    for k in range(c.shape[1]):
        col = c[:, k]
        big = np.nonzero(np.abs(col) > tol * np.abs(col).max())[0]
        if col[big[0]] < 0:
            c[:, k] = -col
    return c


def rhf(S, hcore, eri, n_occ, e_tol=1e-10, max_iter=200, mixing=0.5):
    """Closed-shell RHF with plain density damping. Returns (energy, C, eps)."""
    eps, c = eigh(hcore, S)
    d = 2.0 * c[:, :n_occ] @ c[:, :n_occ].T
    e_old = None
    for it in range(1, max_iter + 1):
        j = np.einsum("pqrs,rs->pq", eri, d)
        k = np.einsum("prqs,rs->pq", eri, d)
        f = hcore + j - 0.5 * k
        e_elec = 0.5 * np.sum(d * (hcore + f))
        eps, c = eigh(f, S)
        d_new = 2.0 * c[:, :n_occ] @ c[:, :n_occ].T
        if e_old is not None and abs(e_elec - e_old) < e_tol and np.abs(d_new - d).max() < 1e-6:
            log.debug("RHF converged in %d iterations", it)
            return e_elec, c, eps
        e_old = e_elec
        d = mixing * d_new + (1.0 - mixing) * d
    raise SCFConvergenceError(f"RHF not converged in {max_iter} iterations")


def hydrogen_chain_integrals(
    n_atoms: int,
    spacing: float,
    charge: int = 0,
    unit: str = "angstrom",
    e_tol: float = 1e-10,
    max_iter: int = 200,
) -> SpinOrbitalIntegrals:
    """Equally spaced linear H chain; integrals in the converged RHF orbital basis."""
    n_elec = n_atoms - charge
    if n_atoms < 1 or n_elec < 0:
        raise ValueError(f"invalid chain: {n_atoms} atoms with charge {charge}")
    if n_elec % 2:
        raise NotImplementedError(
            "open-shell chains are not generated here; load an FCIDUMP fixture instead"
        )
    r = to_bohr(spacing, unit)
    positions = np.zeros((n_atoms, 3))
    positions[:, 2] = r * np.arange(n_atoms)
    charges = np.ones(n_atoms)
    S, hcore, eri = sto3g_integrals(positions, charges)
    e_nuc = nuclear_repulsion(positions, charges)
    _, c, eps = rhf(S, hcore, eri, n_elec // 2, e_tol=e_tol, max_iter=max_iter)
    c = fix_orbital_phases(c)
    h_mo = c.T @ hcore @ c
    g_mo = np.einsum("pqrs,pi,qj,rk,sl->ijkl", eri, c, c, c, c, optimize=True)
    return SpinOrbitalIntegrals(
        n_spatial=n_atoms,
        n_electrons=n_elec,
        ms2=0,
        core_energy=e_nuc,
        one_body=0.5 * (h_mo + h_mo.T),
        two_body=g_mo,
        orbital_energies=eps,
    )
