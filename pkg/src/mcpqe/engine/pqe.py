"""Deterministic (linked-residual) projective quantum eigensolver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..ansatz import AnsatzState
from ..qubit.pauli import QubitOperator
from .system import StatePreparer


class NotConverged(RuntimeError):
    """Iteration limit reached before the residual tolerance."""


@dataclass
class PQEResult:
    state: AnsatzState
    energy: float
    residual_norm: float
    n_iterations: int
    history: list[float]


def linked_residuals(prep: StatePreparer, h: sp.spmatrix, theta, targets) -> np.ndarray:
    """r_i = <phi_i|U^dagger H U|phi_0>, evaluated through the inverse circuit."""
    v = prep.apply_inverse(theta, h @ prep(theta))
    return np.real(v[np.asarray(targets)])


def linked_residuals_expectation(prep: StatePreparer, h: sp.spmatrix, theta, targets) -> np.ndarray:
    """Same residuals from three energy expectation values per target.

    With A = U^dagger H U real symmetric and Omega_i = (phi_0 + phi_i)/sqrt(2),
    A_0i = <Omega_i|A|Omega_i> - A_00/2 - A_ii/2.
    """
    dim = 1 << prep.n_qubits

    def energy(v):
        w = prep.apply(theta, v)
        return float(np.real(np.vdot(w, h @ w)))

    e0 = np.zeros(dim)
    e0[prep.reference] = 1.0
    a00 = energy(e0)
    out = []
    for t in targets:
        ei = np.zeros(dim)
        ei[t] = 1.0
        omega = (e0 + ei) / np.sqrt(2.0)
        out.append(energy(omega) - 0.5 * a00 - 0.5 * energy(ei))
    return np.array(out)


def deterministic_pqe(state: AnsatzState, hamiltonian: QubitOperator, tol: float = 1e-8,
                      max_iter: int = 500, check: bool = False) -> PQEResult:
    """Quasi-Newton PQE: theta_i <- theta_i + r_i / Delta_i until max |r| < tol.

    ``Delta_i`` are the ansatz orbital-energy denominators (occupied minus
    virtual). With ``check`` the expectation-value form of the residual is
    evaluated alongside and must agree with the direct one.
    """
    delta = state.denominators
    if np.any(delta == 0.0):
        raise ValueError("ansatz denominators are required (build it with orbital energies)")
    h = hamiltonian.to_sparse().real.tocsr()
    prep = StatePreparer(state)
    theta = state.amplitudes.copy()
    targets = state.targets
    history = []
    for it in range(max_iter + 1):
        r = linked_residuals(prep, h, theta, targets)
        if check:
            r2 = linked_residuals_expectation(prep, h, theta, targets)
            if np.max(np.abs(r - r2), initial=0.0) > 1e-10:
                raise ArithmeticError("linked residual evaluations disagree")
        norm = float(np.max(np.abs(r), initial=0.0))
        psi = prep(theta)
        history.append(float(psi @ (h @ psi)))
        if norm < tol:
            return PQEResult(state.with_amplitudes(theta), history[-1], norm, it, history)
        theta = theta + r / delta
    raise NotConverged(f"max |r| = {norm:.3e} after {max_iter} iterations")
