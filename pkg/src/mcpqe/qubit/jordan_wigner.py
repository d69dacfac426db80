"""Jordan-Wigner encoding of fermionic operators.

``a+_p = (X_p - i Y_p)/2 Z_{p-1} ... Z_0``, so a determinant with occupied
spin orbitals p1 < p2 < ... is ``a+_{p1} a+_{p2} ... |vac>`` and maps to the
computational basis state whose bit p is set for each occupied p, with
amplitude +1.
"""

from __future__ import annotations

from functools import lru_cache

from ..chem.fermion import FermionOperator
from .pauli import QubitOperator


@lru_cache(maxsize=None)
def ladder(p: int, dagger: bool) -> QubitOperator:
    zs = (1 << p) - 1
    xp = 1 << p
    sign = -1 if dagger else 1
    return QubitOperator(p + 1, {(xp, zs): 0.5, (xp, zs | xp): sign * 0.5j})


def jordan_wigner(f: FermionOperator, n_qubits: int, tol: float = 1e-12) -> QubitOperator:
    if f.max_index() >= n_qubits:
        raise ValueError(f"fermion index {f.max_index()} does not fit in {n_qubits} qubits")
    acc: dict[tuple[int, int], complex] = {}
    for coeff, cre, ann in f:
        op = QubitOperator.identity(n_qubits, coeff)
        for p in cre:
            op = op * ladder(p, True)
        for p in ann:
            op = op * ladder(p, False)
        for k, c in op.terms.items():
            acc[k] = acc.get(k, 0.0) + c
    return QubitOperator(n_qubits, acc, tol)
