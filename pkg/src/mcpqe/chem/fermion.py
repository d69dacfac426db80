"""Normal-ordered second-quantised operators over spin orbitals."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .integrals import SpinOrbitalIntegrals, freeze_core

Key = tuple[tuple[int, ...], tuple[int, ...]]


def _sort_with_sign(idx: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Bubble-sort ascending, returning the permutation sign; sign 0 on a repeat."""
    lst = list(idx)
    sign = 1
    for i in range(len(lst)):
        for j in range(len(lst) - 1 - i):
            if lst[j] == lst[j + 1]:
                return tuple(lst), 0
            if lst[j] > lst[j + 1]:
                lst[j], lst[j + 1] = lst[j + 1], lst[j]
                sign = -sign
    if len(set(lst)) != len(lst):
        return tuple(lst), 0
    return tuple(lst), sign


@dataclass
class FermionOperator:
    """Sum of terms ``coeff * a+_{c1} a+_{c2} ... a_{a1} a_{a2} ...``.

    Creation and annihilation index tuples are stored strictly ascending;
    products written in any order are brought to that form by :meth:`add`.
    """

    terms: dict[Key, complex] = field(default_factory=dict)

    def add(self, coeff: complex, creations=(), annihilations=()) -> None:
        if len(creations) != len(annihilations):
            raise ValueError("term is not particle conserving")
        cre, s1 = _sort_with_sign(tuple(creations))
        ann, s2 = _sort_with_sign(tuple(annihilations))
        if s1 * s2 == 0 or coeff == 0:
            return
        key = (cre, ann)
        self.terms[key] = self.terms.get(key, 0.0) + s1 * s2 * coeff

    def pruned(self, tol: float = 1e-12) -> "FermionOperator":
        return FermionOperator({k: v for k, v in self.terms.items() if abs(v) > tol})

    def adjoint(self) -> "FermionOperator":
        out = FermionOperator()
        for (cre, ann), v in self.terms.items():
            # (a+_c1 a+_c2 a_a1 a_a2)^dag = a+_a2 a+_a1 a_c2 a_c1; reversing both pairs is sign-neutral
            out.add(complex(v).conjugate(), ann[::-1], cre[::-1])
        return out

    def constant(self) -> complex:
        return self.terms.get(((), ()), 0.0)

    def max_index(self) -> int:
        return max((max(c + a) for c, a in self.terms if c or a), default=-1)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        for (cre, ann), v in self.terms.items():
            yield v, cre, ann


def to_fermion_operator(
    ints: SpinOrbitalIntegrals, frozen_core: int = 0, tol: float = 1e-12
) -> FermionOperator:
    """Spin-orbital Hamiltonian (alpha = 2p, beta = 2p+1), with optional frozen core."""
    ints = freeze_core(ints, frozen_core)
    n = ints.n_spatial
    h, g = ints.one_body, ints.two_body
    op = FermionOperator()
    op.add(ints.core_energy)
    for p, q in product(range(n), repeat=2):
        if h[p, q] != 0.0:
            for s in (0, 1):
                op.add(h[p, q], (2 * p + s,), (2 * q + s,))
    # 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s t} a_{q s}
    for p, q, r, s in product(range(n), repeat=4):
        v = g[p, q, r, s]
        if v == 0.0:
            continue
        for sa, sb in product((0, 1), repeat=2):
            P, Q, R, S = 2 * p + sa, 2 * q + sa, 2 * r + sb, 2 * s + sb
            if P == R or Q == S:
                continue
            op.add(0.5 * v, (P, R), (S, Q))
    return op.pruned(tol)
