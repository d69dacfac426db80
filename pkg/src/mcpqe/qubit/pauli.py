"""Symplectic Pauli strings and sums of them.

A Pauli string on n qubits is the pair of bit masks ``(x, z)``: qubit q
carries X if only bit q of x is set, Z if only bit q of z is set, Y if both
are set. Note Y is stored directly, i.e. ``(x, z)`` denotes
``i^{|x & z|} X^x Z^z``, so every string is Hermitian with unit phase.

Qubit q is bit q of a computational-basis index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

PRUNE_TOL = 1e-12

_I_POW = (1.0 + 0j, 1j, -1.0 + 0j, -1j)
_LETTERS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


def popcount(v: int) -> int:
    return bin(v).count("1")


def parity_array(n_bits: int) -> np.ndarray:
    """parity_array(n)[b] = popcount(b) mod 2 for every b < 2**n."""
    par = np.zeros(1, dtype=np.int8)
    for _ in range(n_bits):
        par = np.concatenate([par, 1 - par])
    return par


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent k (mod 4) with P(x1,z1) P(x2,z2) = i^k P(x1^x2, z1^z2)."""
    x3, z3 = x1 ^ x2, z1 ^ z2
    k = popcount(x1 & z1) + popcount(x2 & z2) + 2 * popcount(z1 & x2) - popcount(x3 & z3)
    return k % 4


@dataclass(frozen=True)
class PauliTerm:
    x: int
    z: int
    coefficient: complex = 1.0

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return popcount(self.x | self.z)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def is_diagonal(self) -> bool:
        return self.x == 0

    def letter(self, q: int) -> str:
        return _LETTERS[(self.x >> q & 1, self.z >> q & 1)]

    def word(self) -> str:
        """Sparse label, e.g. ``X0 Z2 Y3``; ``I`` for the identity."""
        q, parts, s = 0, [], self.support
        while s >> q:
            if s >> q & 1:
                parts.append(f"{self.letter(q)}{q}")
            q += 1
        return " ".join(parts) or "I"

    def commutes(self, other: "PauliTerm") -> bool:
        return (popcount(self.x & other.z) + popcount(self.z & other.x)) % 2 == 0

    def qubitwise_commutes(self, other: "PauliTerm") -> bool:
        overlap = self.support & other.support
        return ((self.x ^ other.x) | (self.z ^ other.z)) & overlap == 0

    def __mul__(self, other):
        if isinstance(other, PauliTerm):
            return multiply(self, other)
        return PauliTerm(self.x, self.z, self.coefficient * other)

    __rmul__ = __mul__


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    k = product_phase(a.x, a.z, b.x, b.z)
    return PauliTerm(a.x ^ b.x, a.z ^ b.z, a.coefficient * b.coefficient * _I_POW[k])


def parse_word(word: str) -> tuple[int, int]:
    x = z = 0
    for tok in word.split():
        if tok.upper() == "I":
            continue
        m = re.fullmatch(r"([XYZ])(\d+)", tok.upper())
        if m is None:
            raise ValueError(f"bad Pauli token {tok!r}")
        q = int(m.group(2))
        if (x | z) >> q & 1:
            raise ValueError(f"qubit {q} repeated in {word!r}")
        if m.group(1) in "XY":
            x |= 1 << q
        if m.group(1) in "YZ":
            z |= 1 << q
    return x, z


class QubitOperator:
    """Canonical sum of Pauli strings: ``{(x, z): coefficient}``, pruned and read-only."""

    __slots__ = ("n_qubits", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[tuple[int, int], complex] | None = None,
                 tol: float = PRUNE_TOL):
        self.n_qubits = n_qubits
        clean = {}
        for (x, z), c in (terms or {}).items():
            if (x | z) >> n_qubits:
                raise ValueError(f"term acts outside {n_qubits} qubits")
            if abs(c) > tol:
                clean[(x, z)] = complex(c)
        self._terms = MappingProxyType(clean)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[PauliTerm], tol: float = PRUNE_TOL):
        acc: dict[tuple[int, int], complex] = {}
        for t in terms:
            acc[(t.x, t.z)] = acc.get((t.x, t.z), 0.0) + t.coefficient
        return cls(n_qubits, acc, tol)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0):
        return cls(n_qubits, {(0, 0): coeff})

    @property
    def terms(self) -> Mapping[tuple[int, int], complex]:
        return self._terms

    def pauli_terms(self) -> list[PauliTerm]:
        return [PauliTerm(x, z, c) for (x, z), c in self._terms.items()]

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.pauli_terms())

    def __eq__(self, other):
        return (isinstance(other, QubitOperator) and self.n_qubits == other.n_qubits
                and dict(self._terms) == dict(other._terms))

    def __repr__(self):
        return f"QubitOperator(n_qubits={self.n_qubits}, n_terms={len(self)})"

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def real(self) -> "QubitOperator":
        return QubitOperator(self.n_qubits, {k: c.real for k, c in self._terms.items()})

    def constant(self) -> complex:
        return self._terms.get((0, 0), 0.0)

    def __add__(self, other):
        if not isinstance(other, QubitOperator):
            other = QubitOperator.identity(self.n_qubits, other)
        n = max(self.n_qubits, other.n_qubits)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return QubitOperator(n, acc)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, QubitOperator):
            n = max(self.n_qubits, other.n_qubits)
            acc: dict[tuple[int, int], complex] = {}
            for (x1, z1), c1 in self._terms.items():
                for (x2, z2), c2 in other._terms.items():
                    k = (x1 ^ x2, z1 ^ z2)
                    acc[k] = acc.get(k, 0.0) + c1 * c2 * _I_POW[product_phase(x1, z1, x2, z2)]
            return QubitOperator(n, acc)
        return QubitOperator(self.n_qubits, {k: c * other for k, c in self._terms.items()})

    def __rmul__(self, other):
        return self * other

    def adjoint(self) -> "QubitOperator":
        return QubitOperator(self.n_qubits, {k: c.conjugate() for k, c in self._terms.items()})

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        basis = np.arange(dim)
        par = parity_array(self.n_qubits)
        for (x, z), c in self._terms.items():
            ph = c * _I_POW[popcount(x & z) % 4] * (1 - 2 * par[basis & z])
            out[basis ^ x, basis] += ph
        return out

    def to_sparse(self):
        from scipy.sparse import csr_matrix

        dim = 1 << self.n_qubits
        basis = np.arange(dim)
        par = parity_array(self.n_qubits)
        rows, cols, vals = [], [], []
        for (x, z), c in self._terms.items():
            rows.append(basis ^ x)
            cols.append(basis)
            vals.append(c * _I_POW[popcount(x & z) % 4] * (1 - 2 * par[basis & z]))
        if not rows:
            return csr_matrix((dim, dim), dtype=complex)
        return csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(dim, dim))

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Matrix-free action on a statevector of length 2**n_qubits."""
        basis = np.arange(psi.shape[0])
        par = parity_array(self.n_qubits)
        out = np.zeros_like(psi, dtype=complex)
        for (x, z), c in self._terms.items():
            ph = c * _I_POW[popcount(x & z) % 4] * (1 - 2 * par[basis & z])
            out[basis ^ x] += ph * psi
        return out

    def to_text(self) -> str:
        """One line per term: ``coeff word`` (``0.5 X0 Z2 Y3``); complex coefficients as ``(a+bj)``."""
        lines = [f"# n_qubits {self.n_qubits}"]
        for (x, z), c in sorted(self._terms.items()):
            val = repr(c.real) if c.imag == 0 else repr(c)
            lines.append(f"{val} {PauliTerm(x, z).word()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "QubitOperator":
        acc: dict[tuple[int, int], complex] = {}
        nq = n_qubits
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*n_qubits\s+(\d+)", line)
                if m and nq is None:
                    nq = int(m.group(1))
                continue
            val, _, word = line.partition(" ")
            x, z = parse_word(word)
            acc[(x, z)] = acc.get((x, z), 0.0) + complex(val)
        if nq is None:
            nq = max(((x | z).bit_length() for x, z in acc), default=0)
        return cls(nq, acc)


def square_shifted(h: QubitOperator, omega: float) -> QubitOperator:
    """Pauli expansion of (H - omega)^2; imaginary residues of the product are dropped."""
    shifted = h - omega
    sq = shifted * shifted
    if not sq.is_hermitian(1e-9):
        raise ValueError("square of a non-Hermitian operator")
    return sq.real()
