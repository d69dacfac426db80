"""Disentangled UCCSD ansatz over spin orbitals and stochastic wavefunction rounding.

Each excitation operator kappa_i = tau_i - tau_i^dagger is signed so that
``kappa_i |phi_0> = +|phi_i>``; then ``exp(theta kappa_i)|phi_0> =
cos(theta)|phi_0> + sin(theta)|phi_i>``. Under Jordan-Wigner,
``kappa_i = i sum_m c_m P_m`` with real c_m and mutually commuting P_m, so
``exp(theta kappa_i)`` is a product of gadgets with angles ``-2 theta c_m``.
Excitations are applied in ansatz order: the first acts on the reference first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .chem.fermion import FermionOperator
from .qubit.jordan_wigner import jordan_wigner
from .qubit.pauli import PauliTerm, QubitOperator
from .statevector import Gadget


@dataclass(frozen=True)
class Excitation:
    occupied_from: tuple[int, ...]
    virtual_to: tuple[int, ...]
    amplitude: float = 0.0
    denominator: float = 0.0
    # kappa = i * sum(c_m P_m), stored as PauliTerm(x, z, c_m)
    pauli_expansion: tuple[PauliTerm, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if len(self.occupied_from) != len(self.virtual_to):
            raise ValueError("excitation must conserve particle number")
        if sorted(p % 2 for p in self.occupied_from) != sorted(p % 2 for p in self.virtual_to):
            raise ValueError("excitation must conserve S_z")

    @property
    def rank(self) -> int:
        return len(self.occupied_from)

    @property
    def flip_mask(self) -> int:
        return sum(1 << p for p in self.occupied_from + self.virtual_to)

    @property
    def label(self) -> str:
        return ",".join(map(str, self.occupied_from)) + "->" + ",".join(map(str, self.virtual_to))


def excitation_generator(occupied_from: Sequence[int], virtual_to: Sequence[int], reference: int,
                         n_qubits: int) -> tuple[PauliTerm, ...]:
    """Pauli expansion (c_m, P_m) of kappa = tau - tau^dagger, signed so kappa|ref> = +|target>."""
    tau = FermionOperator()
    tau.add(1.0, tuple(virtual_to), tuple(occupied_from))
    t = jordan_wigner(tau, n_qubits)
    kappa = t - t.adjoint()
    target = reference ^ sum(1 << p for p in tuple(occupied_from) + tuple(virtual_to))
    ref = np.zeros(1 << n_qubits)
    ref[reference] = 1.0
    sign = kappa.apply(ref)[target].real
    if abs(abs(sign) - 1.0) > 1e-12:
        raise ValueError(f"{occupied_from}->{virtual_to} does not act on the reference")
    terms = []
    for (x, z), c in sorted(kappa.terms.items()):
        cm = (c / 1j) * np.sign(sign)
        if abs(cm.imag) > 1e-12:
            raise ValueError("excitation generator is not anti-Hermitian")
        terms.append(PauliTerm(x, z, float(cm.real)))
    return tuple(terms)


@dataclass(frozen=True)
class AnsatzState:
    reference: int
    n_qubits: int
    excitations: tuple[Excitation, ...]

    def __len__(self):
        return len(self.excitations)

    @property
    def n_param(self) -> int:
        return len(self.excitations)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([e.amplitude for e in self.excitations], dtype=float)

    @property
    def denominators(self) -> np.ndarray:
        return np.array([e.denominator for e in self.excitations], dtype=float)

    @property
    def targets(self) -> list[int]:
        return [self.reference ^ e.flip_mask for e in self.excitations]

    def with_amplitudes(self, theta: Iterable[float]) -> "AnsatzState":
        theta = list(theta)
        if len(theta) != len(self.excitations):
            raise ValueError(f"need {len(self.excitations)} amplitudes, got {len(theta)}")
        exc = tuple(replace(e, amplitude=float(t)) for e, t in zip(self.excitations, theta))
        return replace(self, excitations=exc)

    def subset(self, keep: Iterable[int]) -> "AnsatzState":
        keep = set(keep)
        return replace(self, excitations=tuple(e for k, e in enumerate(self.excitations) if k in keep))

    def dump(self) -> str:
        """One ``label theta delta`` line per excitation, plus reference and register size."""
        lines = [f"# reference {self.reference} n_qubits {self.n_qubits}"]
        lines += [f"{e.label} {e.amplitude!r} {e.denominator!r}" for e in self.excitations]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "AnsatzState":
        head, *rows = [ln for ln in text.splitlines() if ln.strip()]
        parts = head.split()
        reference, n_qubits = int(parts[2]), int(parts[4])
        exc = []
        for row in rows:
            label, theta, delta = row.split()
            occ, virt = (tuple(int(v) for v in s.split(",")) for s in label.split("->"))
            exc.append(Excitation(occ, virt, float(theta), float(delta),
                                  excitation_generator(occ, virt, reference, n_qubits)))
        return cls(reference, n_qubits, tuple(exc))


def enumerate_uccsd(n_spin_orbitals: int, reference: int,
                    spin_orbital_energies: Sequence[float] | None = None) -> AnsatzState:
    """All S_z-conserving singles then doubles out of ``reference``, lexicographic.

    Denominators are sum(eps_occ) - sum(eps_virt) when orbital energies are given.
    """
    if reference == 0:
        raise ValueError("reference determinant is empty")
    n = n_spin_orbitals
    occ = [p for p in range(n) if reference >> p & 1]
    virt = [p for p in range(n) if not reference >> p & 1]
    eps = None if spin_orbital_energies is None else np.asarray(spin_orbital_energies, dtype=float)

    def make(frm, to):
        delta = 0.0 if eps is None else float(eps[list(frm)].sum() - eps[list(to)].sum())
        return Excitation(frm, to, 0.0, delta, excitation_generator(frm, to, reference, n))

    singles = [make((i,), (a,)) for i in occ for a in virt if (i - a) % 2 == 0]
    doubles = [make(ij, ab) for ij in combinations(occ, 2) for ab in combinations(virt, 2)
               if sorted(p % 2 for p in ij) == sorted(p % 2 for p in ab)]
    return AnsatzState(reference, n, tuple(singles + doubles))


def screen_connected(a: AnsatzState, connected: set[int]) -> AnsatzState:
    """Keep excitations whose target determinant lies in ``connected``."""
    return a.subset(k for k, t in enumerate(a.targets) if t in connected)


def build_circuit(a: AnsatzState, skip_zero: bool = False) -> list[Gadget]:
    """Gadget list of U(theta) = prod_i exp(theta_i kappa_i), first excitation first."""
    gadgets = []
    for e in a.excitations:
        if skip_zero and e.amplitude == 0.0:
            continue
        for p in e.pauli_expansion:
            gadgets.append(Gadget(PauliTerm(p.x, p.z), -2.0 * e.amplitude * p.coefficient))
    return gadgets


def stochastic_round(a: AnsatzState, rng: np.random.Generator,
                     inclusive: bool = False) -> AnsatzState:
    """Randomly truncate small amplitudes; the input state is left untouched.

    Excitations are ranked by decreasing |theta| (ties keep ansatz order). One
    p ~ U[0, 1) is drawn; excitation k of the ranking survives iff the
    fraction of total |theta| strictly before it is <= p (``inclusive``: the
    fraction up to and including it). The reference is never touched.
    """
    theta = a.amplitudes
    total = np.abs(theta).sum()
    if total == 0.0:
        return a
    order = np.argsort(-np.abs(theta), kind="stable")
    cum = np.cumsum(np.abs(theta[order])) / total
    bound = cum if inclusive else np.concatenate([[0.0], cum[:-1]])
    p = rng.random()
    keep_sorted = bound <= p
    new = np.zeros_like(theta)
    kept = order[keep_sorted]
    new[kept] = theta[kept]
    return a.with_amplitudes(new)


def generator_operator(a: AnsatzState, k: int) -> QubitOperator:
    """kappa_k as a QubitOperator (anti-Hermitian)."""
    return QubitOperator(a.n_qubits, {(p.x, p.z): 1j * p.coefficient
                                      for p in a.excitations[k].pauli_expansion})
