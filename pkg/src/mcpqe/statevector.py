"""Dense statevector simulation: Pauli gadgets, the one-ancilla Hadamard test, measurement.

Conventions used throughout the package:

* qubit q is bit q of the basis index; labels print qubit 0 leftmost, so
  the index 0b0011 on four qubits is ``|1100>``;
* a gadget with angle theta applies ``exp(-i theta/2 P)`` (no extra global phase);
* the Hadamard-test ancilla is qubit ``n`` (the highest bit) of an
  ``n + 1`` qubit register.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .qubit.grouping import CommutingGroup
from .qubit.pauli import PauliTerm, parity_array, popcount

NORM_TOL = 1e-10
_I_POW = np.array([1.0, 1j, -1.0, -1j])


def basis_label(index: int, n_qubits: int) -> str:
    return "|" + "".join(str(index >> q & 1) for q in range(n_qubits)) + ">"


@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"need {1 << self.n_qubits} amplitudes, got {self.amplitudes.shape}")
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm} differs from 1")

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def expectation(self, op) -> complex:
        return complex(np.vdot(self.amplitudes, op.apply(self.amplitudes)))

    def to_text(self, tol: float = 1e-12) -> str:
        """Nonzero amplitudes, one ``label re im`` line each (debugging aid)."""
        lines = []
        for b in np.nonzero(np.abs(self.amplitudes) > tol)[0]:
            a = self.amplitudes[b]
            lines.append(f"{basis_label(int(b), self.n_qubits)} {a.real:.15g} {a.imag:.15g}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class NoiseModel:
    """How expectation values are estimated: ``exact``, ``shots`` or ``gaussian``."""

    mode: str = "exact"
    n_shots: int = 0
    sigma: float = 0.0
    rng: np.random.Generator | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("exact", "shots", "gaussian"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.mode == "shots" and self.n_shots < 1:
            raise ValueError("shot mode needs n_shots >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.mode != "exact" and self.rng is None:
            raise ValueError(f"{self.mode} mode needs an rng")

    @classmethod
    def shots(cls, n_shots: int, rng: np.random.Generator) -> "NoiseModel":
        return cls("shots", n_shots=n_shots, rng=rng)

    @classmethod
    def gaussian(cls, sigma: float, rng: np.random.Generator) -> "NoiseModel":
        return cls("gaussian", sigma=sigma, rng=rng)


class Gadget(NamedTuple):
    """``exp(-i angle/2 pauli)``; the Pauli string carries unit coefficient."""

    pauli: PauliTerm
    angle: float


class Gate(NamedTuple):
    name: str  # h, x, sdg, rx, rz, cx, crz
    qubits: tuple[int, ...]
    angle: float = 0.0

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2


def prepare_reference(occupied: int, n_qubits: int) -> Statevector:
    if occupied >> n_qubits:
        raise ValueError("occupied mask does not fit in the register")
    amp = np.zeros(1 << n_qubits, dtype=complex)
    amp[occupied] = 1.0
    return Statevector(n_qubits, amp)


# ---------------------------------------------------------------- array kernels

@lru_cache(maxsize=None)
def _pair_indices(n: int, q: int, control: int | None) -> tuple[np.ndarray, np.ndarray]:
    """Indices with bit q clear (and control set, if given), and their bit-q partners."""
    b = np.arange(1 << n)
    sel = (b >> q & 1) == 0
    if control is not None:
        sel &= (b >> control & 1) == 1
    i0 = b[sel]
    return i0, i0 | (1 << q)


@lru_cache(maxsize=None)
def _parity(n: int) -> np.ndarray:
    return parity_array(n)


def _apply_1q(psi: np.ndarray, n: int, q: int, u: np.ndarray, control: int | None = None):
    i0, i1 = _pair_indices(n, q, control)
    a0, a1 = psi[i0], psi[i1]
    psi[i0] = u[0, 0] * a0 + u[0, 1] * a1
    psi[i1] = u[1, 0] * a0 + u[1, 1] * a1


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)


def _rx(a: float) -> np.ndarray:
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def apply_gates(psi: np.ndarray, n: int, gates: Sequence[Gate]) -> np.ndarray:
    """Apply a gate list in place to a raw amplitude array and return it."""
    for g in gates:
        if g.name == "h":
            _apply_1q(psi, n, g.qubits[0], _H)
        elif g.name == "x":
            _apply_1q(psi, n, g.qubits[0], _X)
        elif g.name == "sdg":
            _apply_1q(psi, n, g.qubits[0], _SDG)
        elif g.name == "rx":
            _apply_1q(psi, n, g.qubits[0], _rx(g.angle))
        elif g.name == "rz":
            _apply_1q(psi, n, g.qubits[0], _rz(g.angle))
        elif g.name == "cx":
            _apply_1q(psi, n, g.qubits[1], _X, control=g.qubits[0])
        elif g.name == "crz":
            _apply_1q(psi, n, g.qubits[1], _rz(g.angle), control=g.qubits[0])
        else:
            raise ValueError(f"unknown gate {g.name!r}")
    return psi


def pauli_apply(psi: np.ndarray, n: int, x: int, z: int) -> np.ndarray:
    """P|psi> for the Hermitian string (x, z), without coefficient."""
    b = np.arange(1 << n)
    src = b ^ x
    sign = 1 - 2 * _parity(n)[src & z].astype(float)
    return _I_POW[popcount(x & z) % 4] * sign * psi[src]


# ---------------------------------------------------------------- gadgets

def gadget_gates(p: PauliTerm, theta: float, control: int | None = None) -> list[Gate]:
    """Basis change, CNOT ladder and Rz(theta) decomposition of exp(-i theta/2 P).

    Y is rotated with Rx(pi/2) before the ladder and Rx(-pi/2) after, which
    maps Z to Y exactly (no stray global phase).
    """
    qs = [q for q in range(p.support.bit_length()) if p.support >> q & 1]
    if not qs:
        raise ValueError("gadget needs a nontrivial Pauli string")
    if control is not None and p.support >> control & 1:
        raise ValueError(f"control qubit {control} lies inside the gadget support")
    pre, post = [], []
    for q in qs:
        letter = p.letter(q)
        if letter == "X":
            pre.append(Gate("h", (q,)))
            post.append(Gate("h", (q,)))
        elif letter == "Y":
            pre.append(Gate("rx", (q,), np.pi / 2))
            post.append(Gate("rx", (q,), -np.pi / 2))
    ladder = [Gate("cx", (a, b)) for a, b in zip(qs, qs[1:])]
    rot = Gate("rz", (qs[-1],), theta) if control is None else Gate("crz", (control, qs[-1]), theta)
    return pre + ladder + [rot] + ladder[::-1] + post


def gadget_two_qubit_count(p: PauliTerm, controlled: bool = False) -> int:
    return 2 * (p.weight - 1) + int(controlled)


def apply_pauli_gadget(s: Statevector, p: PauliTerm, theta: float, control: int | None = None,
                       method: str = "fast") -> Statevector:
    """exp(-i theta/2 P) on ``s``, optionally controlled on |1> of ``control``."""
    if p.support == 0:
        raise ValueError("gadget needs a nontrivial Pauli string")
    if control is not None and p.support >> control & 1:
        raise ValueError(f"control qubit {control} lies inside the gadget support")
    psi = s.amplitudes.copy()
    if method == "circuit":
        apply_gates(psi, s.n_qubits, gadget_gates(p, theta, control))
    elif method == "fast":
        rot = np.cos(theta / 2) * psi - 1j * np.sin(theta / 2) * pauli_apply(psi, s.n_qubits, p.x, p.z)
        if control is None:
            psi = rot
        else:
            on = (np.arange(psi.size) >> control & 1) == 1
            psi[on] = rot[on]
    else:
        raise ValueError(f"unknown method {method!r}")
    return Statevector(s.n_qubits, psi)


def run_circuit(gadgets: Sequence[Gadget], reference: int, n_qubits: int,
                method: str = "fast") -> Statevector:
    s = prepare_reference(reference, n_qubits)
    for g in gadgets:
        s = apply_pauli_gadget(s, g.pauli, g.angle, method=method)
    return s


def circuit_two_qubit_count(gadgets: Sequence[Gadget], controlled: bool = False) -> int:
    return sum(gadget_two_qubit_count(g.pauli, controlled) for g in gadgets)


# ---------------------------------------------------------------- Hadamard test

def _same_sector(a: int, b: int) -> bool:
    even = int("01" * 64, 2)  # alpha (even) positions
    return popcount(a) == popcount(b) and popcount(a & even) == popcount(b & even)


def hadamard_gates(gadgets: Sequence[Gadget], reference: int, target: int, n: int,
                   imaginary: bool = False) -> list[Gate]:
    """Full (n+1)-qubit circuit: reference prep, H, controlled U, anti-controlled X-string, H."""
    anc = n
    gates = [Gate("x", (q,)) for q in range(n) if reference >> q & 1]
    gates.append(Gate("h", (anc,)))
    for g in gadgets:
        gates += gadget_gates(g.pauli, g.angle, control=anc)
    diff = reference ^ target
    if diff:
        gates.append(Gate("x", (anc,)))
        gates += [Gate("cx", (anc, q)) for q in range(n) if diff >> q & 1]
        gates.append(Gate("x", (anc,)))
    if imaginary:
        gates.append(Gate("sdg", (anc,)))
    gates.append(Gate("h", (anc,)))
    return gates


def measurement_basis_gates(group: CommutingGroup | None, n: int) -> list[Gate]:
    """Rotate each measured qubit so a Z readout gives the group's letter there."""
    if group is None:
        return []
    gates = []
    for q in range(n):
        if group.basis_x >> q & 1:
            if group.basis_z >> q & 1:
                gates.append(Gate("sdg", (q,)))
            gates.append(Gate("h", (q,)))
    return gates


def outcome_values(group: CommutingGroup | None, n: int) -> np.ndarray:
    """O(b) = sum_k h_k (-1)^{|b & (supp_k + ancilla)|} over (n+1)-bit outcomes b."""
    par = _parity(n + 1)
    b = np.arange(1 << (n + 1))
    anc = 1 << n
    if group is None:
        return (1 - 2 * par[b & anc]).astype(complex)
    vals = np.zeros(b.size, dtype=complex)
    for t in group.members:
        vals += t.coefficient * (1 - 2 * par[b & (t.support | anc)])
    return vals


def hadamard_state(psi: Statevector, target: int, imaginary: bool = False) -> np.ndarray:
    """Closed form of the pre-measurement register: 1/2 [|0>(phi_i + c Psi) + |1>(phi_i - c Psi)]."""
    n = psi.n_qubits
    c = -1j if imaginary else 1.0
    phi = np.zeros(1 << n, dtype=complex)
    phi[target] = 1.0
    return 0.5 * np.concatenate([phi + c * psi.amplitudes, phi - c * psi.amplitudes])


def _estimate(state: np.ndarray, n: int, group: CommutingGroup | None, noise: NoiseModel) -> float:
    apply_gates(state, n + 1, measurement_basis_gates(group, n))
    probs = np.abs(state) ** 2
    probs /= probs.sum()
    vals = outcome_values(group, n)
    exact = float(np.real(probs @ vals))
    if noise.mode == "exact":
        return exact
    if noise.mode == "gaussian":
        scale = 1.0 if group is None else group.l2_norm()
        return exact + noise.rng.normal(0.0, noise.sigma * scale)
    counts = noise.rng.multinomial(noise.n_shots, probs)
    return float(np.real(counts @ vals)) / noise.n_shots


def hadamard_test(psi_circuit: Sequence[Gadget], reference: int, target_det: int,
                  observable: CommutingGroup | None = None, noise: NoiseModel = NoiseModel(),
                  n_qubits: int | None = None, imaginary: bool = False,
                  method: str = "circuit") -> complex:
    """Estimate <phi_target| P |U phi_ref> (P = group sum, or identity for the overlap).

    The real part comes from the ancilla Z readout; with ``imaginary`` the
    ancilla is read in the Y basis (S-dagger before the final H) and the
    imaginary part is estimated as well. ``method="fast"`` builds the same
    pre-measurement state in closed form instead of gate by gate.
    """
    n = n_qubits if n_qubits is not None else max(
        [reference.bit_length(), target_det.bit_length()]
        + [g.pauli.support.bit_length() for g in psi_circuit])
    if not _same_sector(reference, target_det):
        raise ValueError("target determinant is in a different particle/S_z sector")
    parts = [False, True] if imaginary else [False]
    out = []
    for im in parts:
        if method == "circuit":
            state = np.zeros(1 << (n + 1), dtype=complex)
            state[0] = 1.0
            apply_gates(state, n + 1, hadamard_gates(psi_circuit, reference, target_det, n, im))
        elif method == "fast":
            state = hadamard_state(run_circuit(psi_circuit, reference, n), target_det, im)
        else:
            raise ValueError(f"unknown method {method!r}")
        out.append(_estimate(state, n, observable, noise))
    return complex(out[0], out[1] if imaginary else 0.0)


def measure_register(s: Statevector, rng: np.random.Generator, size: int | None = None):
    """Born-rule sample(s) of the computational basis index."""
    draw = rng.choice(s.amplitudes.size, size=size, p=s.probabilities())
    return int(draw) if size is None else draw
