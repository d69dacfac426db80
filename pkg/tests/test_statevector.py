import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.linalg import expm

from mcpqe.qubit.grouping import group_qubitwise
from mcpqe.qubit.pauli import PauliTerm, QubitOperator
from mcpqe.statevector import (Gadget, Gate, NoiseModel, Statevector, apply_gates,
                               apply_pauli_gadget, basis_label, circuit_two_qubit_count, gadget_gates,
                               gadget_two_qubit_count, hadamard_gates, hadamard_test,
                               measure_register, prepare_reference, run_circuit)

N = 3
masks = st.integers(0, (1 << N) - 1)
angles = st.floats(-np.pi, np.pi, allow_nan=False)


def random_state(seed: int, n: int = N) -> Statevector:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return Statevector(n, v / np.linalg.norm(v))


@given(masks, masks, angles, st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_gadget_equals_matrix_exponential(x, z, theta, seed):
    assume(x | z)
    p = PauliTerm(x, z)
    s = random_state(seed)
    dense = QubitOperator.from_terms(N, [p]).to_dense()
    want = expm(-0.5j * theta * dense) @ s.amplitudes
    for method in ("fast", "circuit"):
        got = apply_pauli_gadget(s, p, theta, method=method).amplitudes
        assert np.allclose(got, want)


def test_gadget_errors():
    s = random_state(0)
    with pytest.raises(ValueError, match="nontrivial"):
        apply_pauli_gadget(s, PauliTerm(0, 0), 0.1)
    with pytest.raises(ValueError, match="control"):
        apply_pauli_gadget(s, PauliTerm(0b1, 0), 0.1, control=0)
    with pytest.raises(ValueError, match="method"):
        apply_pauli_gadget(s, PauliTerm(0b1, 0), 0.1, method="x")


@given(masks, masks, angles, st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_controlled_gadget_methods_agree(x, z, theta, seed):
    assume(x | z)
    s = random_state(seed, N + 1)
    p = PauliTerm(x, z)
    a = apply_pauli_gadget(s, p, theta, control=N, method="fast").amplitudes
    b = apply_pauli_gadget(s, p, theta, control=N, method="circuit").amplitudes
    assert np.allclose(a, b)
    # control off: untouched
    off = (np.arange(1 << (N + 1)) >> N & 1) == 0
    assert np.allclose(a[off], s.amplitudes[off])


def test_gadget_two_qubit_counts():
    p = PauliTerm(0b0111, 0b0100)  # X0 X1 Y2
    gates = gadget_gates(p, 0.3)
    assert sum(g.is_two_qubit for g in gates) == gadget_two_qubit_count(p) == 4
    assert gadget_two_qubit_count(PauliTerm(0b1, 0)) == 0
    g = [Gadget(p, 0.1), Gadget(PauliTerm(0, 0b11), 0.2)]
    assert circuit_two_qubit_count(g) == 6


def test_statevector_validation_and_labels():
    with pytest.raises(ValueError, match="norm"):
        Statevector(1, [1.0, 1.0])
    with pytest.raises(ValueError, match="amplitudes"):
        Statevector(2, [1.0, 0.0])
    assert basis_label(0b0011, 4) == "|1100>"
    s = prepare_reference(0b0101, 4)
    assert s.amplitudes[5] == 1 and "|1010>" in s.to_text()
    with pytest.raises(ValueError):
        prepare_reference(0b10000, 4)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel("shots", n_shots=10)
    with pytest.raises(ValueError):
        NoiseModel("nope")
    with pytest.raises(ValueError):
        NoiseModel.gaussian(-1.0, np.random.default_rng(0))


def _ansatz_circuit():
    # a small 4-qubit two-electron circuit in the reference sector 0b0011
    return [Gadget(PauliTerm(0b0101, 0b0001), 0.37), Gadget(PauliTerm(0b1111, 0b0001), -0.21)]


@pytest.mark.parametrize("target", [0b0011, 0b0110, 0b1001, 0b1100])
@pytest.mark.parametrize("method", ["circuit", "fast"])
def test_hadamard_test_exact_overlap_and_observable(target, method):
    gadgets = _ansatz_circuit()
    psi = run_circuit(gadgets, 0b0011, 4).amplitudes
    val = hadamard_test(gadgets, 0b0011, target, n_qubits=4, imaginary=True, method=method)
    assert val == pytest.approx(psi[target], abs=1e-12)
    h = QubitOperator.from_text("0.4 Z0 Z1\n0.2 Z2\n-0.3 I", n_qubits=4)
    group = group_qubitwise(h)[0]
    val = hadamard_test(gadgets, 0b0011, target, observable=group, n_qubits=4, method=method)
    assert val.real == pytest.approx((h.apply(psi))[target].real, abs=1e-12)


def test_hadamard_test_offdiagonal_group():
    gadgets = _ansatz_circuit()
    psi = run_circuit(gadgets, 0b0011, 4).amplitudes
    h = QubitOperator.from_text("0.5 X0 X2\n0.25 Y0 Y2\n0.1 X0 Z1 X2", n_qubits=4)
    for group in group_qubitwise(h):
        op = group.operator(4)
        for target in (0b0011, 0b0110):
            val = hadamard_test(gadgets, 0b0011, target, observable=group, n_qubits=4)
            assert val.real == pytest.approx(op.apply(psi)[target].real, abs=1e-12)


def test_hadamard_shots_converge_and_are_unbiased():
    gadgets = _ansatz_circuit()
    psi = run_circuit(gadgets, 0b0011, 4).amplitudes
    rng = np.random.default_rng(1)
    vals = [hadamard_test(gadgets, 0b0011, 0b0110, noise=NoiseModel.shots(200, rng),
                          n_qubits=4, method="fast").real for _ in range(400)]
    se = np.std(vals) / np.sqrt(len(vals))
    assert abs(np.mean(vals) - psi[0b0110].real) < 5 * se
    # single-outcome variance bound: (1 - s^2) / n_shots
    assert np.var(vals) == pytest.approx((1 - psi[0b0110].real ** 2) / 200, rel=0.25)


def test_hadamard_gaussian_noise():
    gadgets = _ansatz_circuit()
    rng = np.random.default_rng(2)
    vals = [hadamard_test(gadgets, 0b0011, 0b0011, noise=NoiseModel.gaussian(0.1, rng),
                          n_qubits=4, method="fast").real for _ in range(2000)]
    assert np.std(vals) == pytest.approx(0.1, rel=0.1)


def test_hadamard_rejects_other_sector():
    with pytest.raises(ValueError, match="sector"):
        hadamard_test([], 0b0011, 0b0111, n_qubits=4)
    with pytest.raises(ValueError, match="sector"):
        hadamard_test([], 0b0011, 0b0101, n_qubits=4)  # two alpha electrons


def test_hadamard_gate_list_structure():
    gates = hadamard_gates(_ansatz_circuit(), 0b0011, 0b0110, 4)
    assert gates[0].name == "x" and gates[-1] == ("h", (4,), 0.0)
    assert any(g.name == "crz" for g in gates)


def test_apply_gates_unknown_gate():
    with pytest.raises(ValueError):
        apply_gates(np.ones(2, dtype=complex) / np.sqrt(2), 1, [Gate("bogus", (0,))])


def test_measure_register_distribution():
    amp = np.array([np.sqrt(0.7), 0, 0, np.sqrt(0.3)])
    s = Statevector(2, amp)
    draws = measure_register(s, np.random.default_rng(0), size=20000)
    assert set(np.unique(draws)) <= {0, 3}
    assert np.mean(draws == 3) == pytest.approx(0.3, abs=0.02)
    assert measure_register(s, np.random.default_rng(0)) in (0, 3)


def test_expectation():
    s = random_state(5)
    op = QubitOperator.from_text("0.5 Z0\n0.3 X1 Y2", n_qubits=3)
    assert s.expectation(op) == pytest.approx(np.vdot(s.amplitudes, op.to_dense() @ s.amplitudes))
