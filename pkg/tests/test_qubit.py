from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_path
from mcpqe.chem.fcidump import read_fcidump
from mcpqe.chem.fermion import FermionOperator
from mcpqe.engine.system import build_system
from mcpqe.qubit.grouping import (full_selection, group_qubitwise, sample_groups,
                                  selection_probabilities)
from mcpqe.qubit.jordan_wigner import jordan_wigner, ladder
from mcpqe.qubit.pauli import (PauliTerm, QubitOperator, multiply, parse_word, product_phase,
                               square_shifted)

N = 3
masks = st.integers(0, (1 << N) - 1)
paulis = st.builds(PauliTerm, masks, masks, st.just(1.0))

_SINGLE = {
    (0, 0): np.eye(2),
    (1, 0): np.array([[0, 1], [1, 0]]),
    (1, 1): np.array([[0, -1j], [1j, 0]]),
    (0, 1): np.diag([1, -1]),
}


def kron_dense(p: PauliTerm, n: int = N) -> np.ndarray:
    """Dense matrix with qubit q as bit q of the basis index (qubit 0 rightmost factor)."""
    m = np.eye(1)
    for q in reversed(range(n)):
        m = np.kron(m, _SINGLE[(p.x >> q & 1, p.z >> q & 1)])
    return p.coefficient * m


def dense(p: PauliTerm, n: int = N) -> np.ndarray:
    return QubitOperator.from_terms(n, [p]).to_dense()


@given(paulis)
def test_dense_matches_kronecker_product(p):
    assert np.allclose(dense(p), kron_dense(p))


@given(paulis, paulis)
def test_multiply_matches_matrices(a, b):
    c = multiply(a, b)
    assert np.allclose(dense(c), dense(a) @ dense(b))
    assert product_phase(a.x, a.z, b.x, b.z) in range(4)


@given(paulis, paulis)
def test_commutes_matches_matrices(a, b):
    ma, mb = dense(a), dense(b)
    assert a.commutes(b) == np.allclose(ma @ mb, mb @ ma)
    if a.qubitwise_commutes(b):
        assert a.commutes(b)


@given(paulis)
def test_word_roundtrip(p):
    assert parse_word(p.word()) == (p.x, p.z)


def test_parse_word_errors():
    assert parse_word("X0 Y2 Z3") == (0b0101, 0b1100)
    with pytest.raises(ValueError):
        parse_word("X0 Z0")
    with pytest.raises(ValueError):
        parse_word("Q1")


ops = st.dictionaries(st.tuples(masks, masks),
                      st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                      max_size=6)


@given(ops, ops)
@settings(max_examples=50)
def test_operator_algebra_matches_dense(t1, t2):
    a, b = QubitOperator(N, t1), QubitOperator(N, t2)
    assert np.allclose((a * b).to_dense(), a.to_dense() @ b.to_dense())
    assert np.allclose((a + b).to_dense(), a.to_dense() + b.to_dense())
    assert np.allclose(a.adjoint().to_dense(), a.to_dense().conj().T)
    psi = np.arange(1 << N) + 1j
    assert np.allclose(a.apply(psi), a.to_dense() @ psi)
    assert np.allclose(a.to_sparse().toarray(), a.to_dense())


@given(ops)
def test_text_roundtrip(t):
    a = QubitOperator(N, t)
    b = QubitOperator.from_text(a.to_text())
    assert b.n_qubits == N
    for k, c in a.terms.items():
        assert b.terms[k] == pytest.approx(c)


def test_operator_rejects_out_of_range_terms():
    with pytest.raises(ValueError):
        QubitOperator(2, {(0b100, 0): 1.0})


def test_square_shifted_dense():
    h = QubitOperator.from_text("0.5 Z0\n0.3 X0 X1\n-0.2 Y0 Y1\n1.1 I", n_qubits=2)
    sq = square_shifted(h, 0.7)
    m = h.to_dense() - 0.7 * np.eye(4)
    assert np.allclose(sq.to_dense(), m @ m)


def test_ladder_anticommutation():
    n = 3
    for p in range(n):
        for q in range(n):
            ap = QubitOperator(n, ladder(p, False).terms)
            aq_dag = QubitOperator(n, ladder(q, True).terms)
            anti = (ap * aq_dag + aq_dag * ap).to_dense()
            assert np.allclose(anti, np.eye(1 << n) * (p == q))
            aq = QubitOperator(n, ladder(q, False).terms)
            assert np.allclose((ap * aq + aq * ap).to_dense(), 0)


def test_jw_determinant_convention():
    # a+_0 a+_2 |vac> is basis index 0b101 with amplitude +1
    n = 3
    vac = np.zeros(1 << n)
    vac[0] = 1
    op = QubitOperator(n, ladder(0, True).terms) * QubitOperator(n, ladder(2, True).terms)
    out = op.apply(vac)
    assert out[0b101] == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(out) > 1e-12) == 1


def test_jw_number_operator_is_diagonal():
    f = FermionOperator()
    for p in range(4):
        f.add(1.0, (p,), (p,))
    q = jordan_wigner(f, 4)
    d = q.to_dense()
    assert np.allclose(d, np.diag([bin(b).count("1") for b in range(16)]))
    with pytest.raises(ValueError):
        jordan_wigner(f, 3)


def test_grouping_partition_properties(systems):
    s = systems("h4/r1.50")
    groups = group_qubitwise(s.hamiltonian)
    assert groups[0].is_diagonal and all(not g.is_diagonal for g in groups[1:])
    seen = [(t.x, t.z) for g in groups for t in g.members]
    assert sorted(seen) == sorted(s.hamiltonian.terms)
    for g in groups:
        for a in g.members:
            assert all(a.qubitwise_commutes(b) for b in g.members)
            # shared basis reproduces every member's letters on its support
            assert a.x == g.basis_x & a.support and a.z == g.basis_z & a.support
    weights = [g.weight for g in groups[1:]]
    assert weights == sorted(weights, reverse=True)


@pytest.mark.parametrize("name, frozen, count", [
    ("h3p/r2.00", 0, 25), ("h4/r1.50", 0, 101), ("lih/r1.600", 1, 125), ("hf/r0.917", 1, 125),
    ("h2o/r0.958", 1, 313), ("beh2/x2.5", 1, 313),
])
def test_group_census(systems, name, frozen, count):
    assert len(systems(name, frozen).groups) == count


def test_first_fit_packs_tighter(systems):
    h = systems("h3p/r2.00").hamiltonian
    ff = group_qubitwise(h, "first_fit")
    assert len(ff) < 25
    assert sum(len(g) for g in ff) == len(h)
    with pytest.raises(ValueError):
        group_qubitwise(h, "nope")


def test_selection_probabilities(systems):
    groups = systems("h3p/r2.00").groups
    p = selection_probabilities(groups, "g0")
    assert p[0] == 0 and p.sum() == pytest.approx(1)
    assert selection_probabilities(groups, "plain").sum() == pytest.approx(1)
    with pytest.raises(ValueError):
        selection_probabilities(groups, "x")


@lru_cache(maxsize=None)
def h3p_groups():
    return build_system(read_fcidump(fixture_path("h3p/r2.00"))).groups


@given(st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_sample_groups_weights(n_hamil, seed):
    groups = h3p_groups()
    p = selection_probabilities(groups)
    sel = sample_groups(groups, n_hamil, np.random.default_rng(seed))
    assert sel.indices[0] == 0 and sel.weights[0] == 1.0
    # weights m_k / (n p_k) imply sum_k w_k p_k = 1 over the drawn off-diagonal groups
    total = sum(w * p[k] for k, w in list(sel)[1:])
    assert total == pytest.approx(1.0)


def test_sample_groups_errors_and_full(systems):
    groups = systems("h2/r0.7414").groups
    with pytest.raises(ValueError):
        sample_groups(groups, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_groups([], 1, np.random.default_rng(0))
    full = full_selection(groups)
    assert full.indices == tuple(range(len(groups))) and set(full.weights) == {1.0}


def test_sampled_weights_average_to_one():
    """E[w_k] = 1 for every group, so the weighted group sum is unbiased."""
    groups = h3p_groups()
    rng = np.random.default_rng(3)
    n_draws, n_hamil = 20000, 3
    acc = np.zeros(len(groups))
    for _ in range(n_draws):
        for k, w in sample_groups(groups, n_hamil, rng):
            acc[k] += w
    mean = acc / n_draws
    p = selection_probabilities(groups)
    # Var(w_k) = (1 - p_k) / (n p_k) for a multinomial count
    se = np.sqrt((1 - p[1:]) / (n_hamil * p[1:]) / n_draws)
    assert mean[0] == 1.0
    assert np.all(np.abs(mean[1:] - 1) < 5 * se)
