import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qkw import qsim
from qkw.qsim import (PAULI, LocalOperator, PatternControlled, RegisterLayout, SparseState, apply,
                      controlled, kron, outer_evolve, partial_trace, pauli_exp, pauli_string)

LAYOUT = RegisterLayout((("a", 1), ("b", 2)))


def dense(state: SparseState) -> np.ndarray:
    v = np.zeros(1 << state.layout.width, dtype=complex)
    for k, amp in state:
        v[k] = amp
    return v


def random_state(rng, layout=LAYOUT) -> SparseState:
    v = rng.normal(size=1 << layout.width) + 1j * rng.normal(size=1 << layout.width)
    v /= np.linalg.norm(v)
    return SparseState(layout, dict(enumerate(v)))


def embed(matrix, targets, width):
    """Dense operator on ``width`` qubits built column by column."""
    dim = 1 << width
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (width - 1 - q)) & 1 for q in range(width)]
        sub = 0
        for t in targets:
            sub = (sub << 1) | bits[t]
        for r in range(matrix.shape[0]):
            new = list(bits)
            for k, t in enumerate(targets):
                new[t] = (r >> (len(targets) - 1 - k)) & 1
            row = int("".join(map(str, new)), 2)
            out[row, col] += matrix[r, sub]
    return out


def test_layout_read_write_roundtrip():
    label = LAYOUT.compose(a=1, b=2)
    assert LAYOUT.format(label) == "110"
    assert LAYOUT.read(label, "b") == 2
    assert LAYOUT.read(LAYOUT.write(label, "b", 1), "b") == 1
    assert LAYOUT.parse("110") == label
    assert LAYOUT.locate(2) == ("b", 1)


def test_layout_rejects_bad_input():
    with pytest.raises(ValueError):
        RegisterLayout((("a", 1), ("a", 2)))
    with pytest.raises(ValueError):
        LAYOUT.write(0, "b", 4)
    with pytest.raises(ValueError):
        LAYOUT.parse("12")


def test_kron_matches_numpy():
    assert np.allclose(kron(PAULI["X"], PAULI["Y"]), np.kron(PAULI["X"], PAULI["Y"]))


def test_local_operator_matches_dense(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    psi = random_state(rng)
    out = apply(psi, LocalOperator(m, (2, 0)))
    assert np.allclose(dense(out), embed(m, (2, 0), 3) @ dense(psi))


def test_pattern_controlled_matches_dense(rng):
    u = PAULI["X"]
    psi = random_state(rng)
    gate = PatternControlled(LocalOperator(u, (2,)), (0, 1), [(1, 0), (0, 1)])
    full = np.eye(8, dtype=complex)
    for ctrl in ((1, 0), (0, 1)):
        block = controlled(LocalOperator(u, (2,)), (0, 1), ctrl)
        full = embed(block.matrix, block.targets, 3) @ full
    assert np.allclose(dense(apply(psi, gate)), full @ dense(psi))


def test_controlled_rejects_overlap():
    with pytest.raises(ValueError):
        controlled(LocalOperator(PAULI["X"], (0,)), (0,), (1,))


@settings(max_examples=30, deadline=None)
@given(st.text(alphabet="IXYZ", min_size=3, max_size=3), st.floats(-3.2, 3.2))
def test_pauli_exp_matches_matrix_exponential(paulis, theta):
    rng = np.random.default_rng(0)
    psi = random_state(rng)
    p = kron(*(PAULI[c] for c in paulis))
    got = dense(pauli_exp(psi, (0, 1, 2), paulis, theta))
    assert np.allclose(got, expm(1j * theta * p) @ dense(psi), atol=1e-12)


def test_pauli_string_y_phase():
    psi = SparseState.basis(LAYOUT, a=0, b=0)
    out = pauli_string(psi, (0,), "Y")
    assert out.amplitude(LAYOUT.compose(a=1)) == pytest.approx(1j)


def test_partial_trace_of_product_state(rng):
    a = random_state(rng, RegisterLayout((("a", 1),)))
    b = random_state(rng, RegisterLayout((("b", 2),)))
    joint = SparseState(LAYOUT, dict(enumerate(np.kron(dense(a), dense(b)))))
    block = partial_trace(outer_evolve(joint, joint), ["a"])
    va = dense(a)
    assert np.allclose(block.matrix, np.outer(va, va.conj()))
    assert block.is_hermitian()
    assert block.trace() == pytest.approx(1)


def test_batched_operator_matches_loop(rng):
    mats = rng.normal(size=(3, 2, 2)) + 0j
    psi = random_state(rng)
    out = apply(psi, LocalOperator(mats, (1,)))
    for k in range(3):
        single = apply(psi, LocalOperator(mats[k], (1,)))
        assert np.allclose([out.amplitude(i)[k] if np.ndim(out.amplitude(i)) else out.amplitude(i)
                            for i in range(8)], dense(single))


def test_sparse_state_prunes_zeros():
    s = SparseState(LAYOUT, {0: 1.0, 3: qsim.PRUNE_TOL / 10})
    assert len(s) == 1
