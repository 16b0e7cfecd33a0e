import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from weaklg import qcore
from weaklg.errors import DomainError, InvariantError, ShapeError
from weaklg.qcore import I2, X, Y, Z, DensityMatrix, PureState

finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
mat2 = arrays(complex, (2, 2), elements=st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))


def test_matmul_pauli_products():
    assert np.allclose(qcore.matmul(I2, X), X)
    assert np.allclose(qcore.matmul(X, X), I2)
    assert np.allclose(qcore.matmul(X, Y), 1j * Z)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        qcore.matmul(np.eye(2), np.eye(4))


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(DomainError):
        qcore.as_matrix([[np.nan, 0], [0, 1]])


def test_kron_examples():
    assert np.allclose(qcore.kron(I2, I2), np.eye(4))
    ket10 = np.zeros(4)
    ket10[2] = 1
    ket11 = np.zeros(4)
    ket11[3] = 1
    assert np.allclose(qcore.kron(Z, X) @ ket10, -ket11)
    xi = qcore.kron(X, I2)
    assert np.allclose(xi[:2, 2:], I2) and np.allclose(xi[2:, :2], I2)
    assert np.allclose(xi[:2, :2], 0)


def test_kron_needs_square():
    with pytest.raises(ShapeError):
        qcore.kron(np.ones((2, 3)), I2)


def test_dagger_examples():
    assert np.allclose(qcore.dagger(Y), Y)
    th = 0.37
    rz = np.diag([np.exp(-1j * th / 2), np.exp(1j * th / 2)])
    assert np.allclose(qcore.dagger(rz), np.diag([np.exp(1j * th / 2), np.exp(-1j * th / 2)]))
    assert np.allclose(qcore.dagger(I2), I2)


def test_trace_product_examples():
    plus = np.array([1, 1]) / math.sqrt(2)
    rho = np.outer(plus, plus)
    assert qcore.trace_product(rho, I2) == pytest.approx(1)
    assert abs(qcore.trace_product(np.diag([1, 0]), X)) < 1e-15
    assert qcore.trace_product(rho, X) == pytest.approx(1)
    assert abs(qcore.trace_product(rho, Z)) < 1e-15


def test_trace_product_shape_error():
    with pytest.raises(ShapeError):
        qcore.trace_product(np.eye(2), np.eye(4))


def test_sqrt_examples():
    assert np.allclose(qcore.matrix_sqrt_psd(I2), I2)
    assert np.allclose(qcore.matrix_sqrt_psd(np.diag([4, 1])), np.diag([2, 1]))
    th = 0.3
    lam = math.sin(th)
    want = (math.cos(th / 2) * I2 + math.sin(th / 2) * Z) / math.sqrt(2)
    assert np.allclose(qcore.matrix_sqrt_psd((I2 + lam * Z) / 2), want, atol=1e-14)


def test_sqrt_rejects_negative_and_nonhermitian():
    with pytest.raises(DomainError):
        qcore.matrix_sqrt_psd(np.diag([1.0, -0.1]))
    with pytest.raises(DomainError):
        qcore.matrix_sqrt_psd(np.array([[1, 1], [0, 1]]))


def test_sqrt_clips_roundoff_negatives():
    r = qcore.matrix_sqrt_psd(np.diag([1.0, -1e-12]))
    assert np.allclose(r, np.diag([1.0, 0.0]))


@given(mat2, mat2, mat2, mat2)
def test_kron_mixed_product(a, b, c, d):
    lhs = qcore.kron(a, b) @ qcore.kron(c, d)
    assert np.max(np.abs(lhs - qcore.kron(a @ c, b @ d))) < 1e-12


@given(mat2, mat2, mat2)
def test_kron_associative(a, b, c):
    assert np.max(np.abs(qcore.kron(qcore.kron(a, b), c) - qcore.kron(a, qcore.kron(b, c)))) < 1e-12


@given(mat2, mat2, mat2)
def test_matmul_associative(a, b, c):
    assert np.max(np.abs(qcore.matmul(qcore.matmul(a, b), c) - qcore.matmul(a, qcore.matmul(b, c)))) < 1e-12


@settings(max_examples=50)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sqrt_squares_back(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((1 << n, 1 << n)) + 1j * rng.standard_normal((1 << n, 1 << n))
    m = g @ g.conj().T
    r = qcore.matrix_sqrt_psd(m)
    assert np.max(np.abs(r @ r - m)) < 1e-10


@given(mat2)
def test_dagger_involution(a):
    assert np.array_equal(qcore.dagger(qcore.dagger(a)), a)


def test_embed_matches_kron():
    rng = np.random.default_rng(3)
    a = qcore.random_unitary(rng, 2)
    assert np.allclose(qcore.embed_operator(a, [1], 3), np.kron(np.kron(I2, a), I2))
    cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    # control on q2, target on q0
    full = qcore.embed_operator(cx, [2, 0], 3)
    for i in range(8):
        b = [(i >> 2) & 1, (i >> 1) & 1, i & 1]
        out = list(b)
        if b[2]:
            out[0] ^= 1
        j = 4 * out[0] + 2 * out[1] + out[2]
        assert full[j, i] == 1


def test_embed_errors():
    with pytest.raises(ShapeError):
        qcore.embed_operator(np.eye(4), [0], 2)
    with pytest.raises(ShapeError):
        qcore.embed_operator(np.eye(4), [0, 0], 2)
    with pytest.raises(ShapeError):
        qcore.embed_operator(np.eye(2), [3], 2)


def test_partial_trace_of_product():
    rng = np.random.default_rng(4)
    rhos = []
    for _ in range(3):
        v = qcore.random_pure_states(rng, 2, 1)[0]
        rhos.append(np.outer(v, v.conj()))
    full = np.kron(np.kron(rhos[0], rhos[1]), rhos[2])
    assert np.allclose(qcore.partial_trace(full, [1], 3), rhos[1])
    assert np.allclose(qcore.partial_trace(full, [2, 0], 3), np.kron(rhos[2], rhos[0]))
    assert np.allclose(qcore.partial_trace(full, [0, 1, 2], 3), full)


def test_density_matrix_invariants():
    with pytest.raises(InvariantError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(InvariantError):
        DensityMatrix(np.array([[0.5, 0.5], [0.4, 0.5]]))
    with pytest.raises(InvariantError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ShapeError):
        DensityMatrix(np.eye(3) / 3)
    rho = DensityMatrix.basis(5, 3)
    assert rho.num_qubits == 3
    assert rho.probabilities()[5] == 1


def test_density_matrix_is_immutable():
    rho = DensityMatrix.basis(0, 1)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 0


def test_pure_state_norm():
    with pytest.raises(InvariantError):
        PureState(np.array([1.0, 1.0]))
    psi = PureState(np.array([1.0, 1j]) / math.sqrt(2))
    assert psi.density_matrix().expectation(Y) == pytest.approx(1)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_channels_preserve_state_invariants(seed, n):
    rng = np.random.default_rng(seed)
    d = 1 << n
    u = qcore.random_unitary(rng, 2 * d)
    # Stinespring: K_k = (<k| (x) I) U (|0> (x) I)
    ks = [u[k * d:(k + 1) * d, :d] for k in range(2)]
    v = qcore.random_pure_states(rng, d, 1)[0]
    out = DensityMatrix(qcore.apply_kraus(np.outer(v, v.conj()), ks))
    assert np.trace(out.matrix).real == pytest.approx(1, abs=1e-12)
