import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecast.linalg import (
    IDENTITY,
    MAXIMALLY_MIXED,
    PLUS_STATE,
    SIGMA_X,
    bloch_from_state,
    check_density_matrix,
    devectorize,
    hermitian_eig,
    jacobi_eigh,
    kron,
    partial_trace,
    projector,
    random_density_matrix,
    random_hermitian,
    state_from_bloch,
    vectorize,
    KET_0,
    KET_1,
)

complex_entries = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def matrices(dim):
    return st.lists(complex_entries, min_size=dim * dim, max_size=dim * dim).map(
        lambda xs: np.array(xs, dtype=complex).reshape(dim, dim))


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eig_diagonal_and_pauli(method):
    w, v = hermitian_eig(np.diag([1.0, 2.0]), method=method)
    assert np.allclose(w, [1, 2])
    assert np.allclose(np.abs(v), np.eye(2))
    w, _ = hermitian_eig(SIGMA_X, method=method)
    assert np.allclose(w, [-1, 1])


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eig_reconstruction_seed42(method):
    m = random_hermitian(4, np.random.default_rng(42))
    w, v = hermitian_eig(m, method=method)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - m)) <= 1e-10 * 4
    assert np.max(np.abs(v.conj().T @ v - np.eye(4))) <= 1e-10


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError, match="asymmetry"):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


@settings(max_examples=60, deadline=None)
@given(matrices(3))
def test_jacobi_matches_lapack(m):
    h = (m + m.conj().T) / 2
    w1, _ = hermitian_eig(h)
    w2, v2 = jacobi_eigh(h)
    assert np.allclose(w1, w2, atol=1e-9 * max(1, np.max(np.abs(h))))
    assert np.allclose(v2 @ np.diag(w2) @ v2.conj().T, h, atol=1e-9 * max(1, np.max(np.abs(h))))


@settings(max_examples=60, deadline=None)
@given(matrices(4))
def test_eig_trace_and_determinant(m):
    h = (m + m.conj().T) / 2
    w, _ = hermitian_eig(h)
    assert abs(np.sum(w) - np.trace(h).real) <= 1e-10 * max(1, np.max(np.abs(h)))
    assert abs(np.prod(w) - np.linalg.det(h).real) <= 1e-8 * max(1, np.max(np.abs(h))) ** 4


def test_degenerate_eigenvectors_orthonormal():
    w, v = hermitian_eig(np.eye(3))
    assert np.allclose(v.conj().T @ v, np.eye(3))


def test_vectorize_examples():
    assert np.allclose(vectorize(MAXIMALLY_MIXED), [0.5, 0, 0, 0.5])
    assert np.allclose(vectorize(PLUS_STATE), [0.5, 0.5, 0.5, 0.5])
    assert np.allclose(vectorize(projector(KET_0)), [1, 0, 0, 0])
    rho = np.array([[0.7, 0.1 + 0.2j], [0.1 - 0.2j, 0.3]])
    assert vectorize(rho)[1] == rho[0, 1]


def test_vectorize_rejects_two_qubits():
    with pytest.raises(ValueError):
        vectorize(np.eye(4) / 4)


def test_devectorize_examples_and_roundtrip():
    assert np.array_equal(devectorize([0.5, 0, 0, 0.5]), MAXIMALLY_MIXED)
    assert np.array_equal(devectorize([1, 0, 0, 0]), projector(KET_0))
    rho = random_density_matrix(2, np.random.default_rng(7))
    assert np.array_equal(devectorize(vectorize(rho)), rho)


@pytest.mark.parametrize("bad", [[0.6, 0, 0, 0.6], [0.5, 0.1, 0.3, 0.5]])
def test_devectorize_rejects(bad):
    with pytest.raises(ValueError):
        devectorize(bad)


def test_kron_examples():
    assert np.array_equal(kron(IDENTITY, IDENTITY), np.eye(4))
    ket00 = np.kron(KET_0, KET_0)
    assert np.allclose(kron(SIGMA_X, SIGMA_X) @ ket00, np.kron(KET_1, KET_1))
    a, b, c, d = 2.0, 3.0, 5.0, 7.0
    assert np.allclose(kron(np.diag([a, b]), np.diag([c, d])), np.diag([a * c, a * d, b * c, b * d]))


@settings(max_examples=40, deadline=None)
@given(matrices(2), matrices(2), matrices(2), matrices(2))
def test_kron_mixed_product_and_associativity(a, b, c, d):
    lhs = kron(a, b) @ kron(c, d)
    rhs = kron(a @ c, b @ d)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))
    assert np.allclose(kron(kron(a, b), c), kron(a, kron(b, c)), rtol=0, atol=1e-12 * 1e3)


def test_bloch_examples():
    assert np.allclose(bloch_from_state(PLUS_STATE), [1, 0, 0])
    assert np.allclose(bloch_from_state(MAXIMALLY_MIXED), [0, 0, 0])


def test_bloch_roundtrip_seed3():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = rng.normal(size=3)
        r *= rng.uniform() / np.linalg.norm(r)
        assert np.max(np.abs(bloch_from_state(state_from_bloch(r)) - r)) <= 1e-14
        rho = state_from_bloch(r)
        assert np.max(np.abs(state_from_bloch(bloch_from_state(rho)) - rho)) <= 1e-14


def test_state_from_bloch_rejects_unphysical():
    with pytest.raises(ValueError, match="unphysical"):
        state_from_bloch([1.0, 0.1, 0.0])


@pytest.mark.parametrize(
    "rho, msg",
    [
        (np.array([[0.5, 0.1], [0.2, 0.5]]), "Hermitian"),
        (np.eye(2), "trace"),
        (np.diag([1.5, -0.5]), "negative eigenvalue"),
    ],
)
def test_check_density_matrix(rho, msg):
    with pytest.raises(ValueError, match=msg):
        check_density_matrix(rho)


def test_partial_trace_of_product():
    rng = np.random.default_rng(5)
    a, b = random_density_matrix(2, rng), random_density_matrix(2, rng)
    rho = np.kron(a, b)
    assert np.allclose(partial_trace(rho, 0, 2), a)
    assert np.allclose(partial_trace(rho, 1, 2), b)
