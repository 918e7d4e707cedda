"""Dense complex linear algebra for qubit states and channels.

Vectorization is row-major: a single-qubit density matrix is flattened to
``(rho_00, rho_01, rho_10, rho_11)``.  With this ordering a map
``rho -> A rho B`` acts on ``vec(rho)`` as ``kron(A, B.T)``, so a unitary
conjugation ``U rho U^dag`` has Liouville matrix ``kron(U, U.conj())``.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

from . import tolerances as tol

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def projector(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


PLUS_STATE = projector(KET_PLUS)
MAXIMALLY_MIXED = IDENTITY / 2


def max_asymmetry(m: np.ndarray) -> float:
    """Largest entry of ``|m - m^dag|``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    return m


def check_density_matrix(rho, atol: float | None = None) -> np.ndarray:
    """Validate a density matrix and return it as a complex array.

    Raises ``ValueError`` naming the violated property (Hermiticity, unit
    trace, positivity).  ``atol`` loosens all three checks at once; by
    default the module tolerances are used.
    """
    rho = _square(rho, "density matrix")
    herm_tol = tol.HERMITIAN_TOL if atol is None else atol
    trace_tol = tol.TRACE_TOL if atol is None else atol
    neg_tol = tol.EIGEN_NEG_TOL if atol is None else atol
    asym = max_asymmetry(rho)
    if asym > herm_tol:
        raise ValueError(f"density matrix is not Hermitian (max asymmetry {asym:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix trace is {tr.real:.15g}, expected 1")
    lowest = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lowest < -neg_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
    return rho


def hermitian_eig(m, method: str = "lapack"):
    """Eigendecomposition of a Hermitian matrix.

    Args:
        m: square complex Hermitian matrix.
        method: ``"lapack"`` (default, ``numpy.linalg.eigh``) or
            ``"jacobi"`` for the cyclic Jacobi solver in :func:`jacobi_eigh`.

    Returns:
        ``(eigenvalues, eigenvectors)`` with real eigenvalues in ascending
        order and orthonormal eigenvectors as columns.

    Raises:
        ValueError: if ``m`` deviates from Hermiticity by more than 1e-10.
    """
    m = _square(m)
    asym = max_asymmetry(m)
    if asym > tol.EIG_HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian (max asymmetry {asym:.3e})")
    m = (m + m.conj().T) / 2
    if method == "lapack":
        w, v = np.linalg.eigh(m)
        return w, v
    if method == "jacobi":
        return jacobi_eigh(m)
    raise ValueError(f"unknown eigensolver method {method!r}")


def jacobi_eigh(m, max_sweeps: int = 100, atol: float = 1e-15):
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Each (p, q) pivot first removes the phase of ``a_pq`` with a diagonal
    unitary and then applies a real Givens rotation, so the accumulated
    transform stays exactly unitary up to rounding.
    """
    a = np.array(_square(m), dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.max(np.abs(a)), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[~np.eye(n, dtype=bool)]) ** 2))
        if off <= atol * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= atol * scale:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1 + tau * tau))
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                w = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ w
                a[idx, :] = w.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0
                v[:, idx] = v[:, idx] @ w
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w_diag = np.real(np.diag(a))
    order = np.argsort(w_diag, kind="stable")
    return w_diag[order], v[:, order]


def vectorize(rho) -> np.ndarray:
    """Row-major vectorization ``(rho_00, rho_01, rho_10, rho_11)`` of a qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"vectorize expects a single-qubit 2x2 matrix, got shape {rho.shape}")
    return rho.reshape(4).copy()


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize`; rejects vectors that are not states."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (4,):
        raise ValueError(f"devectorize expects a 4-vector, got shape {v.shape}")
    if abs(v[0] + v[3] - 1) > tol.DEVEC_TOL:
        raise ValueError(f"vectorized state has trace {(v[0] + v[3]).real:.15g}")
    if abs(v[1] - np.conj(v[2])) > tol.DEVEC_TOL or abs(v[0].imag) > tol.DEVEC_TOL or abs(v[3].imag) > tol.DEVEC_TOL:
        raise ValueError("vectorized state is not Hermitian")
    return v.reshape(2, 2).copy()


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (left to right)."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def bloch_from_state(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"Bloch vector needs a single-qubit state, got shape {rho.shape}")
    return np.array([np.trace(rho @ s).real for s in PAULIS])


def state_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector must have three components")
    norm = np.linalg.norm(r)
    if norm > 1 + tol.UNPHYSICAL_BLOCH_TOL:
        raise ValueError(f"Bloch vector norm {norm:.15g} exceeds 1 (unphysical)")
    return 0.5 * (IDENTITY + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def embed(op, qubit: int, n_qubits: int) -> np.ndarray:
    """``op`` acting on ``qubit`` (0 = most significant) of an n-qubit register."""
    ops = [IDENTITY] * n_qubits
    ops[qubit] = op
    return kron(*ops)


def partial_trace(rho, keep: int, n_qubits: int) -> np.ndarray:
    """Reduced single-qubit state of qubit ``keep``."""
    t = np.asarray(rho).reshape([2] * (2 * n_qubits))
    t = np.moveaxis(t, [keep, n_qubits + keep], [0, 1])
    t = t.reshape(2, 2, 2 ** (n_qubits - 1), 2 ** (n_qubits - 1))
    return np.einsum("abkk->ab", t)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random state from a Ginibre ensemble (test and validation helper)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2
