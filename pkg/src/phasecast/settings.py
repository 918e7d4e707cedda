"""The three estimation architectures.

* sequential: one qubit prepared in ``|+>`` passes ``N`` times through the channel;
* ancilla: the probe is half of a Bell pair, only the probe sees the channel;
* parallel: an ``N``-qubit GHZ state, each qubit passes once.

Each setting has an exact brute-force state (Kraus route, derivative by
finite differences in ``phi``) and closed forms in terms of
:class:`~phasecast.channel.ChannelParams`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import binom

from . import tolerances as tol
from .channel import (
    ChannelParams,
    KrausSet,
    VmfParams,
    as_state_map,
    kraus_vmf,
    langevin,
    liouville_from_params,
)
from .estimation import (
    FD_OFFSETS,
    StateWithDerivative,
    observable_sensitivity,
    project_derivative,
    richardson_fd,
    sld,
    state_with_derivative,
)
from .linalg import (
    PLUS_STATE,
    SIGMA_X,
    SIGMA_Y,
    bloch_from_state,
    hermitian_eig,
    kron,
    partial_trace,
    projector,
)

BELL_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
BELL_MINUS = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)
BELL_OBSERVABLE = projector(BELL_PLUS) - projector(BELL_MINUS)
SIGMA_XX = kron(SIGMA_X, SIGMA_X)


def _single_qubit_liouville(channel) -> np.ndarray:
    if isinstance(channel, ChannelParams):
        return liouville_from_params(channel)
    if isinstance(channel, KrausSet):
        return channel.liouville()
    if isinstance(channel, VmfParams):
        return kraus_vmf(channel).liouville()
    k = np.asarray(channel, dtype=complex)
    if k.shape != (4, 4):
        raise TypeError("expected ChannelParams, KrausSet, VmfParams or a 4x4 Liouville matrix")
    return k


# -- sequential -----------------------------------------------------------

def evolve_sequential(rho0, N: int, channel) -> np.ndarray:
    """Apply a single-qubit channel ``N`` times (``N = 0`` returns the input)."""
    if N < 0:
        raise ValueError("N must be non-negative")
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("sequential evolution acts on single-qubit states")
    if isinstance(channel, (ChannelParams, KrausSet, VmfParams, np.ndarray)):
        k = _single_qubit_liouville(channel)
        return (np.linalg.matrix_power(k, N) @ rho.reshape(4)).reshape(2, 2)
    apply = as_state_map(channel)
    for _ in range(N):
        rho = apply(rho)
    return rho


def sequential_state(N: int, p: VmfParams, rho0=PLUS_STATE, h: float = tol.STATE_FD_STEP) -> StateWithDerivative:
    """Brute-force evolved state and its phi-derivative (Kraus route)."""
    return state_with_derivative(lambda x: evolve_sequential(rho0, N, kraus_vmf(p.with_phi(x))), p.phi, h)


def sequential_states(n_max: int, p: VmfParams, rho0=PLUS_STATE, h: float = tol.STATE_FD_STEP,
                      family=None):
    """Brute-force states with derivatives for ``N = 0 .. n_max`` in one pass.

    ``family(phi)`` may supply the single-qubit channel (anything accepted by
    :func:`evolve_sequential`); by default the exact Kraus set is used.
    """
    offsets = (0.0,) + FD_OFFSETS
    if family is None:
        family = lambda x: kraus_vmf(p.with_phi(x))  # noqa: E731
    ks = {o: _single_qubit_liouville(family(p.phi + o * h)) for o in offsets}
    vecs = {o: np.asarray(rho0, dtype=complex).reshape(4) for o in offsets}
    out = []
    for n in range(n_max + 1):
        if n:
            vecs = {o: ks[o] @ v for o, v in vecs.items()}
        rho = vecs[0.0].reshape(2, 2)
        d = richardson_fd({o: vecs[o].reshape(2, 2) for o in FD_OFFSETS}, h)
        out.append(StateWithDerivative((rho + rho.conj().T) / 2, project_derivative(d)))
    return out


# -- ancilla-assisted -----------------------------------------------------

@dataclass(frozen=True)
class AncillaState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("ancilla state must be 4x4")
        for q in (0, 1):
            dev = np.max(np.abs(partial_trace(rho, q, 2) - np.eye(2) / 2))
            if dev > 1e-10:
                raise ValueError(f"marginal of qubit {q} is not maximally mixed (deviation {dev:.3e})")
        object.__setattr__(self, "rho", rho)


def liouville_two_qubit(k_a, k_b) -> np.ndarray:
    """16x16 Liouville matrix of ``Lambda_a (x) Lambda_b`` in row-major vectorization."""
    ka = np.asarray(k_a, dtype=complex).reshape(2, 2, 2, 2)
    kb = np.asarray(k_b, dtype=complex).reshape(2, 2, 2, 2)
    # out[(i a),(j b)] from in[(k c),(l d)]: ka[i j, k l] kb[a b, c d]
    return np.einsum("ijkl,abcd->iajbkcld", ka, kb).reshape(16, 16)


def bell_state(sign: int = +1) -> np.ndarray:
    if sign not in (+1, -1):
        raise ValueError("Bell sign must be +1 or -1")
    return projector(BELL_PLUS if sign > 0 else BELL_MINUS)


def evolve_with_ancilla(N: int, channel, sign: int = +1) -> AncillaState:
    """``(Lambda (x) 1)^N |Psi+-><Psi+-|``."""
    if N < 0:
        raise ValueError("N must be non-negative")
    big = liouville_two_qubit(_single_qubit_liouville(channel), np.eye(4))
    v = np.linalg.matrix_power(big, N) @ bell_state(sign).reshape(16)
    return AncillaState(v.reshape(4, 4))


def ancilla_state(N: int, p: VmfParams, sign: int = +1, h: float = tol.STATE_FD_STEP) -> StateWithDerivative:
    return state_with_derivative(lambda x: evolve_with_ancilla(N, p.with_phi(x), sign).rho, p.phi, h)


def _signed_power(x: float, n):
    """``x**n`` for integer ``n`` with log-space magnitude (``x`` may be negative)."""
    n = np.asarray(n, dtype=float)
    if x == 0:
        return np.where(n == 0, 1.0, 0.0)
    mag = np.exp(n * math.log(abs(x)))
    sign = np.where((x < 0) & (np.mod(n, 2) == 1), -1.0, 1.0)
    return sign * mag


def qfi_ancilla_closed(N, c: ChannelParams):
    """QFI of the probe-ancilla pair after ``N`` rounds."""
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no phi-derivatives")
    n = np.asarray(N, dtype=float)
    if np.any(n < 1):
        raise ValueError("N must be >= 1")
    lt, lp = c.lambda_perp, c.lambda_par
    dlt, dlp, dg = c.d_lambda_perp, c.d_lambda_par, c.d_g
    if not 0 < lt < 1:
        raise ValueError("lambda_perp must lie in (0, 1)")
    lt_n1, lt_n = _signed_power(lt, n - 1), _signed_power(lt, n)
    lp_n1, lp_n = _signed_power(lp, n - 1), _signed_power(lp, n)
    d_plus = (2 * lt_n1 * dlt + lp_n1 * dlp) ** 2 / (1 + 2 * lt_n + lp_n)
    d_minus = (2 * lt_n1 * dlt - lp_n1 * dlp) ** 2 / (1 - 2 * lt_n + lp_n)
    coherent = 8 * lt_n**2 * dg**2 / (1 + lp_n)
    one_minus = 1 - lp_n
    if dlp == 0:
        longitudinal = np.zeros_like(n)
    else:
        small = np.abs(one_minus) <= 1e-12
        # 1 - lp^n ~ n (1 - lp) as lp -> 1
        guarded = np.where(small, n * (1 - lp), one_minus)
        if np.any(guarded == 0):
            raise ValueError("lambda_par = 1 with non-zero derivative: longitudinal term undefined")
        longitudinal = 2 * lp_n1**2 * dlp**2 / guarded
    val = 0.25 * n**2 * (d_plus + d_minus + coherent + longitudinal)
    return float(val) if np.ndim(N) == 0 else val


def bell_observable_sensitivity(N: int, p: VmfParams, sign: int = +1) -> float:
    """Sensitivity of ``|Psi+><Psi+| - |Psi-><Psi-|`` on the probe-ancilla pair."""
    return observable_sensitivity(ancilla_state(N, p, sign), BELL_OBSERVABLE)


def bell_sensitivity_closed(N, c: ChannelParams):
    """Bell-observable sensitivity from the matrix elements of the evolved pair.

    ``<O> = Re S^N`` and ``Var O = (1 + lambda_par^N) / 2 - (Re S^N)^2``.
    """
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no phi-derivatives")
    n = np.asarray(N, dtype=float)
    if np.any(n < 0):
        raise ValueError("N must be non-negative")
    mean = (c.S ** n).real
    slope = np.where(n > 0, (n * c.S ** np.maximum(n - 1, 0) * c.d_S).real, 0.0)
    var = (1 + _signed_power(c.lambda_par, n)) / 2 - mean**2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(var > tol.VARIANCE_TOL, slope**2 / var,
                       np.where(np.abs(slope) <= tol.PROB_DERIV_TOL, 0.0, math.nan))
    return float(val) if np.ndim(N) == 0 else val


def separable_sensitivity_ancilla(N: int, p: VmfParams, sign: int = +1) -> float:
    """Sensitivity of ``sigma_x (x) sigma_x`` on the probe-ancilla pair."""
    return observable_sensitivity(ancilla_state(N, p, sign), SIGMA_XX)


# -- parallel GHZ ---------------------------------------------------------

def hamming_weights(n_qubits: int) -> np.ndarray:
    return np.bitwise_count(np.arange(2**n_qubits, dtype=np.uint64)).astype(int)


@dataclass(frozen=True)
class XState:
    """Density matrix supported on the diagonal and the two extreme corners."""

    n_qubits: int
    diagonal: np.ndarray
    corner: complex

    def __post_init__(self):
        diag = np.asarray(self.diagonal, dtype=float)
        if self.n_qubits < 1 or diag.shape != (2**self.n_qubits,):
            raise ValueError("diagonal must have 2**n_qubits entries")
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "corner", complex(self.corner))

    def validate(self) -> None:
        if np.min(self.diagonal) < -1e-12:
            raise ValueError("negative diagonal entry")
        if abs(np.sum(self.diagonal) - 1) > 1e-10:
            raise ValueError(f"trace is {np.sum(self.diagonal):.15g}")
        if self.n_qubits > 0 and self.diagonal[0] * self.diagonal[-1] < abs(self.corner) ** 2 - 1e-12:
            raise ValueError("corner block is not positive")

    def to_dense(self) -> np.ndarray:
        rho = np.diag(self.diagonal).astype(complex)
        if self.n_qubits == 0 or len(self.diagonal) == 1:
            return rho
        rho[0, -1] += self.corner
        rho[-1, 0] += np.conj(self.corner)
        return rho


def alpha_param(c) -> float:
    """Bit-flip probability ``(1 - lambda_par) / 2`` of one channel use.

    For :class:`VmfParams` the direct expression
    ``2 (kappa coth kappa - 1) sin^2 phi / kappa^2`` is used.
    """
    if isinstance(c, VmfParams):
        if c.kappa <= 0:
            raise ValueError("kappa must be positive")
        return 2 * c.kappa * langevin(c.kappa) * math.sin(c.phi) ** 2 / c.kappa**2
    return 0.5 * (1 - c.lambda_par)


def _check_alpha(a: float) -> float:
    if a < -tol.XSTATE_ALPHA_TOL or a > 1 + tol.XSTATE_ALPHA_TOL:
        raise ValueError(f"alpha = {a} outside [0, 1]")
    return min(max(a, 0.0), 1.0)


def _diag_and_slope(n_qubits: int, a: float, da: float):
    h = hamming_weights(n_qubits)
    n = n_qubits
    t1 = (1 - a) ** (n - h) * a**h
    t2 = a ** (n - h) * (1 - a) ** h
    # derivatives of t1, t2 in alpha written without negative powers
    dt1 = np.where(h > 0, h * a ** np.maximum(h - 1, 0), 0.0) * (1 - a) ** (n - h) \
        - np.where(n - h > 0, (n - h) * (1 - a) ** np.maximum(n - h - 1, 0), 0.0) * a**h
    dt2 = np.where(n - h > 0, (n - h) * a ** np.maximum(n - h - 1, 0), 0.0) * (1 - a) ** h \
        - np.where(h > 0, h * (1 - a) ** np.maximum(h - 1, 0), 0.0) * a ** (n - h)
    return 0.5 * (t1 + t2), 0.5 * da * (dt1 + dt2)


def ghz_output_state(N: int, c: ChannelParams) -> XState:
    """``Lambda^(x)N`` applied to the N-qubit GHZ state, as an X-state."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a = _check_alpha(alpha_param(c))
    diag, _ = _diag_and_slope(N, a, 0.0)
    x = XState(N, diag, 0.5 * c.S**N)
    return x


def ghz_output_derivative(N: int, c: ChannelParams) -> XState:
    """phi-derivative of :func:`ghz_output_state` (diagonal and corner parts)."""
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no phi-derivatives")
    a = _check_alpha(alpha_param(c))
    _, dd = _diag_and_slope(N, a, -0.5 * c.d_lambda_par)
    return XState(N, dd, 0.5 * N * c.S ** (N - 1) * c.d_S)


def ghz_state_dense(N: int, channel) -> np.ndarray:
    """Brute-force GHZ output: the single-qubit Liouville map applied to every qubit."""
    k = _single_qubit_liouville(channel).reshape(2, 2, 2, 2)
    dim = 2**N
    psi = np.zeros(dim, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    rho = np.outer(psi, psi.conj())
    for q in range(N):
        t = rho.reshape([2] * (2 * N))
        t = np.moveaxis(t, [q, N + q], [0, 1])
        t = np.einsum("ijkl,kl...->ij...", k, t)
        rho = np.moveaxis(t, [0, 1], [q, N + q]).reshape(dim, dim)
    return rho


def ghz_state_kron(N: int, kraus: KrausSet) -> np.ndarray:
    """GHZ output from the Kraus operators of ``Lambda^(x)N`` (``4^N`` tensor products)."""
    dim = 2**N
    psi = np.zeros(dim, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    rho = np.outer(psi, psi.conj())
    out = np.zeros_like(rho)
    ops = list(kraus)
    for idx in np.ndindex(*([len(ops)] * N)):
        big = kron(*(ops[i] for i in idx))
        out += big @ rho @ big.conj().T
    return out


def ghz_state(N: int, p: VmfParams, h: float = tol.STATE_FD_STEP) -> StateWithDerivative:
    """Brute-force GHZ output state and its phi-derivative."""
    return state_with_derivative(lambda x: ghz_state_dense(N, kraus_vmf(p.with_phi(x))), p.phi, h)


def xstate_eigensystem(x: XState):
    """Eigenvalues (ascending) and eigenvectors of an X-state.

    Interior basis states are eigenvectors with their diagonal entry as
    eigenvalue; the corner block ``[[d_0, c], [c*, d_last]]`` is
    diagonalized in closed form.  Eigenvectors are returned as dense columns.
    """
    dim = 2**x.n_qubits
    d0, d1, c = x.diagonal[0], x.diagonal[-1], x.corner
    mean, half = (d0 + d1) / 2, (d0 - d1) / 2
    r = math.hypot(half, abs(c))
    vals = np.array(x.diagonal, dtype=float)
    vecs = np.eye(dim, dtype=complex)
    if dim == 1:
        return vals, vecs
    vals[0], vals[-1] = mean - r, mean + r
    if r == 0:
        block = np.eye(2, dtype=complex)
    else:
        # eigenvectors of [[half, c], [c*, -half]]
        theta = math.atan2(abs(c), half)
        ph = c / abs(c) if abs(c) > 0 else 1.0
        up = np.array([math.cos(theta / 2), math.sin(theta / 2) / ph])
        down = np.array([-math.sin(theta / 2) * ph, math.cos(theta / 2)])
        block = np.column_stack([down, up])
    vecs[np.ix_([0, dim - 1], [0, dim - 1])] = block
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def qfi_xstate(x: XState, dx: XState) -> float:
    """QFI of an X-state from its structure (no dense eigendecomposition)."""
    interior = x.diagonal[1:-1]
    d_int = dx.diagonal[1:-1]
    # binomial weights: tiny but exact, and d^2/p stays bounded as p -> 0
    keep = interior > 0
    total = float(np.sum(d_int[keep] ** 2 / interior[keep]))
    block = np.array([[x.diagonal[0], x.corner], [np.conj(x.corner), x.diagonal[-1]]])
    dblock = np.array([[dx.diagonal[0], dx.corner], [np.conj(dx.corner), dx.diagonal[-1]]])
    q, v = hermitian_eig(block)
    dm = v.conj().T @ dblock @ v
    for i in range(2):
        for j in range(2):
            s = q[i] + q[j]
            if s > tol.QFI_NULL_DENOM:
                total += 2 * abs(dm[i, j]) ** 2 / s
    return total


def qfi_parallel_terms(N, c: ChannelParams):
    """Corner-block and diagonal contributions to the GHZ QFI (their sum is the QFI)."""
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no phi-derivatives")
    if c.phi is not None and abs(math.sin(c.phi)) < tol.PARALLEL_PHI_MIN:
        raise ValueError(
            f"phi = {c.phi} is too close to a multiple of pi for the closed form; "
            f"use phi >= {tol.PARALLEL_PHI_MIN} or the brute-force path (N <= 8)"
        )
    n = int(N)
    if n < 1:
        raise ValueError("N must be >= 1")
    a = alpha_param(c)
    if not 0 < a < 1:
        raise ValueError(f"alpha = {a} must lie strictly between 0 and 1")
    mod = abs(c.S)
    if mod >= 1:
        raise ValueError("|S| must be < 1")
    da = -0.5 * c.d_lambda_par
    ratio = c.d_S / c.S
    log_a, log_b = math.log(a), math.log1p(-a)
    p_tot = math.exp(n * log_b) + math.exp(n * log_a)
    mod_n = math.exp(n * math.log(mod))
    dp = n * (math.exp((n - 1) * log_a) - math.exp((n - 1) * log_b)) * da
    y = n * mod_n * ratio.real
    lo, hi = p_tot - mod_n, p_tot + mod_n
    if lo < tol.INDETERMINATE_DENOM:
        raise ValueError(
            f"corner denominator {lo:.3e} vanishes; use phi >= {tol.PARALLEL_PHI_MIN} or the brute-force path"
        )
    corner = 0.5 * (dp + y) ** 2 / hi + 0.5 * (dp - y) ** 2 / lo + (n * mod_n * ratio.imag) ** 2 / p_tot
    if n == 1:
        return corner, 0.0
    k = np.arange(1, n)
    mass = binom.pmf(k, n, a) + binom.pmf(k, n, 1 - a)
    w1 = expit((n - 2 * k) * (log_b - log_a))    # t1 / (t1 + t2)
    u1 = k / a - (n - k) / (1 - a)
    u2 = (n - k) / a - k / (1 - a)
    diag = 0.5 * da**2 * float(np.sum(mass * (w1 * u1 + (1 - w1) * u2) ** 2))
    return corner, diag


def qfi_parallel_closed(N, c: ChannelParams):
    """QFI of the GHZ probe after one use of the channel on each of its ``N`` qubits."""
    if np.ndim(N):
        return np.array([sum(qfi_parallel_terms(int(n), c)) for n in np.asarray(N)])
    return float(sum(qfi_parallel_terms(N, c)))


def sigma_x_tensor_sensitivity(N: int, c: ChannelParams) -> float:
    """Sensitivity of ``sigma_x^(x)N`` on the GHZ output, from the X-state entries.

    ``sigma_x^(x)N`` flips every bit, so only the corners contribute to its
    mean and its square is the identity.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    corner = 0.5 * c.S**N
    d_corner = 0.5 * N * c.S ** (N - 1) * c.d_S
    mean = 2 * corner.real
    slope = 2 * d_corner.real
    var = 1 - mean**2
    if var <= tol.VARIANCE_TOL:
        return 0.0 if abs(slope) <= tol.PROB_DERIV_TOL else math.nan
    return slope**2 / var


# -- trajectory -----------------------------------------------------------

def sld_angle(s: StateWithDerivative, fallback: float = 0.0) -> float:
    """Equatorial angle of the SLD's larger-eigenvalue eigenvector."""
    L = sld(s)
    bx, by = np.trace(L @ SIGMA_X).real / 2, np.trace(L @ SIGMA_Y).real / 2
    if math.hypot(bx, by) < 1e-12:
        return fallback
    return math.atan2(by, bx)


def bloch_trajectory(n_max: int, p: VmfParams, h: float = tol.STATE_FD_STEP):
    """``(N, Bloch vector, SLD angle)`` for ``N = 0 .. n_max`` from ``|+>``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rows = []
    for n, s in enumerate(sequential_states(n_max, p, h=h)):
        r = bloch_from_state(s.rho)
        rows.append((n, r, sld_angle(s, fallback=math.atan2(r[1], r[0]))))
    return rows
