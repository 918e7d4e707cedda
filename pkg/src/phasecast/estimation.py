"""Fisher-information tools for phase estimation.

Generic routines work on any state together with its phi-derivative
(:class:`StateWithDerivative`); the closed forms for the N-round sequential
protocol with a ``|+>`` probe take :class:`~phasecast.channel.ChannelParams`
and accept either a scalar ``N`` or an integer array of round counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .channel import ChannelParams
from .linalg import check_density_matrix, hermitian_eig, max_asymmetry


@dataclass(frozen=True)
class StateWithDerivative:
    rho: np.ndarray
    drho: np.ndarray

    def __post_init__(self):
        rho = check_density_matrix(self.rho, atol=None)
        drho = np.asarray(self.drho, dtype=complex)
        if drho.shape != rho.shape:
            raise ValueError(f"derivative shape {drho.shape} does not match state shape {rho.shape}")
        asym = max_asymmetry(drho)
        if asym > tol.EIG_HERMITIAN_TOL:
            raise ValueError(f"state derivative is not Hermitian (max asymmetry {asym:.3e})")
        if abs(np.trace(drho)) > tol.EIG_HERMITIAN_TOL:
            raise ValueError(f"state derivative is not traceless (trace {np.trace(drho):.3e})")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "drho", drho)


@dataclass(frozen=True)
class SensitivityResult:
    value: float
    setting: str
    N: int
    observable: str

    def __post_init__(self):
        if self.value < -1e-12:
            raise ValueError(f"sensitivity must be non-negative, got {self.value}")


@dataclass(frozen=True)
class EtaSpectrum:
    """Eigenvalues of ``(d K^N)^dag (d K^N)`` for the Liouville matrix ``K``.

    ``eta34`` is doubly degenerate.  ``norm_is_lower_bound`` is True when
    ``eta2 < eta34``, in which case the operator norm equals the lower
    bound ``f_N``.
    """

    eta1: float
    eta2: float
    eta34: float

    @property
    def norm_is_lower_bound(self) -> bool:
        return self.eta2 < self.eta34

    @property
    def largest(self) -> float:
        return max(self.eta1, self.eta2, self.eta34)


def richardson_fd(values: dict, h: float):
    """phi-derivative from samples at offsets ``+-h/2, +-h, +-2h``.

    Two fourth-order central stencils (steps ``h`` and ``h/2``) are combined
    by Richardson extrapolation, cancelling the leading ``h^4`` error.
    """
    coarse = (values[-2] - 8 * values[-1] + 8 * values[1] - values[2]) / (12 * h)
    fine = (values[-1] - 8 * values[-0.5] + 8 * values[0.5] - values[1]) / (6 * h)
    return (16 * fine - coarse) / 15


FD_OFFSETS = (-2, -1, -0.5, 0.5, 1, 2)


def project_derivative(d) -> np.ndarray:
    """Symmetrize and remove the trace of a finite-difference state derivative."""
    d = np.asarray(d, dtype=complex)
    d = (d + d.conj().T) / 2
    return d - np.trace(d) / d.shape[0] * np.eye(d.shape[0])


def state_with_derivative(build: Callable[[float], np.ndarray], phi: float,
                          h: float = tol.STATE_FD_STEP) -> StateWithDerivative:
    """State at ``phi`` and its finite-difference derivative (see :func:`richardson_fd`).

    The derivative is symmetrized and projected onto traceless matrices.
    """
    rho = np.asarray(build(phi), dtype=complex)
    values = {o: np.asarray(build(phi + o * h), dtype=complex) for o in FD_OFFSETS}
    return StateWithDerivative((rho + rho.conj().T) / 2, project_derivative(richardson_fd(values, h)))


def _eig_blocks(s: StateWithDerivative, method: str):
    q, v = hermitian_eig(s.rho, method=method)
    if q[0] < -tol.EIGEN_NEG_TOL:
        raise ValueError(f"state has negative eigenvalue {q[0]:.3e}")
    q = np.clip(q, 0.0, None)
    d = v.conj().T @ s.drho @ v
    denom = q[:, None] + q[None, :]
    null = denom <= tol.QFI_NULL_DENOM
    if np.any(np.abs(d[null]) > tol.QFI_NULL_ELEMENT):
        worst = float(np.max(np.abs(d[null])))
        raise ValueError(
            f"derivative has weight {worst:.3e} outside the support of the state; "
            "the state/derivative pair is inconsistent"
        )
    return q, v, d, denom, null


def qfi_eigen(s: StateWithDerivative, method: str = "lapack") -> float:
    """Quantum Fisher information from the eigendecomposition of the state.

    ``F = 4 sum_ij q_i / (q_i + q_j)^2 |<psi_i| drho |psi_j>|^2``, dropping
    pairs with ``q_i + q_j <= 1e-12``.
    """
    q, _, d, denom, null = _eig_blocks(s, method)
    safe = np.where(null, 1.0, denom)
    terms = np.where(null, 0.0, 4 * q[:, None] / safe**2 * np.abs(d) ** 2)
    return float(np.sum(terms))


def sld(s: StateWithDerivative, method: str = "lapack") -> np.ndarray:
    """Symmetric logarithmic derivative ``L`` with ``L rho + rho L = 2 drho`` on the support."""
    q, v, d, denom, null = _eig_blocks(s, method)
    safe = np.where(null, 1.0, denom)
    l_eig = np.where(null, 0.0, 2 * d / safe)
    out = v @ l_eig @ v.conj().T
    return (out + out.conj().T) / 2


def observable_sensitivity(s: StateWithDerivative, obs) -> float:
    """``(d<O>/dphi)^2 / Var(O)``; ``nan`` when the variance vanishes but the slope does not."""
    obs = np.asarray(obs, dtype=complex)
    slope = np.trace(s.drho @ obs).real
    mean = np.trace(s.rho @ obs).real
    var = np.trace(s.rho @ obs @ obs).real - mean**2
    if var <= tol.VARIANCE_TOL:
        return 0.0 if abs(slope) <= tol.PROB_DERIV_TOL else math.nan
    return float(slope**2 / var)


def classical_fisher(s: StateWithDerivative, projectors: Sequence) -> float:
    """Classical Fisher information of a projective measurement.

    Outcomes with ``p <= 1e-14`` and ``|dp| <= 1e-12`` are dropped; a
    vanishing probability with non-vanishing slope returns ``nan``.
    """
    projectors = [np.asarray(p, dtype=complex) for p in projectors]
    dim = s.rho.shape[0]
    if np.max(np.abs(sum(projectors) - np.eye(dim))) > tol.EIG_HERMITIAN_TOL:
        raise ValueError("projectors do not resolve the identity")
    total = 0.0
    for proj in projectors:
        p = np.trace(s.rho @ proj).real
        dp = np.trace(s.drho @ proj).real
        if p <= tol.PROB_TOL:
            if abs(dp) > tol.PROB_DERIV_TOL:
                return math.nan
            continue
        total += dp * dp / p
    return float(total)


def eigenprojectors(obs) -> list[np.ndarray]:
    """Rank-one projectors onto the eigenvectors of a Hermitian matrix."""
    _, v = hermitian_eig(obs)
    return [np.outer(v[:, i], v[:, i].conj()) for i in range(v.shape[1])]


# -- sequential closed forms ----------------------------------------------

def _rounds(N):
    n = np.asarray(N)
    if np.any(n < 0) or not np.all(np.equal(np.mod(n, 1), 0)):
        raise ValueError("round counts must be non-negative integers")
    return n.astype(float)


def _out(x, N):
    return float(x) if np.ndim(N) == 0 else np.asarray(x, dtype=float)


def _need_derivatives(c: ChannelParams):
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no phi-derivatives")


def qfi_sequential_general(N, c: ChannelParams):
    """QFI after ``N`` rounds from ``|+>``, in terms of ``lambda_perp`` and ``g``."""
    _need_derivatives(c)
    n = _rounds(N)
    lt, dl, dg = c.lambda_perp, c.d_lambda_perp, c.d_g
    if lt >= 1:
        if dl != 0:
            raise ValueError("lambda_perp >= 1 with non-zero derivative: no finite QFI")
        return _out(n**2 * lt ** (2 * n) * dg**2, N)
    if lt <= 0:
        raise ValueError("lambda_perp must be positive")
    p2n = lt ** (2 * n)
    with np.errstate(invalid="ignore", divide="ignore"):
        second = np.where(n > 0, dl**2 * lt ** (2 * n - 2) / (1 - p2n), 0.0)
    return _out(n**2 * (p2n * dg**2 + second), N)


def qfi_sequential_vmf(N, c: ChannelParams):
    """Compact QFI form in terms of ``S``, ``mu = arg S`` and ``nu = arg S'``."""
    _need_derivatives(c)
    n = _rounds(N)
    mod = abs(c.S)
    if mod >= 1:
        raise ValueError("|S| must be < 1 (the compact form needs a noisy channel)")
    r2 = abs(c.d_S / c.S) ** 2
    p2n = mod ** (2 * n)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(n > 0, n**2 * p2n * r2 * (1 - p2n * math.sin(c.nu - c.mu) ** 2) / (1 - p2n), 0.0)
    return _out(val, N)


def lower_bound_f(N, c: ChannelParams):
    """``f_N = N^2 lambda_perp^(2N-2) [lambda_perp^2 g'^2 + lambda_perp'^2] <= F_N``."""
    _need_derivatives(c)
    n = _rounds(N)
    lt = c.lambda_perp
    if lt < 0 or lt > 1 + tol.CP_TOL:
        raise ValueError("lambda_perp must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(n > 0, n**2 * lt ** (2 * n - 2) * (lt**2 * c.d_g**2 + c.d_lambda_perp**2), 0.0)
    return _out(val, N)


def n_opt_estimate(c: ChannelParams) -> int:
    """Round count maximizing the lower bound: ``round(-1/ln lambda_perp)``, at least 1."""
    lt = c.lambda_perp
    if not 0 < lt < 1:
        raise ValueError(f"no finite optimal round count for lambda_perp = {lt}")
    return max(1, int(math.floor(-1 / math.log(lt) + 0.5)))


def f_at_nopt(c: ChannelParams) -> float:
    """``(lambda_perp' / (e lambda_perp ln lambda_perp))^2`` (omits the g' contribution)."""
    _need_derivatives(c)
    lt = c.lambda_perp
    if not 0 < lt < 1:
        raise ValueError(f"f at the optimum is undefined for lambda_perp = {lt}")
    return (c.d_lambda_perp / (math.e * lt * math.log(lt))) ** 2


def eta_eigenvalues(N: int, c: ChannelParams) -> EtaSpectrum:
    _need_derivatives(c)
    n = int(N)
    if n < 0:
        raise ValueError("N must be non-negative")
    if n == 0:
        return EtaSpectrum(0.0, 0.0, 0.0)
    eta2 = n**2 * c.lambda_par ** (2 * n - 2) * c.d_lambda_par**2
    eta34 = float(lower_bound_f(n, c))
    return EtaSpectrum(0.0, float(eta2), eta34)


def sigma_x_sensitivity_closed(N, c: ChannelParams):
    """Sensitivity of ``sigma_x`` after ``N`` rounds from ``|+>`` (``nan`` if indeterminate)."""
    _need_derivatives(c)
    n = _rounds(N)
    mod = abs(c.S)
    if mod >= 1:
        raise ValueError("|S| must be < 1")
    r2 = abs(c.d_S / c.S) ** 2
    p2n = mod ** (2 * n)
    denom = 1 - p2n * np.cos(n * c.mu) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = n**2 * p2n * r2 * np.cos(c.nu + (n - 1) * c.mu) ** 2 / denom
    val = np.where(n == 0, 0.0, np.where(denom < tol.INDETERMINATE_DENOM, math.nan, val))
    return _out(val, N)


def best_rounds(values, rounds) -> int:
    """Round count at the maximum of ``values``; ties go to the smaller count."""
    values = np.asarray(values, dtype=float)
    rounds = np.asarray(rounds)
    return int(rounds[int(np.nanargmax(values))])


def count_sign_changes(values) -> int:
    v = np.asarray(values, dtype=float)
    v = v[v != 0]
    return int(np.sum(np.sign(v[1:]) != np.sign(v[:-1])))


def sigma_x_zero_count(c: ChannelParams, n_max: int) -> tuple[int, float]:
    """Zeros of the ``sigma_x`` sensitivity over ``N = 1 .. n_max``.

    The sensitivity vanishes where ``cos(nu + (N - 1) mu)`` changes sign.
    Returns the observed count of sign changes and the count ``n_max |mu| / pi``
    expected from the oscillation frequency.
    """
    _need_derivatives(c)
    n = np.arange(1, n_max + 1)
    observed = count_sign_changes(np.cos(c.nu + (n - 1) * c.mu))
    return observed, n_max * abs(c.mu) / math.pi
