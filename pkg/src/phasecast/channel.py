"""The noisy phase-imprinting qubit channel.

A phase ``phi`` is imprinted by ``U_n = exp(-i phi n.sigma)`` where the axis
``n`` is drawn from a von Mises-Fisher distribution of concentration
``kappa`` around the z axis.  The averaged map is unital and
phase-covariant; it is available three ways here:

* Monte Carlo over sampled axes (:func:`liouville_mc`, :func:`apply_channel_mc`),
* a closed-form set of four Kraus operators (:func:`kraus_vmf`),
* the 4x4 Liouville matrix built from ``(lambda_par, lambda_perp, g)``
  (:func:`liouville_from_params`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import tolerances as tol
from .linalg import (
    IDENTITY,
    KET_0,
    MAXIMALLY_MIXED,
    PLUS_STATE,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    bloch_from_state,
    projector,
)

LIOUVILLE_SUPPORT = ((0, 0), (0, 3), (3, 0), (3, 3), (1, 1), (2, 2))


class NumericalWarning(UserWarning):
    """Raised (as a warning) when a numerical procedure is near its limits."""


@dataclass(frozen=True)
class VmfParams:
    kappa: float
    phi: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")

    def with_phi(self, phi: float) -> "VmfParams":
        return replace(self, phi=phi)


@dataclass(frozen=True)
class ChannelParams:
    """Parameters of a unital phase-covariant qubit channel at one phase.

    ``S = lambda_perp * exp(-i g)`` is the factor multiplying the coherence
    ``rho_01`` in one application; ``mu = arg S`` and ``nu = arg dS/dphi``.
    Derivative fields are ``nan`` when the channel was obtained without a
    phase family (e.g. single-shot tomography).
    """

    lambda_par: float
    lambda_perp: float
    g: float
    d_lambda_par: float = math.nan
    d_lambda_perp: float = math.nan
    d_g: float = math.nan
    phi: float | None = None
    kappa: float | None = None
    S: complex = field(init=False)
    d_S: complex = field(init=False)
    mu: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self):
        s = self.lambda_perp * np.exp(-1j * self.g)
        ds = (self.d_lambda_perp - 1j * self.lambda_perp * self.d_g) * np.exp(-1j * self.g)
        object.__setattr__(self, "S", complex(s))
        object.__setattr__(self, "d_S", complex(ds))
        object.__setattr__(self, "mu", float(np.angle(s)))
        object.__setattr__(self, "nu", float(np.angle(ds)) if np.isfinite(ds) else math.nan)

    @property
    def has_derivatives(self) -> bool:
        return all(np.isfinite([self.d_lambda_par, self.d_lambda_perp, self.d_g]))

    def check_cp(self, atol: float = tol.CP_TOL) -> None:
        """Raise ``ValueError`` unless ``lambda_par <= 1`` and ``2 lambda_perp <= 1 + lambda_par``."""
        if self.lambda_par > 1 + atol:
            raise ValueError(f"not completely positive: lambda_par = {self.lambda_par:.15g} > 1")
        if 2 * self.lambda_perp > 1 + self.lambda_par + atol:
            raise ValueError(
                f"not completely positive: 2*lambda_perp = {2 * self.lambda_perp:.15g} "
                f"> 1 + lambda_par = {1 + self.lambda_par:.15g}"
            )
        if self.lambda_perp < -atol:
            raise ValueError("lambda_perp must be non-negative")


IDENTITY_PARAMS = ChannelParams(1.0, 1.0, 0.0, 0.0, 0.0, 0.0)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator from a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators derived deterministically from ``seed``."""
    children = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


# -- small special functions --------------------------------------------

def langevin(kappa):
    """``coth(kappa) - 1/kappa``, the mean of cos(theta) under the vMF law."""
    k = np.asarray(kappa, dtype=float)
    small = np.abs(k) < 1e-2
    ks = np.where(small, k, 1.0)
    big = 1 / np.tanh(np.where(small, 1.0, k)) - 1 / np.where(small, 1.0, k)
    series = ks / 3 - ks**3 / 45 + 2 * ks**5 / 945
    out = np.where(small, series, big)
    return float(out) if out.ndim == 0 else out


def _sinh_minus_x(k: float) -> float:
    if k < 0.1:
        # sum of x^(2n+1)/(2n+1)! for n >= 1
        term, total, n = k**3 / 6, 0.0, 1
        while term > 1e-18 * max(total, 1e-300):
            total += term
            term *= k * k / ((2 * n + 2) * (2 * n + 3))
            n += 1
        return total
    return math.sinh(k) - k if k < 700 else math.inf


def _one_minus_x_over_sinh_sq(k: float) -> float:
    """``1 - (k / sinh k)^2`` without cancellation or overflow."""
    if k < 0.1:
        s = math.sinh(k)
        return _sinh_minus_x(k) * (s + k) / (s * s)
    ratio = 2 * k * math.exp(-k) / -math.expm1(-2 * k)
    return 1 - ratio * ratio


# -- von Mises-Fisher ------------------------------------------------------

def vmf_density(theta, kappa: float):
    """vMF density on the unit sphere, w.r.t. ``sin(theta) dtheta dphi``."""
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    theta = np.asarray(theta, dtype=float)
    if kappa == 0:
        return np.full_like(theta, 1 / (4 * np.pi))
    # kappa e^{kappa cos} / (4 pi sinh kappa) written with e^{-kappa} scaling
    out = kappa * np.exp(kappa * (np.cos(theta) - 1)) / (2 * np.pi * -np.expm1(-2 * kappa))
    return out


def sample_vmf(kappa: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Unit vectors drawn from the vMF distribution around +z.

    ``cos(theta)`` is sampled by inverting its CDF; the azimuth is uniform.
    Returns shape ``(3,)`` when ``size`` is None, else ``(size, 3)``.
    """
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    n = 1 if size is None else int(size)
    u = rng.random(n)
    if kappa == 0:
        cos_t = 2 * u - 1
    else:
        cos_t = 1 + np.log(u + (1 - u) * np.exp(-2 * kappa)) / kappa
    cos_t = np.clip(cos_t, -1.0, 1.0)
    sin_t = np.sqrt(1 - cos_t**2)
    az = 2 * np.pi * rng.random(n)
    axes = np.stack([sin_t * np.cos(az), sin_t * np.sin(az), cos_t], axis=-1)
    return axes[0] if size is None else axes


def generator_unitary(n, phi: float) -> np.ndarray:
    """``exp(-i phi n.sigma) = cos(phi) 1 - i sin(phi) n.sigma`` for a unit axis ``n``."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,):
        raise ValueError("rotation axis must be a 3-vector")
    if abs(np.linalg.norm(n) - 1) > tol.UNIT_AXIS_TOL:
        raise ValueError(f"rotation axis must be a unit vector (|n| = {np.linalg.norm(n):.15g})")
    return np.cos(phi) * IDENTITY - 1j * np.sin(phi) * (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z)


def _unitaries(axes: np.ndarray, phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    nx, ny, nz = axes[:, 0], axes[:, 1], axes[:, 2]
    u = np.empty((len(axes), 2, 2), dtype=complex)
    u[:, 0, 0] = c - 1j * s * nz
    u[:, 0, 1] = -1j * s * (nx - 1j * ny)
    u[:, 1, 0] = -1j * s * (nx + 1j * ny)
    u[:, 1, 1] = c + 1j * s * nz
    return u


def liouville_mc(p: VmfParams, samples: int, rng: np.random.Generator | None = None,
                 axes: np.ndarray | None = None, chunk: int = 1_000_000) -> np.ndarray:
    """Monte Carlo estimate of the Liouville matrix, ``mean(kron(U, conj U))``.

    Pass ``axes`` to reuse a fixed sample of rotation axes (common random
    numbers), which makes the estimate a smooth function of ``phi``.
    """
    if axes is None:
        if samples <= 0:
            raise ValueError("number of Monte Carlo samples must be positive")
        if rng is None:
            raise ValueError("a random generator is required when axes are not given")
        total = np.zeros((2, 2, 2, 2), dtype=complex)
        remaining = samples
        while remaining > 0:
            m = min(chunk, remaining)
            u = _unitaries(sample_vmf(p.kappa, rng, m), p.phi)
            total += np.einsum("nij,nkl->ikjl", u, u.conj())
            remaining -= m
        return total.reshape(4, 4) / samples
    axes = np.asarray(axes, dtype=float)
    if len(axes) == 0:
        raise ValueError("number of Monte Carlo samples must be positive")
    total = np.zeros((2, 2, 2, 2), dtype=complex)
    for start in range(0, len(axes), chunk):
        u = _unitaries(axes[start:start + chunk], p.phi)
        total += np.einsum("nij,nkl->ikjl", u, u.conj())
    return total.reshape(4, 4) / len(axes)


def apply_channel_mc(rho, p: VmfParams, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Average of ``U_n rho U_n^dag`` over ``samples`` sampled axes."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("apply_channel_mc acts on single-qubit states")
    if samples <= 0:
        raise ValueError("number of Monte Carlo samples must be positive")
    out = (liouville_mc(p, samples, rng) @ rho.reshape(4)).reshape(2, 2)
    return (out + out.conj().T) / 2


# -- Kraus representation ----------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("a Kraus set needs at least one operator")
        object.__setattr__(self, "operators", ops)
        dev = self.completeness_error()
        if dev > tol.KRAUS_COMPLETENESS_TOL:
            raise ValueError(f"Kraus operators are not complete (max deviation {dev:.3e})")

    def completeness_error(self) -> float:
        d = self.operators[0].shape[0]
        total = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(total - np.eye(d))))

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def liouville(self) -> np.ndarray:
        return sum(np.kron(k, k.conj()) for k in self.operators)

    def choi(self) -> np.ndarray:
        return choi_from_liouville(self.liouville())

    def __iter__(self):
        return iter(self.operators)

    def __len__(self):
        return len(self.operators)


def choi_from_liouville(k) -> np.ndarray:
    """Choi matrix ``(Lambda (x) 1)|Psi+><Psi+|`` from a row-major Liouville matrix."""
    k = np.asarray(k, dtype=complex)
    d = int(round(math.sqrt(k.shape[0])))
    # K[(a b),(i j)] = <a|Lambda(|i><j|)|b>;  Choi[(a i),(b j)] = K[(a b),(i j)] / d
    return k.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d) / d


def _vmf_abc(p: VmfParams):
    """The functions A, B (real) and C (complex) of kappa and phi.

    With ``L = kappa coth kappa - 1`` the numerator under the square root in
    C equals ``2 |den|^2`` where ``den`` is its denominator, so C reduces to
    ``sqrt(2) conj(den) / |den|``: a pure phase times ``sqrt(2)``.  Written
    this way nothing overflows at large ``kappa`` and nothing cancels at
    small ``kappa``.
    """
    k, phi = float(p.kappa), float(p.phi)
    if not k > 0:
        raise ValueError("the closed-form Kraus set needs kappa > 0 (use kappa = 1e-4 as a uniform proxy)")
    s2, sin2, cos2 = math.sin(phi) ** 2, math.sin(2 * phi), math.cos(2 * phi)
    kl = k * langevin(k)                        # L
    a = k * k - 2 * s2 * kl
    q = _one_minus_x_over_sinh_sq(k)            # 1 - (kappa / sinh kappa)^2
    b = 2 * k * abs(sin2) * math.sqrt(max(q, 0.0))
    den = complex(k * k * cos2 + 2 * s2 * kl, k * kl * sin2)
    mod = abs(den)
    if not math.isfinite(mod) or mod < 1e-300:
        raise ValueError(f"C denominator vanishes at kappa={k}, phi={phi}")
    return a, b, math.sqrt(2) * den.conjugate() / mod


def kraus_vmf(p: VmfParams) -> KrausSet:
    """Four closed-form Kraus operators of the vMF channel (needs ``kappa > 0``)."""
    a, b, c = _vmf_abc(p)
    k = float(p.kappa)
    lower = 2 * a - b
    if lower < 0:
        if lower < -tol.KRAUS_SQRT_CLAMP_TOL * max(2 * a, 1.0):
            raise ValueError(f"2A - B = {lower:.3e} is negative beyond rounding")
        warnings.warn(f"clamping 2A - B = {lower:.3e} to zero", NumericalWarning, stacklevel=2)
        lower = 0.0
    rp, rm = math.sqrt(2 * a + b), math.sqrt(lower)
    k11_3 = (rp + rm) / (2 * math.sqrt(2) * k)
    # (rp - rm) rewritten to avoid cancellation when b << a
    k11_4 = (2 * b / (rp + rm) if rp + rm > 0 else 0.0) / (2 * math.sqrt(2) * k)
    off = math.sqrt(2) * math.sin(p.phi) / k * math.sqrt(max(k * langevin(k), 0.0))
    k1 = np.array([[0, 0], [off, 0]], dtype=complex)
    k2 = np.array([[0, off], [0, 0]], dtype=complex)
    k3 = np.array([[c / math.sqrt(2) * k11_3, 0], [0, k11_3]], dtype=complex)
    k4 = np.array([[-c / math.sqrt(2) * k11_4, 0], [0, k11_4]], dtype=complex)
    return KrausSet((k1, k2, k3, k4))


def apply_kraus(rho, kraus: KrausSet) -> np.ndarray:
    return kraus.apply(rho)


def _vmf_lambda_par_and_s(phi: float, kappa: float) -> np.ndarray:
    p = VmfParams(kappa, phi)
    a, b, c = _vmf_abc(p)
    k = float(kappa)
    lam_par = 1 - 4 * math.sin(phi) ** 2 * langevin(k) / k
    s = math.sqrt(max((2 * a - b), 0.0) * (2 * a + b)) / (2 * math.sqrt(2) * k * k) * c
    return np.array([lam_par, s], dtype=complex)


def channel_params_vmf(p: VmfParams) -> ChannelParams:
    """``(lambda_par, lambda_perp, g)`` of the vMF channel and their phi-derivatives."""
    lam_par, s = _vmf_lambda_par_and_s(p.phi, p.kappa)
    d_lam_par, d_s = d_dphi(lambda x: _vmf_lambda_par_and_s(x, p.kappa), p.phi)
    return _params_from_s(lam_par.real, s, d_lam_par.real, d_s, phi=p.phi, kappa=p.kappa)


def _params_from_s(lam_par, s, d_lam_par, d_s, phi=None, kappa=None) -> ChannelParams:
    lam_perp = abs(s)
    ratio = d_s / s if lam_perp > 0 else math.nan
    c = ChannelParams(
        lambda_par=float(lam_par),
        lambda_perp=float(lam_perp),
        g=float(-np.angle(s)),
        d_lambda_par=float(d_lam_par),
        d_lambda_perp=float(lam_perp * ratio.real) if lam_perp > 0 else math.nan,
        d_g=float(-ratio.imag) if lam_perp > 0 else math.nan,
        phi=phi,
        kappa=kappa,
    )
    c.check_cp()
    return c


def liouville_from_params(c: ChannelParams) -> np.ndarray:
    """The 4x4 Liouville matrix acting on row-major vectorized states."""
    c.check_cp()
    lp = c.lambda_par
    s = c.lambda_perp * np.exp(-1j * c.g)
    return 0.5 * np.array(
        [
            [1 + lp, 0, 0, 1 - lp],
            [0, 2 * s, 0, 0],
            [0, 0, 2 * np.conj(s), 0],
            [1 - lp, 0, 0, 1 + lp],
        ],
        dtype=complex,
    )


def liouville_derivative(c: ChannelParams) -> np.ndarray:
    """Entry-wise phi-derivative of :func:`liouville_from_params`."""
    if not c.has_derivatives:
        raise ValueError("channel parameters carry no derivatives")
    dl = c.d_lambda_par
    return 0.5 * np.array(
        [[dl, 0, 0, -dl], [0, 2 * c.d_S, 0, 0], [0, 0, 2 * np.conj(c.d_S), 0], [-dl, 0, 0, dl]],
        dtype=complex,
    )


def bloch_map(c: ChannelParams) -> np.ndarray:
    """Real 3x3 distortion matrix acting on Bloch vectors."""
    cg, sg = math.cos(c.g), math.sin(c.g)
    lt = c.lambda_perp
    return np.array([[lt * cg, -lt * sg, 0.0], [lt * sg, lt * cg, 0.0], [0.0, 0.0, c.lambda_par]])


def as_state_map(channel) -> Callable[[np.ndarray], np.ndarray]:
    """Normalize the accepted channel descriptions to a ``rho -> rho`` callable."""
    if isinstance(channel, ChannelParams):
        k = liouville_from_params(channel)
        return lambda rho: (k @ np.asarray(rho, dtype=complex).reshape(4)).reshape(2, 2)
    if isinstance(channel, KrausSet):
        return channel.apply
    if isinstance(channel, VmfParams):
        return kraus_vmf(channel).apply
    if isinstance(channel, np.ndarray) and channel.shape == (4, 4):
        return lambda rho: (channel @ np.asarray(rho, dtype=complex).reshape(4)).reshape(2, 2)
    if callable(channel):
        return channel
    raise TypeError(f"cannot interpret {type(channel).__name__} as a qubit channel")


def process_tomography(channel, atol: float = tol.COVARIANCE_TOL) -> ChannelParams:
    """Recover ``(lambda_par, lambda_perp, g)`` from a black-box qubit channel.

    ``lambda_par`` is read from the z component of the image of ``|0><0|``,
    ``lambda_perp`` and ``g`` from the image of ``|+><+|``.  Unitality and
    phase covariance are checked on a few probe states first; the returned
    parameters carry no derivatives (see :func:`params_from_family`).
    """
    apply = as_state_map(channel)
    checks = {}
    checks["unitality"] = np.max(np.abs(apply(MAXIMALLY_MIXED) - MAXIMALLY_MIXED))
    img0 = apply(projector(KET_0))
    img_plus = apply(PLUS_STATE)
    r0 = bloch_from_state(img0)
    rp = bloch_from_state(img_plus)
    checks["z-image stays on axis"] = np.hypot(r0[0], r0[1])
    checks["equatorial image stays equatorial"] = abs(rp[2])
    s = complex(rp[0] - 1j * rp[1])
    for xi in (0.37, 1.3, 2.9):
        rot = np.diag([np.exp(-1j * xi), np.exp(1j * xi)])
        lhs = apply(rot @ PLUS_STATE @ rot.conj().T)
        rhs = rot @ img_plus @ rot.conj().T
        checks[f"covariance xi={xi}"] = np.max(np.abs(lhs - rhs))
    worst = max(checks, key=checks.get)
    if checks[worst] > atol:
        raise ValueError(
            f"channel is not unital phase-covariant: {worst} deviates by {checks[worst]:.3e} (tolerance {atol:.1e})"
        )
    c = ChannelParams(float(r0[2]), abs(s), float(-np.angle(s)))
    c.check_cp(atol=max(tol.CP_TOL, atol))
    return c


def params_from_family(family: Callable[[float], object], phi: float,
                       atol: float = tol.COVARIANCE_TOL) -> ChannelParams:
    """Tomographic channel parameters plus numeric phi-derivatives.

    ``family(phi)`` must return any channel accepted by :func:`as_state_map`.
    """
    def stacked(x):
        c = process_tomography(family(x), atol=atol)
        return np.array([c.lambda_par, c.S], dtype=complex)

    lam_par, s = stacked(phi)
    d_lam_par, d_s = d_dphi(stacked, phi)
    return _params_from_s(lam_par.real, s, d_lam_par.real, d_s, phi=phi)


def mc_statistical_tol(samples: int) -> float:
    """Covariance/CP tolerance for a Monte Carlo channel estimate (ten standard errors)."""
    return max(tol.COVARIANCE_TOL, 10 / math.sqrt(samples))


def channel_params_mc(p: VmfParams, samples: int, seed: int) -> ChannelParams:
    """Channel parameters estimated from ``samples`` Monte Carlo rotation axes.

    Every phase in the derivative stencil re-draws the axes from the same
    seed (common random numbers), so the estimate is smooth in ``phi`` and
    its derivatives are meaningful.
    """
    if samples <= 0:
        raise ValueError("number of Monte Carlo samples must be positive")

    def family(x):
        return liouville_mc(p.with_phi(x), samples, make_rng(seed))

    c = params_from_family(family, p.phi, atol=mc_statistical_tol(samples))
    return replace(c, kappa=p.kappa)


# -- numeric differentiation ---------------------------------------------

def _central4(fn, x, h, unwrap):
    pts = np.array([x - 2 * h, x - h, x + h, x + 2 * h])
    vals = [np.asarray(fn(p)) for p in pts]
    centre = np.asarray(fn(x))
    if unwrap:
        seq = np.unwrap(np.array([vals[0], vals[1], centre, vals[2], vals[3]]), axis=0)
        vals = [seq[0], seq[1], seq[3], seq[4]]
    return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h), centre


def d_dphi(fn: Callable, phi: float, h: float | None = None, unwrap: bool = False):
    """Fourth-order central difference of ``fn`` at ``phi``.

    ``fn`` may return a real or complex scalar or array.  The step starts at
    ``h`` (default ``1e-3 * max(1, |phi|)``) and is halved until two
    successive estimates agree to 1e-7 relative; disagreement above 1e-5
    after the last try emits a :class:`NumericalWarning`.  Set ``unwrap`` for
    phase-valued functions so branch cuts inside the stencil are removed.
    """
    h = 1e-3 * max(1.0, abs(phi)) if h is None else float(h)
    prev, centre = _central4(fn, phi, h, unwrap)
    scale = max(float(np.max(np.abs(centre))), 1.0)
    best, best_err = prev, math.inf
    for _ in range(4):
        h /= 2
        cur, _ = _central4(fn, phi, h, unwrap)
        err = float(np.max(np.abs(cur - prev))) / max(float(np.max(np.abs(cur))), scale)
        if err < best_err:
            best, best_err = cur, err
        if err <= tol.DERIV_STABLE_RTOL:
            break
        prev = cur
    if best_err > tol.DERIV_FLAG_RTOL:
        warnings.warn(
            f"numeric derivative unstable under step halving (relative change {best_err:.2e})",
            NumericalWarning,
            stacklevel=2,
        )
    return best if np.ndim(best) else best[()]
