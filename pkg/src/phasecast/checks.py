"""Registry of cross-checks run by ``phasecast validate``.

Every check returns a measured deviation; it passes when the deviation is
finite and does not exceed the registered tolerance.  Checks compare a
closed form or fast path against an independent oracle (Kraus evolution,
dense eigendecomposition, Monte Carlo, matrix powers).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import estimation as est
from . import settings as st
from .channel import (
    LIOUVILLE_SUPPORT,
    VmfParams,
    channel_params_vmf,
    choi_from_liouville,
    kraus_vmf,
    liouville_from_params,
    liouville_mc,
    make_rng,
    process_tomography,
)
from .linalg import (
    MAXIMALLY_MIXED,
    SIGMA_X,
    bloch_from_state,
    hermitian_eig,
    partial_trace,
    random_density_matrix,
    random_hermitian,
)

REFERENCE = VmfParams(kappa=1.0, phi=0.1)
PHI_GRID = (0.05, 0.1, 0.3, 1.0)
KAPPA_GRID = (0.5, 1.0, 2.0, 5.0)
VALIDATE_MC_SAMPLES = 1_000_000


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    run: Callable[[int], float]
    description: str = ""


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    seconds: float
    error: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.deviation) and self.deviation <= self.tolerance


REGISTRY: list[Check] = []


def register(name: str, tolerance: float, description: str = ""):
    def deco(fn):
        if any(c.name == name for c in REGISTRY):
            raise ValueError(f"duplicate check name {name!r}")
        REGISTRY.append(Check(name, tolerance, fn, description))
        return fn
    return deco


def _ref():
    return channel_params_vmf(REFERENCE)


# -- linalg ---------------------------------------------------------------

@register("eig-reconstruction", 1e-10 * 4, "Hermitian eigensolver reconstructs a random 4x4 matrix")
def _eig_reconstruction(seed):
    worst = 0.0
    for method in ("lapack", "jacobi"):
        m = random_hermitian(4, make_rng(seed))
        w, v = hermitian_eig(m, method=method)
        worst = max(worst, np.max(np.abs(v @ np.diag(w) @ v.conj().T - m)),
                    np.max(np.abs(v.conj().T @ v - np.eye(4))))
    return float(worst)


# -- channel --------------------------------------------------------------

@register("kraus-completeness", 1e-10, "sum K^dag K = 1 on a (phi, kappa) grid")
def _kraus_completeness(seed):
    worst = 0.0
    for kappa in (1e-4, 0.1, 0.5, 1, 2, 5, 20, 1e3):
        for phi in np.linspace(0, math.pi, 13):
            worst = max(worst, kraus_vmf(VmfParams(kappa, phi)).completeness_error())
    return worst


@register("kraus-vs-liouville", 1e-10, "Kraus action equals the parametric Liouville matrix on 50 random states")
def _kraus_vs_liouville(seed):
    rng = make_rng(seed)
    kraus = kraus_vmf(REFERENCE)
    k = liouville_from_params(_ref())
    worst = 0.0
    for _ in range(50):
        rho = random_density_matrix(2, rng)
        worst = max(worst, np.max(np.abs(kraus.apply(rho).reshape(4) - k @ rho.reshape(4))))
    return float(worst)


@register("kraus-vs-monte-carlo-choi", 5e-3, f"Choi matrices agree ({VALIDATE_MC_SAMPLES} samples)")
def _kraus_vs_mc(seed):
    k_mc = liouville_mc(REFERENCE, VALIDATE_MC_SAMPLES, make_rng(seed))
    return float(np.max(np.abs(choi_from_liouville(k_mc) - kraus_vmf(REFERENCE).choi())))


@register("liouville-structure", 1e-12, "sparsity pattern and unitality of the Liouville matrix")
def _liouville_structure(seed):
    k = kraus_vmf(REFERENCE).liouville()
    mask = np.ones((4, 4), dtype=bool)
    for i, j in LIOUVILLE_SUPPORT:
        mask[i, j] = False
    v = MAXIMALLY_MIXED.reshape(4)
    return float(max(np.max(np.abs(k[mask])), np.max(np.abs(k @ v - v))))


@register("phase-covariance", 1e-12, "Liouville matrix commutes with z rotations")
def _phase_covariance(seed):
    rng = make_rng(seed)
    k = liouville_from_params(_ref())
    worst = 0.0
    for xi in rng.uniform(0, 2 * math.pi, 20):
        r = np.diag([1, np.exp(-2j * xi), np.exp(2j * xi), 1])
        worst = max(worst, np.max(np.abs(k @ r - r @ k)))
    return float(worst)


@register("complete-positivity-grid", 0.0, "CP constraint violation over phi in [0, pi] and six kappas")
def _cp_grid(seed):
    worst = 0.0
    for kappa in (0.1, 0.5, 1, 2, 5, 20):
        for phi in np.linspace(0, math.pi, 25):
            c = channel_params_vmf(VmfParams(kappa, phi))
            worst = max(worst, c.lambda_par - 1 - 1e-12, 2 * c.lambda_perp - 1 - c.lambda_par - 1e-12)
    return max(worst, 0.0)


@register("contractivity", 1e-12, "Bloch vectors never grow under the channel")
def _contractivity(seed):
    rng = make_rng(seed)
    kraus = kraus_vmf(REFERENCE)
    worst = 0.0
    for _ in range(50):
        rho = random_density_matrix(2, rng)
        grow = np.linalg.norm(bloch_from_state(kraus.apply(rho))) - np.linalg.norm(bloch_from_state(rho))
        worst = max(worst, grow)
    return worst


@register("tomography-vs-params", 1e-8, "process tomography of the Kraus channel recovers its parameters")
def _tomography(seed):
    c = _ref()
    t = process_tomography(kraus_vmf(REFERENCE))
    return max(abs(t.lambda_par - c.lambda_par), abs(t.lambda_perp - c.lambda_perp), abs(t.g - c.g))


@register("semigroup-power", 1e-9, "N Kraus applications equal K^N for N <= 200")
def _semigroup(seed):
    kraus = kraus_vmf(REFERENCE)
    rho0 = random_density_matrix(2, make_rng(seed))
    rho = rho0
    for _ in range(200):
        rho = kraus.apply(rho)
    kn = np.linalg.matrix_power(kraus.liouville(), 200)
    return float(np.max(np.abs(rho.reshape(4) - kn @ rho0.reshape(4))))


@register("identity-at-zero-phase", 1e-8, "channel parameters at phi = 0 are (1, 1, 0)")
def _identity(seed):
    worst = 0.0
    for kappa in (0.5, 1, 2, 1e3):
        c = channel_params_vmf(VmfParams(kappa, 0.0))
        worst = max(worst, abs(c.lambda_par - 1), abs(c.lambda_perp - 1), abs(c.g))
    return worst


# -- sequential -----------------------------------------------------------

@register("sequential-closed-vs-eigen", 1e-6, "compact sequential QFI vs eigendecomposition, N <= 200")
def _sequential(seed):
    c = _ref()
    states = st.sequential_states(200, REFERENCE)
    oracle = np.array([est.qfi_eigen(s) for s in states[1:]])
    return float(np.max(np.abs(oracle - est.qfi_sequential_vmf(np.arange(1, 201), c))))


@register("sequential-general-vs-compact", 1e-10, "two sequential QFI forms agree on the vMF grid (relative)")
def _general_vs_compact(seed):
    n = np.arange(1, 501)
    worst = 0.0
    for phi in PHI_GRID:
        for kappa in KAPPA_GRID:
            c = channel_params_vmf(VmfParams(kappa, phi))
            a, b = est.qfi_sequential_general(n, c), est.qfi_sequential_vmf(n, c)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0))))
    return worst


@register("lower-bound-dominance", 1e-12, "f_N <= F_N on the vMF grid, N <= 500 (reports max excess)")
def _bound(seed):
    n = np.arange(1, 501)
    worst = 0.0
    for phi in PHI_GRID:
        for kappa in KAPPA_GRID:
            c = channel_params_vmf(VmfParams(kappa, phi))
            worst = max(worst, float(np.max(est.lower_bound_f(n, c) - est.qfi_sequential_vmf(n, c))))
    return max(worst, 0.0)


@register("eta-vs-matrix-power", 1e-6, "largest eigenvalue of (dK^N)^dag dK^N vs eta spectrum, N <= 200")
def _eta(seed):
    c = _ref()
    h = 1e-4
    ks = {o: kraus_vmf(REFERENCE.with_phi(REFERENCE.phi + o * h)).liouville() for o in est.FD_OFFSETS}
    powers = {o: np.eye(4, dtype=complex) for o in est.FD_OFFSETS}
    worst = 0.0
    for n in range(1, 201):
        powers = {o: ks[o] @ powers[o] for o in est.FD_OFFSETS}
        d = est.richardson_fd(powers, h)
        top = np.linalg.eigvalsh(d.conj().T @ d)[-1]
        worst = max(worst, abs(top - est.eta_eigenvalues(n, c).largest))
    return float(worst)


@register("optimal-rounds", 0.0, "n_opt_estimate and argmax f_N coincide; closed-form F_N argmax equals oracle argmax")
def _nopt(seed):
    c = _ref()
    n = np.arange(1, 301)
    f_arg = est.best_rounds(est.lower_bound_f(n, c), n)
    f_cl = est.best_rounds(est.qfi_sequential_vmf(n, c), n)
    oracle = [est.qfi_eigen(s) for s in st.sequential_states(300, REFERENCE)[1:]]
    return float(abs(est.n_opt_estimate(c) - f_arg) + abs(f_cl - est.best_rounds(oracle, n)))


@register("sigma-x-closed-vs-brute", 1e-8, "sigma_x sensitivity closed form vs evolved state, N <= 120")
def _sigma_x(seed):
    c = _ref()
    states = st.sequential_states(120, REFERENCE)
    brute = np.array([est.observable_sensitivity(s, SIGMA_X) for s in states[1:]])
    return float(np.max(np.abs(brute - est.sigma_x_sensitivity_closed(np.arange(1, 121), c))))


@register("sigma-x-oscillation", 1.0, "zero count over N <= 120 vs 120 |mu| / pi")
def _oscillation(seed):
    observed, expected = est.sigma_x_zero_count(_ref(), 120)
    return abs(observed - expected)


@register("sensitivity-hierarchy", 1e-9, "F^O <= I^O <= F for 20 random observables (max violation)")
def _hierarchy(seed):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(20):
        rho = random_density_matrix(2, rng)
        d = random_hermitian(2, rng)
        d -= np.trace(d) / 2 * np.eye(2)
        s = est.StateWithDerivative(rho, d)
        obs = random_hermitian(2, rng)
        f_o = est.observable_sensitivity(s, obs)
        i_o = est.classical_fisher(s, est.eigenprojectors(obs))
        q = est.qfi_eigen(s)
        worst = max(worst, f_o - i_o, i_o - q)
    return max(worst, 0.0)


@register("sld-residual", 1e-9, "SLD satisfies L rho + rho L = 2 drho and tr(rho L^2) = F")
def _sld(seed):
    s = st.sequential_states(10, REFERENCE)[10]
    L = est.sld(s)
    res = np.max(np.abs(L @ s.rho + s.rho @ L - 2 * s.drho))
    return float(max(res, abs(np.trace(s.rho @ L @ L).real - est.qfi_eigen(s)), abs(np.trace(s.rho @ L))))


@register("noiseless-heisenberg", 0.02, "relative deviation from 4 N^2 at kappa = 1e3, N <= 20")
def _noiseless(seed):
    n = np.arange(1, 21)
    c = channel_params_vmf(VmfParams(1e3, 0.1))
    return float(np.max(np.abs(est.qfi_sequential_vmf(n, c) / (4 * n**2) - 1)))


# -- ancilla --------------------------------------------------------------

@register("ancilla-closed-vs-eigen", 1e-6, "ancilla QFI closed form vs 4x4 eigendecomposition, N <= 60")
def _ancilla(seed):
    c = _ref()
    return max(abs(est.qfi_eigen(st.ancilla_state(n, REFERENCE)) - st.qfi_ancilla_closed(n, c))
               for n in range(1, 61))


@register("ancilla-dominates-sequential", 1e-9, "sequential F_N minus ancilla F_N, N <= 500 (max)")
def _ancilla_dom(seed):
    n = np.arange(1, 501)
    c = _ref()
    return max(float(np.max(est.qfi_sequential_vmf(n, c) - st.qfi_ancilla_closed(n, c))), 0.0)


@register("ancilla-marginals", 1e-10, "reduced states of the probe-ancilla pair stay maximally mixed")
def _marginals(seed):
    worst = 0.0
    for n in (0, 1, 5, 50, 200):
        rho = st.evolve_with_ancilla(n, REFERENCE).rho
        for q in (0, 1):
            worst = max(worst, np.max(np.abs(partial_trace(rho, q, 2) - MAXIMALLY_MIXED)))
    return float(worst)


@register("bell-closed-vs-brute", 1e-8, "Bell-observable sensitivity from matrix elements vs evolved pair")
def _bell(seed):
    c = _ref()
    return max(abs(st.bell_observable_sensitivity(n, REFERENCE) - st.bell_sensitivity_closed(n, c))
               for n in range(1, 61))


# -- parallel -------------------------------------------------------------

@register("parallel-closed-vs-eigen", 1e-6, "GHZ QFI closed form vs dense eigendecomposition, N = 2..8")
def _parallel(seed):
    c = _ref()
    return max(abs(est.qfi_eigen(st.ghz_state(n, REFERENCE)) - st.qfi_parallel_closed(n, c))
               for n in range(2, 9))


@register("xstate-vs-kron", 1e-10, "X-state formula vs Kraus tensor-product evolution, N = 1..4")
def _xstate(seed):
    c = _ref()
    kraus = kraus_vmf(REFERENCE)
    return max(float(np.max(np.abs(st.ghz_output_state(n, c).to_dense() - st.ghz_state_kron(n, kraus))))
               for n in range(1, 5))


@register("xstate-eigensystem", 1e-10, "structured X-state eigenvalues vs dense solver, N <= 8")
def _xeig(seed):
    c = _ref()
    worst = 0.0
    for n in range(1, 9):
        x = st.ghz_output_state(n, c)
        w, v = st.xstate_eigensystem(x)
        dense = x.to_dense()
        worst = max(worst, np.max(np.abs(w - hermitian_eig(dense)[0])),
                    np.max(np.abs(dense @ v - v * w)))
    return float(worst)


@register("separable-equivalence", 1e-8, "sigma_x, sigma_x^2 (ancilla) and sigma_x^N (GHZ) agree, N <= 60")
def _separable(seed):
    c = _ref()
    n = np.arange(1, 61)
    closed = est.sigma_x_sensitivity_closed(n, c)
    states = st.sequential_states(60, REFERENCE)
    worst = 0.0
    for i, k in enumerate(n):
        single = est.observable_sensitivity(states[k], SIGMA_X)
        anc = st.separable_sensitivity_ancilla(int(k), REFERENCE)
        ghz = st.sigma_x_tensor_sensitivity(int(k), c)
        vals = (single, anc, ghz, closed[i])
        worst = max(worst, max(vals) - min(vals))
    return float(worst)


@register("parallel-linear-scaling", 0.05, "|F(1600) / F(800) - 2| for the GHZ probe")
def _linear(seed):
    c = _ref()
    return abs(st.qfi_parallel_closed(1600, c) / st.qfi_parallel_closed(800, c) - 2)


@register("settings-coincide-at-one", 1e-9, "sequential and GHZ QFIs agree at N = 1")
def _n1(seed):
    c = _ref()
    return abs(est.qfi_sequential_vmf(1, c) - st.qfi_parallel_closed(1, c))


@register("ancilla-single-use", 1e-6, "one channel use on a Bell pair gives QFI 4 (closed form and oracle)")
def _ancilla_one(seed):
    worst = 0.0
    for phi, kappa in ((0.1, 1.0), (0.3, 0.5), (1.0, 2.0)):
        p = VmfParams(kappa, phi)
        worst = max(worst, abs(st.qfi_ancilla_closed(1, channel_params_vmf(p)) - 4),
                    abs(est.qfi_eigen(st.ancilla_state(1, p)) - 4))
    return worst


def run_checks(seed: int = 0, overrides: dict[str, float] | None = None, only=None) -> list[CheckResult]:
    """Run registered checks in registration order.

    ``overrides`` maps check names to replacement tolerances (used to
    exercise the failure path); unknown names raise ``KeyError``.
    """
    overrides = dict(overrides or {})
    names = {c.name for c in REGISTRY}
    unknown = set(overrides) - names
    if unknown:
        raise KeyError(f"unknown check name(s): {', '.join(sorted(unknown))}")
    results = []
    for check in REGISTRY:
        if only is not None and check.name not in only:
            continue
        t0 = time.perf_counter()
        error = ""
        try:
            dev = float(check.run(seed))
        except (ValueError, ArithmeticError) as exc:  # a crash counts as a failure
            dev, error = math.inf, str(exc)
        results.append(CheckResult(check.name, dev, overrides.get(check.name, check.tolerance),
                                   time.perf_counter() - t0, error))
    return results
