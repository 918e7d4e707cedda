"""Estimation quantities from a Monte Carlo channel instead of the closed form.

Same seed, same numbers: the MC path is deterministic and uses common random
numbers across the phase stencil so derivatives are not swamped by sampling noise.
"""
import numpy as np

from phasecast.channel import VmfParams, channel_params_mc, channel_params_vmf, mc_statistical_tol
from phasecast.estimation import n_opt_estimate, qfi_sequential_vmf

p = VmfParams(1.0, 0.1)
exact = channel_params_vmf(p)
n = np.arange(1, 201)

for samples in (10**4, 10**5, 10**6):
    c = channel_params_mc(p, samples, seed=11)
    F = qfi_sequential_vmf(n, c)
    print(f"{samples:>8d} samples: lambda_perp err {abs(c.lambda_perp - exact.lambda_perp):.1e} "
          f"(tol {mc_statistical_tol(samples):.1e}), n_opt {n_opt_estimate(c)}, peak F {F.max():.1f} at N={n[F.argmax()]}")

print(f"   exact        : n_opt {n_opt_estimate(exact)}, peak F {qfi_sequential_vmf(n, exact).max():.1f}")
