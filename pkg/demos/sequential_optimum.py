"""How many rounds should a single probe see before noise wins?

Compares the exact QFI curve with the cheap lower bound and its closed-form optimum,
then shows the optimum across a small (phi, kappa) grid.
"""
import numpy as np

from phasecast.channel import VmfParams, channel_params_vmf
from phasecast.estimation import f_at_nopt, lower_bound_f, n_opt_estimate, qfi_sequential_vmf

c = channel_params_vmf(VmfParams(1.0, 0.1))
n = np.arange(1, 301)
F = qfi_sequential_vmf(n, c)
f = lower_bound_f(n, c)

print("N     F_N        f_N")
for k in (1, 10, 40, 80, 83, 84, 85, 120, 200, 300):
    print(f"{k:<5d} {F[k - 1]:<10.4f} {f[k - 1]:.4f}")

print(f"\nargmax F = {n[np.argmax(F)]}, argmax f = {n[np.argmax(f)]}, estimate = {n_opt_estimate(c)}")
print(f"lambda_perp-only part of f at the estimate = {f_at_nopt(c):.4f} (full f there = {f[n_opt_estimate(c) - 1]:.4f})")

print("\nestimated optimum over the grid")
kappas = (0.1, 0.5, 1, 2, 5, 20)
print("phi\\kappa " + " ".join(f"{k:>8g}" for k in kappas))
for phi in (0.01, 0.05, 0.1, 0.3, 1.0):
    row = [n_opt_estimate(channel_params_vmf(VmfParams(k, phi))) for k in kappas]
    print(f"{phi:<9g} " + " ".join(f"{v:>8d}" for v in row))
