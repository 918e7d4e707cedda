"""Why a fixed sigma_x measurement keeps losing and regaining the signal.

The Bloch vector spins by -mu per round while shrinking. The SLD direction follows it,
and the sigma_x sensitivity drops to zero each time the two become perpendicular.
"""
import math

import numpy as np

from phasecast.channel import VmfParams, channel_params_vmf
from phasecast.estimation import qfi_sequential_vmf, sigma_x_sensitivity_closed, sigma_x_zero_count
from phasecast.settings import bloch_trajectory

p = VmfParams(1.0, 0.1)
c = channel_params_vmf(p)
rows = bloch_trajectory(120, p)
n = np.arange(1, 121)
sx, F = sigma_x_sensitivity_closed(n, c), qfi_sequential_vmf(n, c)

print(f"mu = {c.mu:.6f}, so a half turn takes {math.pi / abs(c.mu):.1f} rounds")
print("N     |r|      sld angle   F^sx/F")
for k, r, angle in rows[5::10]:
    print(f"{k:<5d} {np.linalg.norm(r):<8.4f} {angle:<+10.4f}  {sx[k - 1] / F[k - 1]:.4f}")

observed, expected = sigma_x_zero_count(c, 120)
print(f"\nzeros of F^sx up to N=120: {observed} (|mu| N / pi = {expected:.2f})")
