"""Walk through the noisy phase channel at one point and three representations of it.

Run: python3 demos/channel_tour.py [phi] [kappa]
"""
import sys

import numpy as np

from phasecast.channel import (
    VmfParams, channel_params_vmf, choi_from_liouville, kraus_vmf, liouville_mc, make_rng, process_tomography,
)

phi = float(sys.argv[1]) if len(sys.argv) > 1 else 0.1
kappa = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
p = VmfParams(kappa, phi)
c = channel_params_vmf(p)

print(f"phi={phi} kappa={kappa}")
print(f"  lambda_par  = {c.lambda_par:.12f}   (z contraction)")
print(f"  lambda_perp = {c.lambda_perp:.12f}   (equatorial contraction)")
print(f"  g           = {c.g:.12f}   (effective rotation)")
print(f"  S = {c.S:.12f}")

kraus = kraus_vmf(p)
print("\nKraus completeness error:", np.max(np.abs(sum(k.conj().T @ k for k in kraus.operators) - np.eye(2))))

# the same channel three ways: closed-form Kraus, Monte Carlo average, tomography of the MC map
for samples in (10**3, 10**5, 10**6):
    mc = liouville_mc(p, samples, make_rng(7))
    err = np.max(np.abs(choi_from_liouville(mc) - kraus.choi()))
    print(f"MC with {samples:>8d} samples: Choi deviation {err:.2e}")

back = process_tomography(kraus.liouville())
print("\ntomography recovers lambda_perp to", abs(back.lambda_perp - c.lambda_perp))
