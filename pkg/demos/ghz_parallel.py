"""N probes in a GHZ state, each through one use of the channel.

The QFI splits into a corner-block part, which rises and dies off like the sequential
curve, and a diagonal part that keeps growing linearly.
"""
from phasecast.channel import VmfParams, channel_params_vmf
from phasecast.estimation import qfi_eigen, qfi_sequential_vmf
from phasecast.settings import ghz_state, qfi_parallel_closed, qfi_parallel_terms

p = VmfParams(1.0, 0.1)
c = channel_params_vmf(p)

print("closed form against the dense 2^N state")
for n in range(2, 9):
    print(f"  N={n}: {qfi_parallel_closed(n, c):.10f}  dense {qfi_eigen(ghz_state(n, p)):.10f}")

print("\nN      corner     diagonal   total      sequential")
for n in (10, 50, 84, 143, 200, 286, 400, 800, 1600):
    corner, diag = qfi_parallel_terms(n, c)
    print(f"{n:<6d} {corner:<10.2f} {diag:<10.2f} {corner + diag:<10.2f} {qfi_sequential_vmf(n, c):.2f}")

print(f"\nF(1600)/F(800) = {qfi_parallel_closed(1600, c) / qfi_parallel_closed(800, c):.4f}")
