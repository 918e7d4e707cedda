"""A passive ancilla entangled with the probe, and what a Bell-basis observable recovers."""
import numpy as np

from phasecast.channel import VmfParams, channel_params_vmf
from phasecast.estimation import qfi_sequential_vmf, sigma_x_sensitivity_closed
from phasecast.settings import bell_sensitivity_closed, qfi_ancilla_closed

c = channel_params_vmf(VmfParams(1.0, 0.1))
n = np.arange(1, 301)
seq, anc = qfi_sequential_vmf(n, c), qfi_ancilla_closed(n, c)
bell, sx = bell_sensitivity_closed(n, c), sigma_x_sensitivity_closed(n, c)

print("N     seq QFI    anc QFI    Bell obs   sx(x)sx")
for k in (1, 2, 10, 50, 84, 100, 150, 200, 300):
    i = k - 1
    print(f"{k:<5d} {seq[i]:<10.3f} {anc[i]:<10.3f} {bell[i]:<10.3f} {sx[i]:.3f}")

print(f"\nbest single probe {seq.max():.2f} at N={n[seq.argmax()]}; with ancilla {anc.max():.2f} at N={n[anc.argmax()]}")
