"""
A coarse stability map
======================

The leading eigenvalue real part over the weight plane, drawn in text:
'.' stable, '#' unstable. The map also shows which mode goes unstable
first ('s' synchronous, 'a' asynchronous) just above the boundary.
"""
import numpy as np

from wcnet.connectivity import uni_ring
from wcnet.kernels import NoDelay
from wcnet.model import preset_params
from wcnet.spectral import stability_grid

conn = uni_ring(10)
w_ie = np.linspace(0.0, 4.0, 41)
w_e = np.linspace(1.2, 2.6, 29)
best, worst_rk = stability_grid(preset_params(), NoDelay(), conn, w_ie, w_e)

# rows are w_e from top (strong) to bottom (weak)
for j in range(w_e.size - 1, -1, -1):
    row = []
    for i in range(w_ie.size):
        if best[i, j] < 0:
            row.append(".")
        elif j > 0 and best[i, j - 1] < 0:
            row.append("s" if abs(worst_rk[i, j] - 1.0) < 1e-9 else "a")
        else:
            row.append("#")
    print(f"{w_e[j]:4.2f} " + "".join(row))
print("     " + "w_ie 0 .. 4".center(w_ie.size))

# %%
# The 'a' cells sit between w_ie of about 0.7 and 1.8, the window the
# Hopf-curve demo reports for the same ring.
