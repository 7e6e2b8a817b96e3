"""
Green's function of a sloping bed
=================================

Over a bed whose depth varies only with x, the outgoing point-source
solution is built from one-dimensional problems in x, one per transverse
wave number, and an inverse Fourier integral.  With a flat bed it must
collapse to (i/4) H0(k r); over the slope it departs from the Hankel kernel
evaluated with the local wave number.
"""
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bsemwave.greens import TransformedProfile, greens_constant, greens_variable
from bsemwave.waves import slope_profile, solve_dispersion

out = Path(sys.argv[1] if len(sys.argv) > 1 else "gallery_output")
out.mkdir(parents=True, exist_ok=True)
omega = 2 * math.pi

# %%
# Flat bed first: the transform route against the closed form.
k = solve_dispersion(omega, 0.45)
r = np.linspace(0.05, 4.0, 80)
x = np.column_stack([r * math.cos(0.7), r * math.sin(0.7)])
flat = greens_variable(TransformedProfile.constant(k), x, np.zeros_like(x))
exact = greens_constant(x, np.zeros_like(x), k)
print(f"flat bed: largest relative deviation {np.max(np.abs(flat.psi / exact.psi - 1)):.1e}")

# %%
# Sloping bed: a source at x = 0 and field points along a line running up
# the slope and down it.  Shoreward (x > 0) the waves shorten.
slope = TransformedProfile.from_bathymetry(omega, slope_profile())
src = np.zeros((1, 2))
xs = np.linspace(-8, 8, 321)
xs = xs[np.abs(xs) > 0.05]
pts = np.column_stack([xs, np.zeros_like(xs)])
var = greens_variable(slope, pts, src)
loc = greens_constant(pts, src, slope.k(0.0))

fig, ax = plt.subplots(figsize=(7, 3.5))
ax.plot(xs, var.psi.real, label="sloping bed")
ax.plot(xs, loc.psi.real, "--", label="flat bed at the source depth")
ax.set_xlabel("x (source at 0, shore to the right)")
ax.set_ylabel("Re psi")
ax.legend()
ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(out / "variable_kernel.png", dpi=120)
