"""Units, wavenumbers, and the computational scene.

Lengths are measured in units of 10 cm, so a 4 GHz microwave has a
wavelength of about 0.75 units and the speed of light is 2.998e9 in
(10 cm)/s.  This script prints the frequency -> k conversion for a few
bands, sets up the reference scene (box, grid, source line, detector
plane), and shows the depth profile of the convexification weight.

Run:  python demos/01_wavenumbers_and_geometry.py [--plot]
"""

import sys

import numpy as np

from cwscat.convexify import CarlemanWeight
from cwscat.geometry import (
    DomainBox,
    MeasurementPlane,
    SourceLine,
    make_grid,
    wavenumber_from_frequency,
)

box = DomainBox()  # R = 5, b = 2, theta = 2.5
grid = make_grid(box, 50)
sources = SourceLine()
plane = MeasurementPlane()

print("frequency -> dimensionless wavenumber")
for f_ghz in (1.0, 3.16, 4.06, 4.55, 6.0):
    k = wavenumber_from_frequency(f_ghz * 1e9)
    print(f"  {f_ghz:5.2f} GHz  k = {k:7.4f}   wavelength = {2*np.pi/k:.3f} units")

print()
print(f"box: |x|,|y| <= {box.R}, |z| <= {box.b}, weight focus theta = {box.theta}")
print(f"grid: {grid.shape} nodes, spacing h = {grid.h}")
print(f"sources: {sources.alphas.size} positions on the line "
      f"(alpha, 0, {-sources.d}), alpha in [{sources.a1}, {sources.a2}]")
print(f"detectors: {plane.n_detectors}x{plane.n_detectors} at z = {plane.z_meas}")

# k = 8.51 resolves to about 3.7 grid points per wavelength at h = 0.2
k = 8.51
print(f"\nworking k = {k}: {2*np.pi/k/grid.h:.1f} points per wavelength")

# the weight decays fast with depth; that is the point of the method:
# it privileges the measured face z = -b and suppresses the nonlinearity
w = CarlemanWeight(lam=1.1, theta=box.theta, b=box.b)
zs = grid.zs
mu = w.normalized(zs)
print("\ndepth profile of the normalized weight (lambda = 1.1):")
for z, m in zip(zs[::4], mu[::4]):
    bar = "#" * max(1, int(50 * m ** 0.15))
    print(f"  z = {z:+5.1f}  mu = {m:9.3e}  {bar}")

if "--plot" in sys.argv:
    try:
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed, skipping the figure")
    else:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.semilogy(zs, mu)
        ax.set_xlabel("depth z")
        ax.set_ylabel("normalized weight")
        ax.set_title("Carleman weight, lambda = 1.1")
        fig.tight_layout()
        fig.savefig("weight_profile.png", dpi=130)
        print("wrote weight_profile.png")
