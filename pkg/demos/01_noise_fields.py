"""Sample the two noise families and check their one-step statistics.

Draws a handful of increments for the compressible (scalar bump) and the
incompressible (divergence-free spectral) models, prints the empirical
pointwise variance against the 2 nu dt law, and saves a picture of one
realisation of each field.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ewfluct import CovarianceSpec, TorusGrid, sample_increment, validate
from ewfluct.rng import ReplicaStreams

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

dt = 1e-3

# -- compressible family, d = 1 -------------------------------------------
spec = CovarianceSpec(kind="compressible", d=1, amp=1.0, R=1.0)
report = validate(spec)
print(f"compressible: nu = {report.nu}, min sampled spectral value = {report.psd_min:.2e}")

grid = TorusGrid(1, 16.0, 256)
rs = ReplicaStreams(seed=7, replica=0)
draws = np.array([sample_increment(spec, grid, dt, rs.noise(m)).dw.values[0, 31]
                  for m in range(4000)])
print(f"pointwise variance / (2 nu dt) = {draws.var() / (2 * report.nu * dt):.3f}"
      "  (should be ~1)")

inc = sample_increment(spec, grid, dt, rs.noise(0))
fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(grid.x1, inc.dw.values[0])
ax.set_title("one compressible increment dW (d = 1)")
ax.set_xlabel("x")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "noise_compressible.png"), dpi=120)

# -- incompressible family, d = 2 ------------------------------------------
spec2 = CovarianceSpec(kind="incompressible", d=2, g0=1.0, zeta=1.0)
report2 = validate(spec2)
grid2 = TorusGrid(2, 8.0, 64)
inc2 = sample_increment(spec2, grid2, dt, ReplicaStreams(7, 1).noise(0))
div = inc2.dw.divergence().values
print(f"incompressible: nu = {report2.nu:.4f}, "
      f"max |div dW| / |dW|_inf = {np.abs(div).max() / np.abs(inc2.dw.values).max():.2e}")

fig, ax = plt.subplots(figsize=(5, 5))
step = 2
X, Y = np.meshgrid(grid2.x1[::step], grid2.x1[::step], indexing="ij")
ax.quiver(X, Y, inc2.dw.values[0, ::step, ::step], inc2.dw.values[1, ::step, ::step])
ax.set_title("one divergence-free increment (d = 2)")
ax.set_aspect("equal")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "noise_incompressible.png"), dpi=120)
print(f"figures saved under {OUT}")
