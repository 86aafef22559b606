"""Chebyshev-Gauss-Lobatto grids and the constant Picard update operator.

Run with ``python demos/01_chebyshev_operators.py``.
"""

# %%
import numpy as np

from picard_swarm import build_grid, build_matrices, chebyshev_vandermonde, picard_update

# %% [markdown]
# A grid maps the nodes tau in [-1, 1] onto a time span. The nodes cluster
# near the ends of the interval.

# %%
grid = build_grid(9, 0.0, 3600.0)
print("tau  :", np.round(grid.tau, 4))
print("times:", np.round(grid.times, 1))
print("omega1, omega2:", grid.omega1, grid.omega2)

# %% [markdown]
# The forward transform inverts the polynomial evaluation matrix on the nodes.

# %%
for n in (3, 16, 200):
    plain = chebyshev_vandermonde(build_grid(n, -1.0, 1.0).tau, n - 1)
    err = np.abs(plain @ build_matrices(n).xform - np.eye(n)).max()
    print(f"N = {n:3d}: max |T X - I| = {err:.1e}")

# %% [markdown]
# One update integrates a sampled integrand and anchors the result at the
# initial value. Polynomial integrands up to degree N - 2 come out exact.

# %%
n = 16
grid = build_grid(n, 0.5, 2.0)
mats = build_matrices(n)
for degree in (0, 3, 10):
    force = grid.omega2 * grid.times[:, None] ** degree
    y = picard_update(mats, force, np.array([1.0]))[:, 0]
    exact = 1.0 + (grid.times ** (degree + 1) - 0.5 ** (degree + 1)) / (degree + 1)
    print(f"degree {degree:2d}: max error {np.abs(y - exact).max():.1e}")
