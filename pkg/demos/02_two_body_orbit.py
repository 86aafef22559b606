"""Propagating one heliocentric orbit and checking it against Kepler's solution.

Run with ``python demos/02_two_body_orbit.py``.
"""

# %%
import numpy as np

from picard_swarm import (
    AU_KM,
    MU_SUN,
    KeplerElements,
    PropagationConfig,
    elements_to_state,
    kepler_propagate_many,
    orbital_period,
    propagate,
)
from picard_swarm.cheb_core import state_errors

# %%
state = elements_to_state(KeplerElements(AU_KM, 0.2, 0.05, 0.3, 0.4, 0.5, 0.0), MU_SUN)
period = orbital_period(state, MU_SUN)
print(f"period: {period / 86400:.2f} days")

# %% [markdown]
# Warm start: the initial guess is the conic itself, so a pure two-body run
# is already at its fixed point.

# %%
for start in ("warm", "cold"):
    res = propagate([state], period, PropagationConfig(start_mode=start))
    ref = kepler_propagate_many(state.as_array(), MU_SUN, res.times() - res.times()[0])
    err = state_errors(res.samples()[0], ref).max()
    print(f"{start:4s} start: {res.iteration_counts().max():3d} iterations, max error vs Kepler {err:.1e}")

# %% [markdown]
# Energy and angular momentum along the converged solution.

# %%
y = res.samples()[0]
r, v = y[:, :3], y[:, 3:]
energy = 0.5 * np.sum(v * v, axis=1) - MU_SUN / np.linalg.norm(r, axis=1)
h = np.linalg.norm(np.cross(r, v), axis=1)
print(f"energy drift {np.ptp(energy) / abs(energy[0]):.1e}, |h| drift {np.ptp(h) / h[0]:.1e}")
