"""Independent reference propagation for verification.

Nothing here touches the Chebyshev grid, the Picard matrices or the cached
ephemeris table: accelerations are summed directly from the ephemeris
providers at arbitrary epochs and integrated with an adaptive 8(5,3)
Dormand-Prince pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import ForceModelConfig, StateVector
from .exceptions import OracleFailureError

__all__ = ["OracleConfig", "continuous_acceleration", "rk_propagate", "rk_trajectory", "Discrepancy", "compare_trajectories"]


@dataclass(frozen=True)
class OracleConfig:
    rel_tol: float = 1e-13
    abs_tol: float = 1e-16
    max_steps: int = 200_000
    method: str = "DOP853"
    order: int = 8

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("oracle tolerances must be positive")
        if self.order < 7:
            raise ValueError("oracle method order must be at least 7")


def continuous_acceleration(config: ForceModelConfig):
    """``f(t, r)`` for the restricted problem with body positions at any epoch."""
    mu = config.central_mu
    bodies = config.active_bodies

    def accel(t, r):
        acc = -mu * r / np.linalg.norm(r) ** 3
        for body in bodies:
            rb = body.ephemeris.position(t)[0]
            d = rb - r
            acc = acc + body.mu * (d / np.linalg.norm(d) ** 3 - rb / np.linalg.norm(rb) ** 3)
        return acc

    return accel


def _integrate(x0, accel, t_start, t_end, cfg, t_eval=None):
    nfev = 0
    # DOP853 uses 12 evaluations per step
    budget = 12 * cfg.max_steps

    def rhs(t, x):
        nonlocal nfev
        nfev += 1
        if nfev > budget:
            raise OracleFailureError(f"oracle exceeded {cfg.max_steps} steps")
        return np.concatenate([x[3:], accel(t, x[:3])])

    sol = solve_ivp(
        rhs,
        (float(t_start), float(t_end)),
        np.asarray(x0, dtype=float),
        method=cfg.method,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        t_eval=t_eval,
    )
    if not sol.success:
        raise OracleFailureError(f"oracle integration failed: {sol.message}")
    return sol


def rk_propagate(state: StateVector, force, t_start: float, t_end: float, cfg: OracleConfig = OracleConfig()) -> StateVector:
    """Reference state at ``t_end``; ``force`` is a ForceModelConfig or an ``f(t, r)`` callable."""
    accel = continuous_acceleration(force) if isinstance(force, ForceModelConfig) else force
    sol = _integrate(state.as_array(), accel, t_start, t_end, cfg)
    x = sol.y[:, -1]
    return StateVector(t_end, x[:3], x[3:])


def rk_trajectory(x0, force, times, cfg: OracleConfig = OracleConfig()) -> np.ndarray:
    """Reference states at every epoch of ``times`` (first entry is the initial epoch); (N, 6)."""
    accel = continuous_acceleration(force) if isinstance(force, ForceModelConfig) else force
    times = np.asarray(times, dtype=float)
    sol = _integrate(x0, accel, times[0], times[-1], cfg, t_eval=times)
    return sol.y.T


@dataclass
class Discrepancy:
    pos: np.ndarray  # relative position error per node (per trajectory if batched)
    vel: np.ndarray

    @property
    def max_pos(self) -> float:
        return float(np.max(self.pos))

    @property
    def max_vel(self) -> float:
        return float(np.max(self.vel))

    @property
    def max(self) -> float:
        return max(self.max_pos, self.max_vel)


def compare_trajectories(pc_samples, reference, times=None) -> Discrepancy:
    """Relative position/velocity discrepancies between PC samples and a reference.

    ``reference`` is an array shaped like ``pc_samples`` (..., N, 6) or a
    callable ``reference(times) -> (N, 6)`` evaluated at the PC node epochs.
    """
    pc = np.asarray(pc_samples, dtype=float)
    ref = reference(times) if callable(reference) else np.asarray(reference, dtype=float)
    d = pc - ref
    pos = np.linalg.norm(d[..., :3], axis=-1) / np.linalg.norm(ref[..., :3], axis=-1)
    vel = np.linalg.norm(d[..., 3:], axis=-1) / np.linalg.norm(ref[..., 3:], axis=-1)
    return Discrepancy(pos, vel)
