"""Chebyshev-Gauss-Lobatto grids, the constant Picard-Chebyshev operators and
the fixed-point loop shared by every propagation mode.

State blocks are ``N x K`` arrays: one row per time node. For orbital
problems ``K = 6 * M`` and the columns follow the component-major order
``[x_1..x_M, y_1..y_M, z_1..z_M, vx_1..vx_M, vy_1..vy_M, vz_1..vz_M]``
(for ``M = 1`` this is the plain ``[x, y, z, vx, vy, vz]`` row).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .exceptions import DivergenceError, InvalidSizeError, InvalidSpanError, ShapeError

__all__ = [
    "ChebyshevGrid",
    "PCMatrices",
    "IterationReport",
    "ERROR_FLOOR",
    "build_grid",
    "build_matrices",
    "chebyshev_vandermonde",
    "picard_update",
    "state_errors",
    "pc_solve",
]

ERROR_FLOOR = 1e-30


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ChebyshevGrid:
    n_nodes: int
    tau: np.ndarray
    times: np.ndarray
    omega1: float
    omega2: float

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def backward(self) -> bool:
        return self.omega2 < 0


@dataclass(frozen=True, eq=False)
class PCMatrices:
    """Constant operators for an ``N``-node Picard-Chebyshev update.

    Attributes
    ----------
    eval : (N, N) array
        ``T_k(tau_j)`` with the constant column halved.
    xform : (N, N) array
        Node samples to Chebyshev coefficients.
    integ : (N, N) array
        Coefficient-space antiderivative; row 0 is zero.
    a_op : (N, N) array
        ``integ @ xform``.
    s_row : (N-1,) array
        Weights that pin the antiderivative to the initial condition.
    combined : (N, N) array
        ``eval`` folded with ``s_row`` and ``a_op`` so that one update is
        ``combined @ F + y0``. Row 0 is exactly zero.
    """

    n_nodes: int
    eval: np.ndarray
    xform: np.ndarray
    integ: np.ndarray
    a_op: np.ndarray
    s_row: np.ndarray
    combined: np.ndarray


@dataclass
class IterationReport:
    iterations: int
    final_error: float
    converged: bool
    tolerance: float
    per_iteration_errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_error": self.final_error,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "per_iteration_errors": list(self.per_iteration_errors),
        }


def build_grid(n_nodes: int, t_start: float, t_end: float) -> ChebyshevGrid:
    """Chebyshev-Gauss-Lobatto grid mapped onto ``[t_start, t_end]``.

    ``t_end < t_start`` gives a backward segment with negative ``omega2``.
    """
    n_nodes = int(n_nodes)
    if n_nodes < 3:
        raise InvalidSizeError(f"need at least 3 nodes, got {n_nodes}")
    t_start = float(t_start)
    t_end = float(t_end)
    if t_start == t_end:
        raise InvalidSpanError(f"degenerate span: t_start == t_end == {t_start}")
    m = n_nodes - 1
    # sine form of -cos(j*pi/m): odd in (2j - m), so the nodes are exactly symmetric
    k = 2.0 * np.arange(n_nodes) - m
    tau = np.sin(np.pi * k / (2.0 * m))
    tau[0], tau[-1] = -1.0, 1.0
    omega1 = (t_end + t_start) / 2.0
    omega2 = (t_end - t_start) / 2.0
    times = omega2 * tau + omega1
    times[0], times[-1] = t_start, t_end
    return ChebyshevGrid(n_nodes, _readonly(tau), _readonly(times), omega1, omega2)


def chebyshev_vandermonde(x: np.ndarray, degree: int) -> np.ndarray:
    """``V[j, k] = T_k(x_j)`` for ``k = 0..degree`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    v = np.empty((x.size, degree + 1))
    v[:, 0] = 1.0
    if degree >= 1:
        v[:, 1] = x
    for k in range(1, degree):
        v[:, k + 1] = 2.0 * x * v[:, k] - v[:, k - 1]
    return v


@lru_cache(maxsize=16)
def build_matrices(n_nodes: int) -> PCMatrices:
    """Build (and cache per ``n_nodes``) the constant Picard-Chebyshev operators."""
    n_nodes = int(n_nodes)
    if n_nodes < 3:
        raise InvalidSizeError(f"need at least 3 nodes, got {n_nodes}")
    m = n_nodes - 1
    tau = build_grid(n_nodes, -1.0, 1.0).tau
    plain = chebyshev_vandermonde(tau, m)

    ev = plain.copy()
    ev[:, 0] *= 0.5

    # discrete Chebyshev transform with the end-point halved sums
    nu = np.ones(n_nodes)
    nu[0] = nu[-1] = 2.0
    halve = np.ones(n_nodes)
    halve[0] = halve[-1] = 0.5
    xform = (2.0 / (m * nu))[:, None] * plain.T * halve[None, :]

    integ = np.zeros((n_nodes, n_nodes))
    integ[1, 0] = 1.0
    if n_nodes > 2:
        integ[1, 2] = -0.5
    for k in range(2, n_nodes):
        integ[k, k - 1] = 1.0 / (2.0 * k)
        if k + 1 < n_nodes:
            integ[k, k + 1] = -1.0 / (2.0 * k)

    a_op = integ @ xform
    kk = np.arange(1, n_nodes)
    s_row = -2.0 * (-1.0) ** kk

    folded = ev[:, 1:] + ev[:, :1] * s_row[None, :]
    combined = folded @ a_op[1:, :]
    # mathematically zero: the antiderivative vanishes at tau = -1
    combined[0, :] = 0.0

    return PCMatrices(
        n_nodes,
        _readonly(ev),
        _readonly(xform),
        _readonly(integ),
        _readonly(a_op),
        _readonly(s_row),
        _readonly(combined),
    )


def picard_update(mats: PCMatrices, force_block: np.ndarray, initial_row: np.ndarray) -> np.ndarray:
    """One linear Picard update ``Y = C B`` for an ``omega2``-scaled force block."""
    force_block = np.asarray(force_block, dtype=float)
    initial_row = np.asarray(initial_row, dtype=float).reshape(-1)
    if force_block.ndim != 2 or force_block.shape[0] != mats.n_nodes:
        raise ShapeError(
            f"force block must have {mats.n_nodes} rows, got shape {force_block.shape}"
        )
    if initial_row.shape[0] != force_block.shape[1]:
        raise ShapeError(
            f"initial row has {initial_row.shape[0]} columns, force block {force_block.shape[1]}"
        )
    y = mats.combined @ force_block
    y += initial_row[None, :]
    return y


def state_errors(
    current: np.ndarray,
    previous: np.ndarray,
    n_traj: Optional[int] = None,
    mode: str = "relative",
    floor: float = ERROR_FLOOR,
) -> np.ndarray:
    """Per (node, trajectory) iteration error of component-major blocks.

    Returns an ``(N, M)`` array of ``max(pos_err, vel_err)`` where each part is
    either ``|dr| / max(|r|, floor)`` (relative) or ``|dr|`` (absolute).
    """
    current = np.asarray(current, dtype=float)
    previous = np.asarray(previous, dtype=float)
    if current.shape != previous.shape:
        raise ShapeError(f"shape mismatch {current.shape} vs {previous.shape}")
    n, k = current.shape
    if n_traj is None:
        if k % 6:
            raise ShapeError(f"column count {k} is not a multiple of 6")
        n_traj = k // 6
    if k != 6 * n_traj:
        raise ShapeError(f"expected {6 * n_traj} columns, got {k}")
    cur = current.reshape(n, 6, n_traj)
    diff = cur - previous.reshape(n, 6, n_traj)
    dr = np.sqrt(np.einsum("ncm,ncm->nm", diff[:, :3], diff[:, :3]))
    dv = np.sqrt(np.einsum("ncm,ncm->nm", diff[:, 3:], diff[:, 3:]))
    if mode == "relative":
        r = np.sqrt(np.einsum("ncm,ncm->nm", cur[:, :3], cur[:, :3]))
        v = np.sqrt(np.einsum("ncm,ncm->nm", cur[:, 3:], cur[:, 3:]))
        dr /= np.maximum(r, floor)
        dv /= np.maximum(v, floor)
    elif mode != "absolute":
        raise ValueError(f"unknown error mode {mode!r}")
    return np.maximum(dr, dv)


def _max_state_error(current, previous, mode="relative"):
    return float(np.max(state_errors(current, previous, mode=mode)))


def pc_solve(
    grid: ChebyshevGrid,
    mats: PCMatrices,
    dynamics: Callable[[np.ndarray], np.ndarray],
    y_init_block: np.ndarray,
    initial_row: np.ndarray,
    tolerance: float = 1e-12,
    max_iterations: int = 100,
    error: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    mode: str = "relative",
) -> tuple[np.ndarray, IterationReport]:
    """Run the Picard fixed-point loop until consecutive iterates agree.

    ``dynamics(y)`` must return the force block already scaled by
    ``grid.omega2``. ``error(current, previous)`` defaults to the maximum
    per-state error over a component-major block.

    Non-convergence is reported through ``report.converged``; a non-finite
    iterate raises :class:`DivergenceError`.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if grid.n_nodes != mats.n_nodes:
        raise ShapeError(f"grid has {grid.n_nodes} nodes, matrices {mats.n_nodes}")
    y = np.array(y_init_block, dtype=float)
    if y.ndim != 2 or y.shape[0] != grid.n_nodes:
        raise ShapeError(f"initial block must have {grid.n_nodes} rows, got {y.shape}")
    if error is None:
        def error(a, b):
            return _max_state_error(a, b, mode)

    history = []
    converged = False
    err = np.inf
    for _ in range(int(max_iterations)):
        force = dynamics(y)
        y_new = picard_update(mats, force, initial_row)
        if not np.isfinite(y_new).all():
            node, col = np.argwhere(~np.isfinite(y_new))[0]
            raise DivergenceError(
                f"non-finite state at node {node}, column {col} "
                f"after {len(history) + 1} iterations",
                node=int(node),
                column=int(col),
            )
        err = error(y_new, y)
        history.append(err)
        y = y_new
        if err <= tolerance:
            converged = True
            break
    report = IterationReport(
        iterations=len(history),
        final_error=float(err),
        converged=converged,
        tolerance=float(tolerance),
        per_iteration_errors=history,
    )
    return y, report
