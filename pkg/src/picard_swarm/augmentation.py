"""Two-level augmentation: grouping plans, component-major blocks, group error
reduction and the per-group solve.

The outer level splits a batch into independent groups; the inner level stacks
the trajectories of one group column-wise so a single Picard loop refines all
of them against one convergence test.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cheb_core import ChebyshevGrid, IterationReport, PCMatrices, pc_solve, state_errors
from .dynamics import EphemerisTable, ForceModelConfig, eval_force_block
from .exceptions import AlignmentError, EmptyReductionError, InvalidPlanError, PicardError, ShapeError

__all__ = [
    "TrajectoryBlock",
    "GroupingPlan",
    "ErrorSummary",
    "split_groups",
    "plan_from_sizes",
    "to_component_major",
    "from_component_major",
    "assemble_block",
    "disassemble_block",
    "block_iteration_error",
    "reduction_schedule",
    "reduce_max",
    "solve_group",
]


@dataclass(eq=False)
class TrajectoryBlock:
    """``N x 6M`` state block; column ``c`` is component ``c // M`` of trajectory ``c % M``."""

    data: np.ndarray
    initial_row: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.initial_row = np.asarray(self.initial_row, dtype=float).reshape(-1)
        if self.data.ndim != 2 or self.data.shape[1] % 6:
            raise ShapeError(f"block data must be N x 6M, got {self.data.shape}")
        if self.initial_row.shape[0] != self.data.shape[1]:
            raise ShapeError("initial row does not match block width")

    @property
    def n_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def group_size(self) -> int:
        return self.data.shape[1] // 6

    def column(self, component: int, trajectory: int) -> int:
        return component * self.group_size + trajectory

    def locate(self, column: int) -> tuple[int, int]:
        """Inverse of :meth:`column`: ``(component, trajectory)``."""
        return divmod(column, self.group_size)


@dataclass(frozen=True, eq=False)
class GroupingPlan:
    total: int
    group_sizes: tuple
    assignment: np.ndarray  # (total, 2): group index, slot within group

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_sizes)]).astype(int)

    def members(self, group: int) -> np.ndarray:
        off = self.offsets
        return np.arange(off[group], off[group + 1])

    def slices(self) -> list:
        off = self.offsets
        return [slice(int(a), int(b)) for a, b in zip(off[:-1], off[1:])]


@dataclass(frozen=True, eq=False)
class ErrorSummary:
    per_state_errors: np.ndarray
    group_max: float


def plan_from_sizes(sizes: Sequence[int]) -> GroupingPlan:
    """Contiguous plan with explicit (possibly uneven) group sizes."""
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s <= 0 for s in sizes):
        raise InvalidPlanError(f"group sizes must be positive, got {sizes}")
    total = sum(sizes)
    group = np.repeat(np.arange(len(sizes)), sizes)
    slot = np.concatenate([np.arange(s) for s in sizes])
    return GroupingPlan(total, sizes, np.stack([group, slot], axis=1))


def split_groups(states, p_groups: int) -> GroupingPlan:
    """Balanced contiguous partition; the first ``total % p`` groups get one extra member.

    ``states`` may be a sequence of states, an (M, 6) array or a plain count.
    """
    total = int(states) if isinstance(states, (int, np.integer)) else len(states)
    p_groups = int(p_groups)
    if not 1 <= p_groups <= total:
        raise InvalidPlanError(f"p_groups must be in [1, {total}], got {p_groups}")
    base, extra = divmod(total, p_groups)
    return plan_from_sizes([base + 1] * extra + [base] * (p_groups - extra))


def to_component_major(traj: np.ndarray) -> np.ndarray:
    """(M, N, 6) per-trajectory samples to an N x 6M component-major block."""
    traj = np.asarray(traj, dtype=float)
    m, n, _ = traj.shape
    return np.ascontiguousarray(traj.transpose(1, 2, 0).reshape(n, 6 * m))


def from_component_major(data: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_component_major`."""
    data = np.asarray(data, dtype=float)
    n, k = data.shape
    return np.ascontiguousarray(data.reshape(n, 6, k // 6).transpose(2, 0, 1))


def assemble_block(states, grid: ChebyshevGrid, guesses) -> TrajectoryBlock:
    """Stack per-trajectory ``N x 6`` guesses into one component-major block.

    ``states`` is an (M, 6) array of initial conditions (or StateVectors);
    every guess must have one row per grid node and start at its state.
    """
    if hasattr(states, "__len__") and len(states) and hasattr(states[0], "as_array"):
        epochs = np.array([s.epoch for s in states])
        if np.any(epochs != grid.times[0]):
            raise AlignmentError("initial epochs do not match the first grid node")
        x0 = np.array([s.as_array() for s in states])
    else:
        x0 = np.atleast_2d(np.asarray(states, dtype=float))
    guesses = np.asarray(guesses, dtype=float)
    if guesses.ndim == 2:
        guesses = guesses[None]
    if guesses.shape[0] != x0.shape[0]:
        raise AlignmentError(f"{x0.shape[0]} states but {guesses.shape[0]} guesses")
    if guesses.shape[1] != grid.n_nodes or guesses.shape[2] != 6:
        raise AlignmentError(
            f"guesses have shape {guesses.shape[1:]}, expected ({grid.n_nodes}, 6)"
        )
    if not np.array_equal(guesses[:, 0, :], x0):
        bad = int(np.argmax(np.any(guesses[:, 0, :] != x0, axis=1)))
        raise AlignmentError(f"guess {bad} does not start at its initial condition")
    return TrajectoryBlock(to_component_major(guesses), to_component_major(x0[:, None, :])[0])


def disassemble_block(block: TrajectoryBlock) -> np.ndarray:
    """(M, N, 6) per-trajectory samples of a block."""
    return from_component_major(block.data)


def reduction_schedule(n: int) -> list:
    """Array length at each level of a pairwise tree reduction, from ``n`` down to 1."""
    if n < 1:
        raise EmptyReductionError("cannot reduce an empty array")
    levels = [n]
    while n > 1:
        n = (n + 1) // 2
        levels.append(n)
    return levels


def _tree_max(a: np.ndarray) -> float:
    while a.size > 1:
        half = a.size // 2
        head = np.maximum(a[:half], a[half : 2 * half])
        a = np.concatenate([head, a[2 * half :]]) if a.size % 2 else head
    return float(a[0])


def reduce_max(values, workers: int = 1, chunk: int = 4096) -> float:
    """Exact maximum by pairwise tree reduction.

    With ``workers > 1`` the array is cut into chunks whose maxima are found
    concurrently, then tree-reduced; max is order-independent so every
    schedule returns the same value.
    """
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        raise EmptyReductionError("cannot reduce an empty array")
    if np.isnan(a).any():
        raise ValueError("reduce_max input contains NaN")
    if workers <= 1 or a.size <= chunk:
        return _tree_max(a)
    parts = [a[i : i + chunk] for i in range(0, a.size, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        partial = np.fromiter(pool.map(_tree_max, parts), dtype=float, count=len(parts))
    return _tree_max(partial)


def block_iteration_error(current, previous, mode: str = "relative", workers: int = 1) -> ErrorSummary:
    """Per-trajectory maximum over nodes of ``max(pos_err, vel_err)``, and the group maximum."""
    cur = getattr(current, "data", current)
    prev = getattr(previous, "data", previous)
    if np.shape(cur) != np.shape(prev):
        raise ShapeError(f"shape mismatch {np.shape(cur)} vs {np.shape(prev)}")
    per_node = state_errors(cur, prev, mode=mode)
    per_state = per_node.max(axis=0)
    return ErrorSummary(per_state, reduce_max(per_state, workers=workers))


def solve_group(
    block: TrajectoryBlock,
    grid: ChebyshevGrid,
    mats: PCMatrices,
    table: Optional[EphemerisTable],
    config: ForceModelConfig,
    tolerance: float = 1e-12,
    max_iterations: int = 100,
    mode: str = "relative",
    workers: int = 1,
    group_index: int = 0,
) -> tuple[TrajectoryBlock, IterationReport]:
    """Solve one group as a single system: it converges when its worst state does."""
    if block.n_nodes != grid.n_nodes:
        raise AlignmentError(f"block has {block.n_nodes} rows, grid {grid.n_nodes}")

    def dynamics(y):
        return eval_force_block(y, grid, table, config, workers=workers)

    def error(a, b):
        return block_iteration_error(a, b, mode=mode, workers=workers).group_max

    try:
        data, report = pc_solve(
            grid, mats, dynamics, block.data, block.initial_row, tolerance, max_iterations, error=error
        )
    except PicardError as exc:
        exc.group = group_index
        raise
    return TrajectoryBlock(data, block.initial_row), report
