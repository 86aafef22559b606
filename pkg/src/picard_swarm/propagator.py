"""Single- and multi-segment batch propagation with warm or cold starts."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .augmentation import (
    GroupingPlan,
    assemble_block,
    disassemble_block,
    plan_from_sizes,
    solve_group,
    split_groups,
)
from .cheb_core import ChebyshevGrid, build_grid, build_matrices
from .dynamics import (
    ForceModelConfig,
    StateVector,
    build_ephemeris_cache,
    kepler_propagate_many,
    orbital_period,
    states_to_array,
)
from .exceptions import (
    InvalidSpanError,
    NonEllipticError,
    PartialResultError,
    RunTimeoutError,
)

log = logging.getLogger(__name__)

__all__ = [
    "SegmentPlan",
    "PropagationConfig",
    "SegmentResult",
    "PropagationResult",
    "warm_start",
    "cold_start",
    "plan_segments",
    "propagate",
]


@dataclass(frozen=True)
class SegmentPlan:
    boundaries: tuple
    n_nodes: int
    direction: str

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) - 1

    def spans(self):
        return list(zip(self.boundaries[:-1], self.boundaries[1:]))


@dataclass(frozen=True)
class PropagationConfig:
    """Run parameters; the defaults are the 200-node, 1e-12 reference setup."""

    n_nodes: int = 200
    tolerance: float = 1e-12
    error_mode: str = "relative"
    max_iterations: int = 100
    start_mode: str = "warm"
    segment_policy: str = "single"
    max_segment_span: Optional[float] = None
    representative: int = 0
    force_model: ForceModelConfig = field(default_factory=ForceModelConfig)
    groups: Optional[int] = None
    group_sizes: Optional[tuple] = None

    def __post_init__(self):
        if self.start_mode not in ("warm", "cold"):
            raise ValueError(f"start_mode must be 'warm' or 'cold', got {self.start_mode!r}")
        if self.segment_policy not in ("single", "per-orbit"):
            raise ValueError(f"unknown segment policy {self.segment_policy!r}")
        if self.error_mode not in ("relative", "absolute"):
            raise ValueError(f"unknown error mode {self.error_mode!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def grouping(self, total: int) -> GroupingPlan:
        if self.group_sizes:
            plan = plan_from_sizes(self.group_sizes)
            if plan.total != total:
                raise ValueError(f"group sizes sum to {plan.total}, batch has {total}")
            return plan
        return split_groups(total, self.groups or 1)


@dataclass
class SegmentResult:
    grid: ChebyshevGrid
    samples: np.ndarray  # (M, N, 6)
    reports: list  # one IterationReport per group


@dataclass
class PropagationResult:
    plan: SegmentPlan
    grouping: GroupingPlan
    segments: list
    failed_groups: list = field(default_factory=list)

    @property
    def final_states(self) -> np.ndarray:
        return self.segments[-1].samples[:, -1, :]

    @property
    def converged(self) -> bool:
        return all(r.converged for seg in self.segments for r in seg.reports)

    def times(self) -> np.ndarray:
        """All node epochs, with each shared segment boundary listed once."""
        parts = [self.segments[0].grid.times]
        parts += [seg.grid.times[1:] for seg in self.segments[1:]]
        return np.concatenate(parts)

    def samples(self) -> np.ndarray:
        """(M, total_nodes, 6), matching :meth:`times`."""
        parts = [self.segments[0].samples]
        parts += [seg.samples[:, 1:] for seg in self.segments[1:]]
        return np.concatenate(parts, axis=1)

    def iteration_counts(self) -> np.ndarray:
        """(n_segments, n_groups) iteration counts."""
        return np.array([[r.iterations for r in seg.reports] for seg in self.segments])


def cold_start(states, n_nodes: int) -> np.ndarray:
    """Every node of every guess equals the trajectory's initial state; (M, N, 6)."""
    x0 = _as_matrix(states)
    return np.repeat(x0[:, None, :], int(n_nodes), axis=1)


def warm_start(states, grid: ChebyshevGrid, central_mu: float) -> np.ndarray:
    """Keplerian guesses on the grid nodes; (M, N, 6).

    Trajectories that are not elliptic about the central body fall back to a
    cold start with a logged warning.
    """
    x0 = _as_matrix(states)
    dt = grid.times - grid.times[0]
    out = np.empty((x0.shape[0], grid.n_nodes, 6))
    try:
        out[:] = kepler_propagate_many(x0, central_mu, dt).transpose(1, 0, 2)
    except NonEllipticError:
        for m in range(x0.shape[0]):
            try:
                out[m] = kepler_propagate_many(x0[m], central_mu, dt)
            except NonEllipticError:
                log.warning("trajectory %d is not elliptic: cold start used", m)
                out[m] = x0[m]
    out[:, 0, :] = x0
    return out


def plan_segments(
    representative,
    t_start: float,
    t_end: float,
    central_mu: float,
    policy: str = "single",
    n_nodes: int = 200,
    max_span: Optional[float] = None,
) -> SegmentPlan:
    """Split ``[t_start, t_end]`` into integration segments.

    Under ``per-orbit`` each segment lasts one osculating period of the
    representative state, evaluated at the segment start after conic
    propagation; ``max_span`` overrides the period.
    """
    t_start, t_end = float(t_start), float(t_end)
    if t_start == t_end:
        raise InvalidSpanError("degenerate span")
    sign = 1.0 if t_end > t_start else -1.0
    direction = "forward" if sign > 0 else "backward"
    if policy == "single":
        return SegmentPlan((t_start, t_end), n_nodes, direction)
    if policy != "per-orbit":
        raise ValueError(f"unknown segment policy {policy!r}")
    x = representative.as_array() if isinstance(representative, StateVector) else np.asarray(representative, float)
    bounds = [t_start]
    t = t_start
    while True:
        if max_span is not None:
            span = float(max_span)
        else:
            span = orbital_period(x, central_mu)
        remaining = abs(t_end - t)
        if remaining <= span * (1.0 + 1e-9):
            bounds.append(t_end)
            break
        t = t + sign * span
        bounds.append(t)
        if max_span is None:
            x = kepler_propagate_many(x, central_mu, [sign * span])[0]
    return SegmentPlan(tuple(bounds), n_nodes, direction)


def _as_matrix(states) -> np.ndarray:
    if isinstance(states, StateVector) or (
        isinstance(states, (list, tuple)) and states and isinstance(states[0], StateVector)
    ):
        return states_to_array(states)[1]
    return np.atleast_2d(np.asarray(states, dtype=float))


def propagate(
    states,
    t_end: float,
    config: PropagationConfig = PropagationConfig(),
    t_start: Optional[float] = None,
    grouping: Optional[GroupingPlan] = None,
    executor=None,
    internal_workers: int = 1,
    deadline: Optional[float] = None,
    raise_on_failure: bool = True,
) -> PropagationResult:
    """Propagate a batch sharing one initial epoch to ``t_end``.

    Segments run in sequence; inside a segment each group of ``grouping`` is
    solved independently, through ``executor.map`` when an executor is given.
    ``deadline`` is a ``time.monotonic()`` value checked between group solves.
    """
    if isinstance(states, (list, tuple)) and states and isinstance(states[0], StateVector):
        epochs, x0 = states_to_array(states)
        if np.any(epochs != epochs[0]):
            raise ValueError("all initial states must share one epoch")
        if t_start is None:
            t_start = float(epochs[0])
    else:
        x0 = _as_matrix(states)
    if t_start is None:
        raise ValueError("t_start is required when states are given as an array")
    fm = config.force_model
    mu = fm.central_mu
    plan = plan_segments(
        x0[config.representative],
        t_start,
        t_end,
        mu,
        config.segment_policy,
        config.n_nodes,
        config.max_segment_span,
    )
    grouping = grouping or config.grouping(x0.shape[0])
    mats = build_matrices(config.n_nodes)
    segments = []
    current = x0.copy()
    for s, (a, b) in enumerate(plan.spans()):
        grid = build_grid(config.n_nodes, a, b)
        table = build_ephemeris_cache(fm.active_bodies, grid, mu, fm.proximity_floor)

        def solve(g, sl, grid=grid, table=table):
            if deadline is not None and time.monotonic() > deadline:
                raise RunTimeoutError(f"deadline passed before group {g} of segment {s}")
            ic = current[sl]
            if config.start_mode == "warm":
                guess = warm_start(ic, grid, mu)
            else:
                guess = cold_start(ic, grid.n_nodes)
            block = assemble_block(ic, grid, guess)
            out, report = solve_group(
                block,
                grid,
                mats,
                table,
                fm,
                config.tolerance,
                config.max_iterations,
                mode=config.error_mode,
                workers=internal_workers,
                group_index=g,
            )
            return disassemble_block(out), report

        jobs = list(enumerate(grouping.slices()))
        if executor is None:
            outputs = [solve(g, sl) for g, sl in jobs]
        else:
            outputs = list(executor.map(lambda job: solve(*job), jobs))
        samples = np.concatenate([o[0] for o in outputs], axis=0)
        reports = [o[1] for o in outputs]
        seg = SegmentResult(grid, samples, reports)
        failed = [g for g, r in enumerate(reports) if not r.converged]
        if failed:
            result = PropagationResult(plan, grouping, segments + [seg], failed)
            if raise_on_failure:
                raise PartialResultError(
                    f"groups {failed} did not converge in segment {s}",
                    completed=segments,
                    failed_groups=failed,
                    result=result,
                )
            return result
        segments.append(seg)
        # the next segment starts from the stored terminal samples, not re-evaluated ones
        current = samples[:, -1, :]
    return PropagationResult(plan, grouping, segments)
