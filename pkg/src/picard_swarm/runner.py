"""Execution modes, worker-pool scheduling of group solves, and the benchmark harness."""

from __future__ import annotations

import csv
import enum
import os
import platform
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .augmentation import split_groups, to_component_major
from .cheb_core import state_errors
from .propagator import PropagationConfig, PropagationResult, propagate

__all__ = [
    "RunMode",
    "RunRecord",
    "BenchmarkReport",
    "BENCHMARK_COLUMNS",
    "default_workers",
    "machine_descriptor",
    "max_discrepancy",
    "run_batch",
    "run_benchmark",
    "write_benchmark_csv",
]

BENCHMARK_COLUMNS = ("mode", "threads", "groups", "wall_time_s", "speedup", "max_iterations", "max_discrepancy")


class RunMode(str, enum.Enum):
    INDEPENDENT = "independent"
    AUGMENTED_SEQUENTIAL = "augmented_sequential"
    AUGMENTED_PARALLEL = "augmented_parallel"
    GROUPED = "grouped"

    @classmethod
    def parse(cls, value) -> "RunMode":
        if isinstance(value, cls):
            return value
        aliases = {"augmented": cls.AUGMENTED_PARALLEL, "sequential": cls.AUGMENTED_SEQUENTIAL}
        value = str(value).strip().lower().replace("-", "_")
        return aliases.get(value) or cls(value)


def default_workers() -> int:
    env = os.environ.get("PICARD_SWARM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def machine_descriptor() -> str:
    return f"{platform.machine()} {platform.processor() or platform.system()} cpus={os.cpu_count()}"


@dataclass
class RunRecord:
    mode: str
    threads: int
    groups: int
    wall_time_s: float
    iteration_counts: np.ndarray
    speedup: float = 1.0
    max_discrepancy: float = 0.0
    wall_times: list = field(default_factory=list)

    @property
    def max_iterations(self) -> int:
        return int(np.max(self.iteration_counts))

    def row(self) -> dict:
        return {
            "mode": self.mode,
            "threads": self.threads,
            "groups": self.groups,
            "wall_time_s": self.wall_time_s,
            "speedup": self.speedup,
            "max_iterations": self.max_iterations,
            "max_discrepancy": self.max_discrepancy,
        }


@dataclass
class BenchmarkReport:
    records: list
    machine: str = field(default_factory=machine_descriptor)

    def rows(self) -> list:
        return [r.row() for r in self.records]

    def summary(self) -> str:
        lines = [f"machine: {self.machine}"]
        lines.append(f"{'mode':<22}{'threads':>8}{'groups':>8}{'time [s]':>12}{'speedup':>10}{'iters':>7}{'discrepancy':>13}")
        for r in self.records:
            lines.append(
                f"{r.mode:<22}{r.threads:>8}{r.groups:>8}{r.wall_time_s:>12.4f}"
                f"{r.speedup:>10.3f}{r.max_iterations:>7}{r.max_discrepancy:>13.3e}"
            )
        return "\n".join(lines)


def max_discrepancy(a: PropagationResult, b: PropagationResult) -> float:
    """Largest per-state relative difference between two results over all nodes."""
    return float(
        np.max(state_errors(to_component_major(a.samples()), to_component_major(b.samples())))
    )


def _schedule(mode: RunMode, n_states: int, workers: int, config: PropagationConfig):
    """Grouping plan, group-level pool size and intra-group thread count for a mode."""
    if mode is RunMode.INDEPENDENT:
        return split_groups(n_states, n_states), workers, 1
    if mode is RunMode.AUGMENTED_SEQUENTIAL:
        return split_groups(n_states, 1), 1, 1
    if mode is RunMode.AUGMENTED_PARALLEL:
        return split_groups(n_states, 1), 1, workers
    return config.grouping(n_states), workers, 1


def run_batch(
    states,
    t_end: float,
    config: PropagationConfig = PropagationConfig(),
    mode="grouped",
    workers: int = 1,
    t_start: Optional[float] = None,
    timeout: Optional[float] = None,
) -> tuple[PropagationResult, RunRecord]:
    """Propagate a batch in one execution mode and time the solve phase.

    ``grouped`` dispatches the groups of ``config`` to a pool of ``workers``
    threads; each group converges on its own. ``independent`` runs one Picard
    loop per trajectory (spread over ``workers`` threads when > 1).
    """
    mode = RunMode.parse(mode)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n_states = len(states)
    plan, pool_size, internal = _schedule(mode, n_states, workers, config)
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    if pool_size > 1:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            result = propagate(
                states, t_end, config, t_start=t_start, grouping=plan, executor=pool, deadline=deadline
            )
    else:
        result = propagate(
            states, t_end, config, t_start=t_start, grouping=plan, internal_workers=internal, deadline=deadline
        )
    elapsed = time.monotonic() - start
    record = RunRecord(mode.value, workers, plan.n_groups, elapsed, result.iteration_counts(), wall_times=[elapsed])
    return result, record


def run_benchmark(
    states,
    t_end: float,
    config: PropagationConfig = PropagationConfig(),
    thread_counts: Sequence[int] = (1,),
    modes: Sequence = ("independent", "augmented"),
    repeat: int = 5,
    t_start: Optional[float] = None,
    timeout: Optional[float] = None,
    baseline: bool = True,
) -> BenchmarkReport:
    """Time every (mode, thread count) pair; median of ``repeat`` runs.

    Speedups and discrepancies are relative to the independent mode on one
    thread, which is always measured. With ``baseline=False`` the first
    requested case is the reference instead (useful when independent runs of
    a large batch would take too long).
    """
    modes = [RunMode.parse(m) for m in modes]
    thread_counts = [int(t) for t in thread_counts]
    cases = [(m, t) for m in modes for t in thread_counts]
    baseline_case = (RunMode.INDEPENDENT, 1) if baseline else cases[0]

    def measure(mode, threads):
        times = []
        result = rec = None
        for _ in range(max(1, repeat)):
            result, rec = run_batch(states, t_end, config, mode, threads, t_start=t_start, timeout=timeout)
            times.append(rec.wall_time_s)
        rec.wall_times = times
        rec.wall_time_s = statistics.median(times)
        return result, rec

    base_result, base_rec = measure(*baseline_case)
    records = []
    for mode, threads in cases:
        if (mode, threads) == baseline_case:
            result, rec = base_result, base_rec
        else:
            result, rec = measure(mode, threads)
        rec.speedup = base_rec.wall_time_s / rec.wall_time_s
        rec.max_discrepancy = max_discrepancy(result, base_result)
        records.append(rec)
    return BenchmarkReport(records)


def write_benchmark_csv(report: BenchmarkReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCHMARK_COLUMNS)
        writer.writeheader()
        for row in report.rows():
            row = dict(row)
            for key in ("wall_time_s", "speedup", "max_discrepancy"):
                row[key] = repr(float(row[key]))
            writer.writerow(row)
