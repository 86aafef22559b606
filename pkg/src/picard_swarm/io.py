"""File formats: batch CSV, run-config JSON, ephemeris JSON and result outputs.

Numbers are written with 17 significant digits, so every double survives a
write/read round trip unchanged. Parsing uses ``float`` and never the locale.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import (
    MU_SUN,
    BodySpec,
    ChebyshevEphemeris,
    ChebyshevSegment,
    ForceModelConfig,
    KeplerElements,
    KeplerEphemeris,
    StateVector,
)
from .exceptions import InputError
from .propagator import PropagationConfig, PropagationResult

__all__ = [
    "BATCH_HEADER",
    "SAMPLE_HEADER",
    "FRAME",
    "RunConfig",
    "fmt",
    "read_batch_csv",
    "write_batch_csv",
    "load_run_config",
    "load_ephemeris",
    "dump_ephemeris",
    "write_samples_csv",
    "read_samples_csv",
    "write_summary_csv",
    "write_history_csv",
    "write_report_json",
]

BATCH_HEADER = ("epoch_s", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms")
SAMPLE_HEADER = ("trajectory_id", "segment", "node_index", "t_s", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms")
FRAME = "heliocentric-ecliptic-J2000"
UNITS = {"length": "km", "time": "s", "mu": "km3/s2", "angle": "deg"}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# batch of initial conditions
# --------------------------------------------------------------------------


def read_batch_csv(path, require_shared_epoch: bool = True) -> list:
    """Initial conditions, one :class:`StateVector` per data row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise InputError(f"{path}: empty file", row=1) from None
        if header != BATCH_HEADER:
            raise InputError(f"{path}: header must be {','.join(BATCH_HEADER)}", row=1)
        states = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(BATCH_HEADER):
                raise InputError(f"{path}:{lineno}: expected {len(BATCH_HEADER)} fields, got {len(row)}", row=lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}", row=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value", row=lineno)
            states.append(StateVector(vals[0], vals[1:4], vals[4:7]))
            if require_shared_epoch and states[-1].epoch != states[0].epoch:
                raise InputError(
                    f"{path}:{lineno}: epoch {vals[0]!r} differs from the first row's "
                    f"{states[0].epoch!r}; augmented runs need a shared epoch",
                    row=lineno,
                )
    if not states:
        raise InputError(f"{path}: no initial conditions")
    return states


def write_batch_csv(states, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BATCH_HEADER)
        for s in states:
            w.writerow([fmt(s.epoch)] + [fmt(c) for c in s.as_array()])


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------


@dataclass
class OutputOptions:
    dir: Optional[str] = None
    iteration_history: bool = True
    oracle_check: bool = False


@dataclass
class BenchmarkOptions:
    threads: list = field(default_factory=lambda: [1])
    modes: list = field(default_factory=lambda: ["independent", "augmented"])
    repeat: int = 5
    baseline: bool = True


@dataclass
class ForceModelOptions:
    kind: Optional[str] = None
    proximity_floor_km: float = 1.0


@dataclass
class RunConfig:
    n_nodes: int = 200
    tolerance: float = 1e-12
    error_mode: str = "relative"
    max_iterations: int = 100
    start_mode: str = "warm"
    segment_policy: str = "single"
    max_segment_span_s: Optional[float] = None
    representative: int = 0
    duration_s: Optional[float] = None
    t_end_s: Optional[float] = None
    mode: str = "grouped"
    groups: Optional[int] = None
    group_sizes: Optional[list] = None
    workers: Optional[int] = None
    timeout_s: Optional[float] = None
    force_model: ForceModelOptions = field(default_factory=ForceModelOptions)
    output: OutputOptions = field(default_factory=OutputOptions)
    benchmark: BenchmarkOptions = field(default_factory=BenchmarkOptions)

    def propagation_config(self, central_mu: float = MU_SUN, bodies=()) -> PropagationConfig:
        kind = self.force_model.kind or ("n_body" if bodies else "two_body")
        fm = ForceModelConfig(
            kind, central_mu, tuple(bodies) if kind == "n_body" else (), self.force_model.proximity_floor_km
        )
        return PropagationConfig(
            n_nodes=self.n_nodes,
            tolerance=self.tolerance,
            error_mode=self.error_mode,
            max_iterations=self.max_iterations,
            start_mode=self.start_mode,
            segment_policy=self.segment_policy,
            max_segment_span=self.max_segment_span_s,
            representative=self.representative,
            force_model=fm,
            groups=self.groups,
            group_sizes=tuple(self.group_sizes) if self.group_sizes else None,
        )

    def end_epoch(self, t_start: float, default_duration: Optional[float] = None) -> float:
        if self.duration_s is not None and self.t_end_s is not None:
            raise InputError("config takes only one of duration_s or t_end_s")
        if self.t_end_s is not None:
            return float(self.t_end_s)
        duration = self.duration_s if self.duration_s is not None else default_duration
        if duration is None:
            raise InputError("config needs duration_s or t_end_s")
        return t_start + float(duration)

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {"force_model": ForceModelOptions, "output": OutputOptions, "benchmark": BenchmarkOptions}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise InputError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        if cls is RunConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        kwargs[key] = value
    return cls(**kwargs)


def load_run_config(source) -> RunConfig:
    """Parse a run configuration from a path or an already-loaded mapping."""
    if isinstance(source, dict):
        data, where = source, "config"
    else:
        where = str(source)
        try:
            data = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{where}: invalid JSON ({exc})") from None
    return _build(RunConfig, data, where)


# --------------------------------------------------------------------------
# ephemeris file
# --------------------------------------------------------------------------


def load_ephemeris(source) -> tuple[float, list]:
    """``(central_mu, bodies)`` from an ephemeris JSON path or mapping."""
    if isinstance(source, dict):
        data, where = source, "ephemeris"
    else:
        where = str(source)
        try:
            data = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{where}: invalid JSON ({exc})") from None
    header = data.get("header", {})
    units = dict(UNITS, **header.get("units", {}))
    if units["length"] != "km" or units["time"] != "s" or units["mu"] != "km3/s2":
        raise InputError(f"{where}: only km, s and km3/s2 units are supported, got {units}")
    if header.get("frame", FRAME) != FRAME:
        raise InputError(f"{where}: unsupported frame {header.get('frame')!r}")
    to_rad = {"deg": math.radians, "rad": float}.get(units["angle"])
    if to_rad is None:
        raise InputError(f"{where}: angle unit must be deg or rad")
    try:
        central_mu = float(data["central_mu"])
        bodies = []
        for i, b in enumerate(data.get("bodies", [])):
            if "elements" in b:
                e = b["elements"]
                el = KeplerElements(
                    float(e["a"]), float(e["e"]), to_rad(e["i"]), to_rad(e["raan"]),
                    to_rad(e["argp"]), to_rad(e["M0"]), float(e["epoch"]),
                )
                eph = KeplerEphemeris(el, central_mu)
            elif "chebyshev" in b:
                segs = tuple(
                    ChebyshevSegment(
                        float(s["t_start"]), float(s["t_end"]),
                        np.asarray(s["coeffs_x"], float), np.asarray(s["coeffs_y"], float),
                        np.asarray(s["coeffs_z"], float),
                    )
                    for s in b["chebyshev"]
                )
                eph = ChebyshevEphemeris(segs)
            else:
                raise InputError(f"{where}: body {i} needs 'elements' or 'chebyshev'")
            bodies.append(BodySpec(str(b.get("name", f"body{i}")), float(b["mu"]), eph))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{where}: malformed ephemeris ({exc!r})") from None
    return central_mu, bodies


def dump_ephemeris(central_mu: float, bodies, path=None) -> dict:
    """Serialise bodies to the ephemeris JSON layout (angles in degrees)."""
    out = []
    for b in bodies:
        entry = {"name": b.name, "mu": b.mu}
        eph = b.ephemeris
        if isinstance(eph, KeplerEphemeris):
            el = eph.elements
            entry["elements"] = {
                "a": el.a, "e": el.e, "i": math.degrees(el.i), "raan": math.degrees(el.raan),
                "argp": math.degrees(el.argp), "M0": math.degrees(el.M0), "epoch": el.epoch,
            }
        else:
            entry["chebyshev"] = [
                {
                    "t_start": s.t_start, "t_end": s.t_end,
                    "coeffs_x": list(map(float, s.coeffs_x)),
                    "coeffs_y": list(map(float, s.coeffs_y)),
                    "coeffs_z": list(map(float, s.coeffs_z)),
                }
                for s in eph.segments
            ]
        out.append(entry)
    data = {"header": {"frame": FRAME, "units": dict(UNITS)}, "central_mu": central_mu, "bodies": out}
    if path is not None:
        Path(path).write_text(json.dumps(data, indent=2))
    return data


# --------------------------------------------------------------------------
# outputs
# --------------------------------------------------------------------------


def write_samples_csv(result: PropagationResult, path) -> None:
    """Every node sample of every trajectory; shared segment boundaries appear in both segments."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_HEADER)
        for s, seg in enumerate(result.segments):
            times = seg.grid.times
            for m in range(seg.samples.shape[0]):
                for j, t in enumerate(times):
                    w.writerow([m, s, j, fmt(t)] + [fmt(c) for c in seg.samples[m, j]])


def read_samples_csv(path) -> dict:
    """``{trajectory_id: (times, states)}`` from a samples CSV (segments concatenated)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {}
    for tid in np.unique(rows[:, 0]).astype(int):
        sel = rows[rows[:, 0] == tid]
        out[int(tid)] = (sel[:, 3], sel[:, 4:10])
    return out


def write_summary_csv(result: PropagationResult, path, oracle_discrepancy=None) -> None:
    """One row per trajectory: group, iterations and final state (plus oracle discrepancy)."""
    final = result.final_states
    group = result.grouping.assignment[:, 0]
    iters = result.iteration_counts().max(axis=0)
    header = ["trajectory_id", "group", "iterations", "t_s"] + list(BATCH_HEADER[1:])
    if oracle_discrepancy is not None:
        header.append("oracle_max_rel_discrepancy")
    t_end = result.segments[-1].grid.t_end
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for m in range(final.shape[0]):
            row = [m, int(group[m]), int(iters[group[m]]), fmt(t_end)] + [fmt(c) for c in final[m]]
            if oracle_discrepancy is not None:
                row.append(fmt(oracle_discrepancy[m]))
            w.writerow(row)


def write_history_csv(result: PropagationResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("segment", "group", "iteration", "error"))
        for s, seg in enumerate(result.segments):
            for g, rep in enumerate(seg.reports):
                for i, e in enumerate(rep.per_iteration_errors, start=1):
                    w.writerow((s, g, i, fmt(e)))


def write_report_json(result: PropagationResult, path, record=None, extra: Optional[dict] = None) -> dict:
    report = {
        "segments": [
            {
                "t_start": seg.grid.t_start,
                "t_end": seg.grid.t_end,
                "n_nodes": seg.grid.n_nodes,
                "groups": [rep.to_dict() for rep in seg.reports],
            }
            for seg in result.segments
        ],
        "group_sizes": list(result.grouping.group_sizes),
        "converged": result.converged,
        "failed_groups": list(result.failed_groups),
    }
    if record is not None:
        report["run"] = {k: (v.item() if hasattr(v, "item") else v) for k, v in record.row().items()}
    if extra:
        report.update(extra)
    Path(path).write_text(json.dumps(report, indent=2))
    return report
