"""Command-line entry point: ``picard-swarm {propagate,benchmark,selftest}``.

Exit codes: 0 success, 1 internal error, 2 input/parse error, 3 ephemeris
coverage error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .dynamics import MU_SUN, orbital_period
from .exceptions import CoverageError, InputError, PartialResultError
from .io import (
    RunConfig,
    load_ephemeris,
    load_run_config,
    read_batch_csv,
    write_history_csv,
    write_report_json,
    write_samples_csv,
    write_summary_csv,
)
from .oracle import compare_trajectories, rk_trajectory
from .runner import RunMode, default_workers, run_batch, run_benchmark, write_benchmark_csv

log = logging.getLogger("picard_swarm")

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_COVERAGE, EXIT_NONCONVERGED = 0, 1, 2, 3, 4
REFERENCE_ARC = 0.87  # orbital periods


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p):
    p.add_argument("--config", type=Path, help="run configuration JSON")
    p.add_argument("--input", type=Path, help="initial conditions CSV")
    p.add_argument("--ephemeris", type=Path, help="ephemeris JSON (default: two-body about the Sun)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--groups", type=int, help="number of outer groups")
    p.add_argument("--nodes", type=int, help="Chebyshev nodes per segment")
    p.add_argument("--tol", type=float, help="Picard tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap")
    p.add_argument("--start", choices=("warm", "cold"))
    p.add_argument("--threads", type=_int_list, help="worker count (benchmark: comma list)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picard-swarm", description="Augmented Picard-Chebyshev batch propagation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="propagate a batch of initial conditions")
    _common(p)
    p.add_argument("--mode", help="independent | augmented_sequential | augmented_parallel | grouped")
    p.add_argument("--oracle-check", action="store_true", dest="oracle_check")

    b = sub.add_parser("benchmark", help="time execution modes across thread counts")
    _common(b)
    b.add_argument("--modes", help="comma-separated run modes")
    b.add_argument("--repeat", type=int)
    b.add_argument("--synthetic", type=int, help="use N synthetic reference-system states instead of --input")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-baseline", action="store_true", dest="no_baseline")

    s = sub.add_parser("selftest", help="run the embedded verification suite")
    s.add_argument("--perturb-matrices", action="store_true", dest="perturb", help=argparse.SUPPRESS)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.groups is not None:
        cfg.groups = args.groups
    if args.nodes is not None:
        cfg.n_nodes = args.nodes
    if args.tol is not None:
        cfg.tolerance = args.tol
    if args.max_iter is not None:
        cfg.max_iterations = args.max_iter
    if args.start is not None:
        cfg.start_mode = args.start
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if args.out is not None:
        cfg.output.dir = str(args.out)
    return cfg


def _load(args):
    cfg = load_run_config(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    if args.ephemeris:
        central_mu, bodies = load_ephemeris(args.ephemeris)
    else:
        central_mu, bodies = MU_SUN, []
    return cfg, central_mu, bodies


def _end_epoch(cfg: RunConfig, states, mu):
    rep = states[cfg.representative]
    try:
        default = REFERENCE_ARC * orbital_period(rep, mu)
    except Exception:
        default = None
    return cfg.end_epoch(states[0].epoch, default)


def cmd_propagate(args) -> int:
    cfg, central_mu, bodies = _load(args)
    if args.oracle_check:
        cfg.output.oracle_check = True
    if args.input is None:
        raise InputError("--input is required")
    states = read_batch_csv(args.input, require_shared_epoch=True)
    pcfg = cfg.propagation_config(central_mu, bodies)
    t_end = _end_epoch(cfg, states, central_mu)
    workers = args.threads[0] if args.threads else (cfg.workers or default_workers())
    mode = RunMode.parse(cfg.mode)
    out = Path(cfg.output.dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    try:
        result, record = run_batch(states, t_end, pcfg, mode, workers, timeout=cfg.timeout_s)
    except PartialResultError as exc:
        if exc.result is not None:
            write_report_json(exc.result, out / "report.json")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    write_samples_csv(result, out / "samples.csv")
    if cfg.output.iteration_history:
        write_history_csv(result, out / "history.csv")
    oracle = None
    extra = {}
    if cfg.output.oracle_check:
        times = result.times()
        ref_samples = result.samples()
        oracle = np.array(
            [
                compare_trajectories(ref_samples[m], rk_trajectory(states[m].as_array(), pcfg.force_model, times)).max
                for m in range(len(states))
            ]
        )
        extra["oracle_max_rel_discrepancy"] = float(oracle.max())
    write_summary_csv(result, out / "summary.csv", oracle)
    write_report_json(result, out / "report.json", record, extra)
    print(
        f"propagated {len(states)} trajectories in {record.wall_time_s:.3f} s "
        f"({record.groups} groups, mode {record.mode}, max {record.max_iterations} iterations)"
    )
    if oracle is not None:
        print(f"max oracle discrepancy: {oracle.max():.3e}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg, central_mu, bodies = _load(args)
    if args.synthetic:
        from .scenarios import reference_force_model, synthetic_batch

        states = synthetic_batch(args.synthetic, seed=args.seed)
        if not args.ephemeris:
            fm = reference_force_model()
            central_mu, bodies = fm.central_mu, list(fm.bodies)
    elif args.input is not None:
        states = read_batch_csv(args.input)
    else:
        raise InputError("benchmark needs --input or --synthetic")
    if args.threads:
        cfg.benchmark.threads = args.threads
    if args.modes:
        cfg.benchmark.modes = [m for m in args.modes.split(",") if m]
    if args.repeat is not None:
        cfg.benchmark.repeat = args.repeat
    if args.no_baseline:
        cfg.benchmark.baseline = False
    try:
        modes = [RunMode.parse(m) for m in cfg.benchmark.modes]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    pcfg = cfg.propagation_config(central_mu, bodies)
    t_end = _end_epoch(cfg, states, central_mu)
    try:
        report = run_benchmark(
            states,
            t_end,
            pcfg,
            cfg.benchmark.threads,
            modes,
            cfg.benchmark.repeat,
            timeout=cfg.timeout_s,
            baseline=cfg.benchmark.baseline,
        )
    except PartialResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    out = Path(cfg.output.dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_benchmark_csv(report, out / "benchmark.csv")
    print(report.summary())
    print(f"group sizes: {list(pcfg.grouping(len(states)).group_sizes)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(perturb_matrices=args.perturb) else EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"propagate": cmd_propagate, "benchmark": cmd_benchmark, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (InputError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception as exc:  # noqa: BLE001 - top-level guard
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
