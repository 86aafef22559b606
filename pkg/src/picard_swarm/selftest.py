"""Embedded verification suite behind ``picard-swarm selftest``."""

from __future__ import annotations

import dataclasses

import numpy as np

from .augmentation import (
    disassemble_block,
    assemble_block,
    reduce_max,
    split_groups,
)
from .cheb_core import build_grid, build_matrices, chebyshev_vandermonde, picard_update
from .dynamics import MU_SUN, kepler_propagate_many, orbital_period
from .propagator import PropagationConfig, propagate
from .runner import max_discrepancy
from .scenarios import reference_force_model, reference_period, reference_state, synthetic_batch


def _perturbed(mats):
    return dataclasses.replace(mats, combined=mats.combined * (1.0 + 1e-6))


def check_inversion(perturb=False):
    worst = 0.0
    for n in (3, 8, 16, 64, 200):
        mats = build_matrices(n)
        plain = chebyshev_vandermonde(build_grid(n, -1.0, 1.0).tau, n - 1)
        worst = max(worst, float(np.abs(plain @ mats.xform - np.eye(n)).max()))
    return worst <= 1e-12, f"max |T X - I| = {worst:.2e}"


def check_exactness(perturb=False):
    n = 16
    mats = build_matrices(n)
    if perturb:
        mats = _perturbed(mats)
    grid = build_grid(n, 0.5, 2.0)
    worst = 0.0
    for deg in range(11):
        force = grid.omega2 * grid.times[:, None] ** deg
        y = picard_update(mats, force, np.array([1.0]))[:, 0]
        exact = 1.0 + (grid.times ** (deg + 1) - 0.5 ** (deg + 1)) / (deg + 1)
        worst = max(worst, float(np.max(np.abs(y - exact) / np.abs(exact))))
    return worst <= 1e-12, f"max relative error over degrees 0..10 = {worst:.2e}"


def check_kepler(perturb=False):
    x0 = reference_state().as_array()
    period = orbital_period(x0, MU_SUN)
    back = kepler_propagate_many(x0, MU_SUN, [period, -period, 3 * period])
    err = float(np.max(np.abs(back - x0) / np.abs(x0).max()))
    return err <= 1e-11, f"full-period round trip error = {err:.2e}"


def check_layout(perturb=False):
    rng = np.random.default_rng(1)
    traj = rng.normal(size=(37, 9, 6))
    grid = build_grid(9, 0.0, 1.0)
    ok = np.array_equal(disassemble_block(assemble_block(traj[:, 0], grid, traj)), traj)
    vals = rng.normal(size=1001)
    ok = ok and reduce_max(vals) == vals.max() and reduce_max(vals, workers=3, chunk=64) == vals.max()
    return bool(ok), "assemble/disassemble and reduce_max exact"


def check_grouping(perturb=False):
    states = synthetic_batch(64, seed=7)
    t_end = 0.87 * reference_period()
    fm = reference_force_model()
    results = {}
    for p in (1, 4, 64):
        results[p] = propagate(states, t_end, PropagationConfig(force_model=fm), grouping=split_groups(64, p))
    worst = max(max_discrepancy(results[1], results[p]) for p in (4, 64))
    cold = propagate(states, t_end, PropagationConfig(force_model=fm, start_mode="cold"))
    warm_it = int(results[1].iteration_counts().max())
    cold_it = int(cold.iteration_counts().max())
    ok = worst <= 1e-12 and warm_it < cold_it
    return ok, f"max discrepancy across 1/4/64 groups = {worst:.2e}; iterations warm {warm_it}, cold {cold_it}"


CHECKS = [
    ("transform inversion", check_inversion),
    ("polynomial exactness", check_exactness),
    ("kepler round trip", check_kepler),
    ("layout and reduction", check_layout),
    ("grouping invariance (64 states)", check_grouping),
]


def run_selftest(perturb_matrices: bool = False, out=print) -> bool:
    all_ok = True
    for name, check in CHECKS:
        try:
            ok, detail = check(perturb_matrices)
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
