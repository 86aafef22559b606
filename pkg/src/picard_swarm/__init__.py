"""Batch orbit propagation with an augmented Picard-Chebyshev integrator.

Trajectories sharing one set of Chebyshev time nodes are stacked into
component-major blocks and refined by a single fixed-point loop per group.
"""

from .augmentation import (
    ErrorSummary,
    GroupingPlan,
    TrajectoryBlock,
    assemble_block,
    block_iteration_error,
    disassemble_block,
    plan_from_sizes,
    reduce_max,
    solve_group,
    split_groups,
)
from .cheb_core import (
    ChebyshevGrid,
    IterationReport,
    PCMatrices,
    build_grid,
    build_matrices,
    chebyshev_vandermonde,
    pc_solve,
    picard_update,
    state_errors,
)
from .dynamics import (
    AU_KM,
    MU_SUN,
    BodySpec,
    ChebyshevEphemeris,
    EphemerisTable,
    ForceModelConfig,
    KeplerElements,
    KeplerEphemeris,
    StateVector,
    build_ephemeris_cache,
    elements_to_state,
    eval_force_block,
    eval_nbody,
    eval_two_body,
    fit_chebyshev_ephemeris,
    kepler_propagate,
    kepler_propagate_many,
    orbital_period,
)
from .oracle import OracleConfig, compare_trajectories, rk_propagate, rk_trajectory
from .propagator import PropagationConfig, PropagationResult, SegmentPlan, cold_start, plan_segments, propagate, warm_start
from .runner import BenchmarkReport, RunMode, run_batch, run_benchmark

__version__ = "0.1.0"
