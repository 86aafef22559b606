"""Timing the execution modes on a few hundred trajectories.

Run with ``python demos/04_execution_modes.py``; set PICARD_SWARM_THREADS to
try more workers.
"""

# %%
from picard_swarm import PropagationConfig
from picard_swarm.runner import default_workers, run_benchmark
from picard_swarm.scenarios import reference_force_model, reference_period, synthetic_batch

states = synthetic_batch(300, seed=1)
t_end = 0.87 * reference_period()
cfg = PropagationConfig(force_model=reference_force_model(), groups=4)

threads = sorted({1, default_workers()})
report = run_benchmark(
    states, t_end, cfg, threads, ["independent", "augmented_sequential", "grouped"], repeat=3
)
print(report.summary())
