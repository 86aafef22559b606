"""End-to-end file workflow through the command-line entry point.

Writes an initial-conditions CSV and an ephemeris JSON, then runs
``picard-swarm propagate`` and ``picard-swarm selftest`` in-process.
Run with ``python demos/05_file_workflow.py``.
"""

# %%
import csv
import json
import tempfile
from pathlib import Path

from picard_swarm.cli import main
from picard_swarm.io import dump_ephemeris, write_batch_csv
from picard_swarm.scenarios import reference_force_model, synthetic_batch

work = Path(tempfile.mkdtemp(prefix="picard_swarm_"))
fm = reference_force_model()
write_batch_csv(synthetic_batch(8, seed=2), work / "ics.csv")
dump_ephemeris(fm.central_mu, fm.bodies, work / "sys.json")
(work / "run.json").write_text(json.dumps({"groups": 2, "output": {"iteration_history": True}}))

# %%
code = main(
    [
        "propagate",
        "--config", str(work / "run.json"),
        "--input", str(work / "ics.csv"),
        "--ephemeris", str(work / "sys.json"),
        "--out", str(work / "results"),
        "--oracle-check",
    ]
)
print("exit code", code)
with open(work / "results" / "summary.csv") as fh:
    for row in list(csv.DictReader(fh))[:3]:
        print(row["trajectory_id"], row["iterations"], row["oracle_max_rel_discrepancy"])

# %%
main(["selftest"])
print("outputs in", work)
