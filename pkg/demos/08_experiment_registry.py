"""
The experiment registry
=======================

Every quantitative claim the package certifies is bundled as a registry
entry: a frozen configuration, the probes to run over the solution, and
the expected outcomes with pinned tolerances.  `pma-lab experiment run`
executes entries from the command line; this demo drives one entry in
process and prints its summary.
"""

import tempfile

from pma_lab import REGISTRY, list_experiments, run_experiment

# the catalogue, grouped as the command line prints it
print(f"{len(REGISTRY)} registered experiments:\n")
for spec in list_experiments():
    outcomes = ", ".join(o.name for o in spec.outcomes) or "none"
    print(f"  {spec.name:26s} [{spec.topic}] checks: {outcomes}")

# run the exactness entry end to end: configure, solve, probe, judge
with tempfile.TemporaryDirectory() as out:
    report = run_experiment(REGISTRY["quadratic-exact"], out, seed=0)

print("\n" + "\n".join(report.lines))

# the same artifacts (snapshots/, probes/, plots/, summary.txt) appear
# under --out when the entry runs through the command line
