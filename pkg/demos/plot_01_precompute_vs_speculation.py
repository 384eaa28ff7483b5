"""
Pre-computation versus speculation
==================================

A parent thread stores X = 1, spawns a child, then stores X = 2. The child's
p-slice runs first and sees the value at the spawn point; once the p-slice
is over, the child's ordinary code sees the newest value.
"""

from prophet_sim import MachineConfig, corpus, run_speculative
from prophet_sim.trace import parse_line

# the program ships with the package
print(corpus.source("fig5"))

# two PEs: one for the parent, one for the child
result = run_speculative(corpus.load("fig5"), MachineConfig(num_pes=2), trace=True)

# every trace line is "key=value" fields; pull out the child's remote reads of X
for line in result.trace:
    f = parse_line(line)
    if f["tid"] == "1" and f["ev"] in ("RPrR", "RSpR") and "got" in f:
        print(f"cycle {f['cycle']:>2}  {f['ev']}  X -> {f['got']}")

# same final state as the one-PE sequential run, a little faster
s = result.stats
print(f"\nsequential {s.seq_cycles} cycles, speculative {s.spmt_cycles} cycles")
