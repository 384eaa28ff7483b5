"""
Speedup versus PE count
=======================

Sweep the built-in programs and a batch of generated ones over 1, 2, 4
and 8 PEs. The independent loop scales, the loop-carried one does not,
and random programs land in between.
"""

import numpy as np

from prophet_sim import MachineConfig, corpus, run_speculative
from prophet_sim.generator import random_program

PES = [1, 2, 4, 8]


def speedups(program):
    return [run_speculative(program, MachineConfig(num_pes=p)).stats.speedup for p in PES]


print(f"{'program':<18}" + "".join(f"{p:>8}" for p in PES))
for name in corpus.names():
    row = speedups(corpus.load(name))
    print(f"{name:<18}" + "".join(f"{s:8.3f}" for s in row))

# %%
# Generated programs: mean and spread of the speedup at each PE count
table = np.array([speedups(random_program(seed)) for seed in range(100)])
print(f"\n{'generated (mean)':<18}" + "".join(f"{s:8.3f}" for s in table.mean(axis=0)))
print(f"{'generated (max)':<18}" + "".join(f"{s:8.3f}" for s in table.max(axis=0)))
print(f"{'generated (min)':<18}" + "".join(f"{s:8.3f}" for s in table.min(axis=0)))
