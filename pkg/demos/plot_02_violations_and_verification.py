"""
When speculation goes wrong
===========================

Two ways a speculative thread gets thrown away: a read-after-write
violation (restart) and a mispredicted live-in (failed verification).
"""

from prophet_sim import MachineConfig, corpus, run_speculative

# %%
# RAW violation. Thread B reads X long before the main thread writes it.
# The write's VioTest restarts B and squashes B's own child.
r = run_speculative(corpus.load("raw_violation"), MachineConfig(num_pes=4), trace=True)
for line in r.trace:
    if any(f"ev={k}" in line for k in ("VioTest level=0 addr=200", "restart", "squash")):
        print(line)
print("restarts per thread:", r.restarts)

# %%
# Failed verification. The p-slice guessed r3 = 9 and [100] = 42, the
# parent finished with r3 = 10 and [100] = 41.
r = run_speculative(corpus.load("mispredict"), MachineConfig(num_pes=2))
(report,) = r.reports
print("\npassed:", report.passed)
print("memory (addr, predicted, actual):", report.memory_mismatches)
print("registers (reg, consumed, actual):", report.register_mismatches)

# %%
# In both cases the final state still equals the sequential run;
# run_speculative raises EquivalenceError otherwise.
print("stats:", r.stats)
