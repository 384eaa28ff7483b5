"""Stable-thread duties at thread end: verify the sub thread, commit, pass the token."""

from __future__ import annotations

from dataclasses import dataclass, field

from .isa import NUM_REGS
from .threads import Event, ThreadContext, ThreadEngine, ThreadState, transition


@dataclass
class VerificationReport:
    memory_mismatches: list[tuple[int, int, int]] = field(default_factory=list)
    register_mismatches: list[tuple[int, int, int]] = field(default_factory=list)
    compared_words: int = 0

    @property
    def passed(self) -> bool:
        return not self.memory_mismatches and not self.register_mismatches


def stable_view(engine: ThreadEngine, stable: ThreadContext, addr: int) -> int:
    line = stable.cache.owned_view(addr)
    if line is not None:
        return line.data
    return int(engine.memory[addr])


def verify_sub_thread(engine: ThreadEngine, stable: ThreadContext,
                      child: ThreadContext | None) -> VerificationReport:
    """Compare the child's p-slice results with the stable thread's final state.

    Memory: every address the p-slice wrote (PreEx / PreExO lines). Registers:
    every register whose first speculative access was a read, against the
    value that read returned. Nothing is mutated.
    """
    report = VerificationReport()
    if child is None:
        return report
    for addr, predicted in child.cache.lines_needing_verification():
        report.compared_words += 1
        if not 0 <= addr < len(engine.memory):
            report.memory_mismatches.append((addr, predicted, None))
            continue
        actual = stable_view(engine, stable, addr)
        if actual != predicted:
            report.memory_mismatches.append((addr, predicted, actual))
    final = stable.regs.values()
    for reg, consumed in child.regs.registers_needing_validation():
        report.compared_words += 1
        if consumed != final[reg]:
            report.register_mismatches.append((reg, consumed, final[reg]))
    return report


def verification_cost(stable: ThreadContext, child: ThreadContext | None, per_word: int) -> int:
    words = len(stable.cache.dirty_lines())
    if child is not None:
        words += len(child.cache.lines_needing_verification())
        words += len(child.regs.registers_needing_validation())
    return 1 + per_word * words


def resolve_verification(engine: ThreadEngine, stable: ThreadContext,
                         report: VerificationReport) -> bool:
    """Commit on success; otherwise squash the sub thread and keep running."""
    child = stable.isl_successor
    engine.trace.emit(
        "verify", stable, child=child.thread_id if child else None,
        passed=report.passed, compared=report.compared_words,
        mem_mismatch=[f"{a}:{p}/{q}" for a, p, q in report.memory_mismatches],
        reg_mismatch=[f"r{r}:{p}/{q}" for r, p, q in report.register_mismatches],
    )
    if report.passed:
        transition(stable, Event.VERIFY_PASSED)
        commit_thread(engine, stable)
        return True
    engine.squash_from(child, inclusive=True)
    transition(stable, Event.VERIFY_FAILED)
    # continue past the cqip into the would-be child's code
    stable.pc += 1
    return False


def commit_thread(engine: ThreadEngine, stable: ThreadContext) -> tuple[int, ...]:
    """Publish the stable thread's state, sync its successor, hand over the token.

    Returns the committing thread's final register values.
    """
    if stable.state is not ThreadState.COMMIT:
        raise ValueError(f"commit from state {stable.state.value}")
    final = tuple(stable.regs.values())
    words = stable.cache.commit_lines(engine.memory)
    child = stable.isl_successor
    if child is not None:
        child.regs.synchronize_from_parent(final)
    engine.trace.emit("commit", stable, words=words, version=stable.version)
    engine.pass_token(stable)
    assert len(final) == NUM_REGS
    return final
