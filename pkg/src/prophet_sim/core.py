"""Deterministic cycle engine and the sequential oracle.

Every cycle each busy PE, in PE order, retires at most one instruction or
advances one multi-cycle action (thread initialization, restart, stall,
verification, commit). Bus traffic triggered by an instruction is resolved
immediately inside that PE's slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bus import MessageKind, SnoopBus
from .errors import EquivalenceError, ProgramError, SimulationError, WatchdogError
from .isa import NUM_REGS, Instruction, Program, wrap64
from .threads import Event, ThreadContext, ThreadEngine, ThreadState, transition
from .trace import Trace
from .verify import (
    VerificationReport,
    resolve_verification,
    verification_cost,
    verify_sub_thread,
)

S = ThreadState
_HALT = Instruction("halt")


@dataclass(frozen=True)
class MachineConfig:
    num_pes: int = 4
    memory_words: int = 65536
    spawn_cost_cycles: int = 1
    squash_cost_cycles: int = 1
    mem_latency_cycles: int = 1
    verify_cost_per_word: int = 1
    bus_latency_cycles: int = 0
    max_cycles: int = 1_000_000
    check_invariants: bool = True

    def __post_init__(self):
        for name in ("memory_words", "spawn_cost_cycles", "squash_cost_cycles",
                     "mem_latency_cycles", "verify_cost_per_word", "bus_latency_cycles"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.num_pes < 1:
            raise ValueError("num_pes must be >= 1")
        if self.max_cycles <= 0:
            raise ValueError("max_cycles must be > 0")


@dataclass
class RunStats:
    spawned_threads: int = 0
    failed_threads: int = 0
    refused_spawns: int = 0
    seq_cycles: int = 0
    spmt_cycles: int = 0
    restarts: int = 0
    squashed_threads: int = 0
    verify_failures: int = 0
    stall_cycles: int = 0
    commits: int = 0

    @property
    def successful_pct(self) -> float | None:
        if self.spawned_threads == 0:
            return None
        return 100.0 * (self.spawned_threads - self.failed_threads) / self.spawned_threads

    @property
    def speedup(self) -> float | None:
        if not self.seq_cycles or not self.spmt_cycles:
            return None
        return self.seq_cycles / self.spmt_cycles


@dataclass
class RunResult:
    memory: np.ndarray
    registers: tuple[int, ...]
    cycles: int
    stats: RunStats
    trace: list[str] | None = None
    commit_order: list[int] = field(default_factory=list)
    spawn_order: list[int] = field(default_factory=list)
    restarts: dict[int, int] = field(default_factory=dict)
    reports: list[VerificationReport] = field(default_factory=list)

    def same_state(self, other: RunResult) -> bool:
        return self.registers == other.registers and np.array_equal(self.memory, other.memory)


# -- sequential oracle ---------------------------------------------------------

def _alu(op: str, a: int, b: int) -> int:
    if op == "add":
        return wrap64(a + b)
    if op == "sub":
        return wrap64(a - b)
    return wrap64(a * b)


def _taken(op: str, a: int, b: int) -> bool:
    if op == "beq":
        return a == b
    if op == "bne":
        return a != b
    return a < b


def run_sequential(program: Program, config: MachineConfig | None = None) -> RunResult:
    """Execute on one PE with speculation opcodes inert and p-slices skipped."""
    config = config or MachineConfig()
    instrs = program.instructions
    n = len(instrs)
    regs = [0] * NUM_REGS
    memory = np.zeros(config.memory_words, dtype=np.int64)
    words = config.memory_words
    mem_cost = max(1, config.mem_latency_cycles)
    pc = cycles = 0
    while pc < n:
        if cycles >= config.max_cycles:
            raise WatchdogError(f"sequential run exceeded {config.max_cycles} cycles")
        ins = instrs[pc]
        op = ins.op
        cycles += 1
        if op == "li":
            regs[ins.regs[0]] = ins.imm
        elif op == "mov":
            regs[ins.regs[0]] = regs[ins.regs[1]]
        elif op in ("add", "sub", "mul"):
            regs[ins.regs[0]] = _alu(op, regs[ins.regs[1]], regs[ins.regs[2]])
        elif op == "addi":
            regs[ins.regs[0]] = wrap64(regs[ins.regs[1]] + ins.imm)
        elif op in ("ld", "st"):
            cycles += mem_cost - 1
            addr = wrap64(regs[ins.regs[1]] + ins.imm)
            if not 0 <= addr < words:
                raise ProgramError(f"address {addr} out of range", ins.line)
            if op == "ld":
                regs[ins.regs[0]] = int(memory[addr])
            else:
                memory[addr] = regs[ins.regs[0]]
        elif op in ("beq", "bne", "blt"):
            if _taken(op, regs[ins.regs[0]], regs[ins.regs[1]]):
                pc = program.labels[ins.label]
                continue
        elif op == "jmp":
            pc = program.labels[ins.label]
            continue
        elif op == "halt":
            break
        elif op == "pslice_entry":
            pc = program.pslice_ranges[ins.label][1] + 1
            continue
        pc += 1
    stats = RunStats(seq_cycles=cycles)
    return RunResult(memory, tuple(regs), cycles, stats)


# -- speculative engine --------------------------------------------------------

class Simulator:
    def __init__(self, program: Program, config: MachineConfig | None = None, trace: bool = False):
        self.program = program
        self.config = config or MachineConfig()
        self.trace = Trace(enabled=trace)
        self.engine = ThreadEngine(program, self.config.num_pes, self.config.memory_words,
                                   self.trace, squash_cost_cycles=self.config.squash_cost_cycles)
        self.bus = SnoopBus(self.engine)
        self.cycle = 0
        self.finished = False
        self.final_registers: tuple[int, ...] | None = None
        self.stall_cycles = 0
        self.verify_failures = 0
        self.spawn_order: list[int] = []
        self.reports: list[VerificationReport] = []
        self.engine.start_main()

    # -- driver ------------------------------------------------------------
    def run(self) -> RunResult:
        while not self.finished:
            if self.cycle >= self.config.max_cycles:
                raise WatchdogError(f"speculative run exceeded {self.config.max_cycles} cycles")
            self.step()
        return RunResult(
            memory=self.engine.memory,
            registers=self.final_registers,
            cycles=self.cycle,
            stats=collect_stats(self),
            trace=list(self.trace.lines) if self.trace.enabled else None,
            commit_order=list(self.engine.commit_order),
            spawn_order=list(self.spawn_order),
            restarts=dict(self.engine.restarts),
            reports=list(self.reports),
        )

    def step(self) -> None:
        """Advance the machine by one cycle."""
        self.engine.cycle = self.trace.cycle = self.cycle
        for pe in self.engine.pes:
            t = pe.thread
            if t is None or self.finished:
                continue
            self._advance(t)
        if self.config.check_invariants and not self.finished:
            self.engine.check_invariants()
        self.cycle += 1

    def _advance(self, t: ThreadContext) -> None:
        if self.cycle < t.busy_until:
            return
        state = t.state
        if state is S.INITIALIZATION:
            if self.cycle < t.ready_cycle:
                return
            transition(t, Event.INIT_DONE)
            self.trace.emit("precompute", t, pc=t.pc)
        elif state is S.RESTART:
            if self.cycle < t.ready_cycle:
                return
            transition(t, Event.RESTARTED)
            self.trace.emit("precompute", t, pc=t.pc)
        elif state is S.WAIT:
            self._check_wait(t)
            return
        elif state is S.VERIFICATION:
            return
        elif state is S.SUB_THREAD_VERIFY:
            self._sub_thread_verify(t)
            return
        elif state is S.COMMIT:
            self._final_commit(t)
            return
        self._execute(t)

    # -- states with no instruction issue --------------------------------
    def _check_wait(self, t: ThreadContext) -> None:
        if t.wait_reason != "cqip":
            return
        label = self.program.instructions[t.pc].label
        succ = t.isl_successor
        if succ is None or succ.start_label != label:
            transition(t, Event.SUCCESSOR_LOST)
            t.wait_reason = None
            t.pc += 1
            self.trace.emit("resume", t, pc=t.pc)

    def _sub_thread_verify(self, t: ThreadContext) -> None:
        child = t.isl_successor
        label = self.program.instructions[t.pc].label
        if child is None or child.start_label != label:
            transition(t, Event.SUCCESSOR_LOST)
            t.action_done = None
            t.pc += 1
            return
        if t.action_done is None:
            if child.state in (S.INITIALIZATION, S.PRECOMPUTE, S.RESTART):
                self.stall_cycles += 1
                self.trace.emit("stall", t, child=child.thread_id, child_state=child.state.value)
                return
            cost = verification_cost(t, child, self.config.verify_cost_per_word)
            t.action_done = self.cycle + cost - 1
            if child.state is S.WAIT:
                transition(child, Event.VERIFY_REQUEST)
            self.trace.emit("verify_begin", t, child=child.thread_id, cost=cost)
        if self.cycle >= t.action_done:
            t.action_done = None
            report = verify_sub_thread(self.engine, t, child)
            self.reports.append(report)
            if not resolve_verification(self.engine, t, report):
                self.verify_failures += 1

    def _final_commit(self, t: ThreadContext) -> None:
        if t.action_done is None:
            t.action_done = self.cycle + verification_cost(t, None, self.config.verify_cost_per_word) - 1
        if self.cycle < t.action_done:
            return
        final = tuple(t.regs.values())
        words = t.cache.commit_lines(self.engine.memory)
        self.trace.emit("commit", t, words=words, version=t.version)
        self.trace.emit("halt", t)
        self.engine.pass_token(t)
        self.final_registers = final
        self.finished = True

    # -- instruction issue -------------------------------------------------
    def _fault(self, t: ThreadContext, addr: int, ins: Instruction) -> None:
        if t.state is S.PRECOMPUTE:
            # abandon the rest of the p-slice
            t.pc = self.program.pslice_bounds(t.start_label)[1]
            self.trace.emit("pslice_fault", t, addr=addr)
        elif t.state is S.SP_EXECUTION:
            transition(t, Event.THREAD_END)
            t.wait_reason = "fault"
            self.trace.emit("wait", t, reason="fault", addr=addr)
        else:
            raise ProgramError(f"address {addr} out of range", ins.line)

    def _execute(self, t: ThreadContext) -> None:
        prog = self.program
        ins = prog.instructions[t.pc] if t.pc < len(prog.instructions) else _HALT
        op = ins.op
        pre = t.state is S.PRECOMPUTE
        regs = t.regs
        read = regs.read_pre if pre else regs.read_sp
        write = regs.write_pre if pre else regs.write_sp
        cost = 1
        if op == "li":
            write(ins.regs[0], ins.imm)
            t.pc += 1
        elif op == "mov":
            write(ins.regs[0], read(ins.regs[1]))
            t.pc += 1
        elif op in ("add", "sub", "mul"):
            a = read(ins.regs[1])
            b = read(ins.regs[2])
            write(ins.regs[0], _alu(op, a, b))
            t.pc += 1
        elif op == "addi":
            write(ins.regs[0], wrap64(read(ins.regs[1]) + ins.imm))
            t.pc += 1
        elif op == "ld":
            addr = wrap64(read(ins.regs[1]) + ins.imm)
            if not 0 <= addr < self.config.memory_words:
                self._fault(t, addr, ins)
            else:
                value, hit = self._load(t, addr, pre)
                write(ins.regs[0], value)
                if not hit:
                    cost = max(1, self.config.mem_latency_cycles) + self.config.bus_latency_cycles
                t.pc += 1
        elif op == "st":
            value = read(ins.regs[0])
            addr = wrap64(read(ins.regs[1]) + ins.imm)
            if not 0 <= addr < self.config.memory_words:
                self._fault(t, addr, ins)
            else:
                self._store(t, addr, value, pre)
                t.pc += 1
        elif op in ("beq", "bne", "blt"):
            a = read(ins.regs[0])
            b = read(ins.regs[1])
            t.pc = prog.labels[ins.label] if _taken(op, a, b) else t.pc + 1
        elif op == "jmp":
            t.pc = prog.labels[ins.label]
        elif op == "halt":
            self._halt(t)
        else:
            cost = execute_speculation_opcode(self, t, ins)
        if t.alive:
            t.busy_until = self.cycle + cost

    def _load(self, t: ThreadContext, addr: int, pre: bool) -> tuple[int, bool]:
        if pre:
            self.bus.local(MessageKind.LPrR, t, addr)
            return t.cache.read_pre(addr, lambda: self.bus.remote_read_pre(t, addr))
        self.bus.local(MessageKind.LSpR, t, addr)
        return t.cache.read_sp(addr, lambda: self.bus.remote_read_sp(t, addr), t.version)

    def _store(self, t: ThreadContext, addr: int, value: int, pre: bool) -> None:
        if pre:
            t.cache.write_pre(addr, value)
            self.bus.local(MessageKind.LPrW, t, addr, value)
            return
        t.cache.write_sp(addr, value, t.version)
        self.bus.local(MessageKind.LSpW, t, addr, value)
        self.bus.viotest(t, addr)

    def _halt(self, t: ThreadContext) -> None:
        if t.state is S.SP_EXECUTION:
            transition(t, Event.THREAD_END)
            t.wait_reason = "halt"
            self.trace.emit("wait", t, reason="halt")
            return
        if t.state is not S.STABLE_EXECUTION:
            raise SimulationError(f"halt reached in state {t.state.value}")
        if t.isl_successor is not None:
            self.engine.squash_from(t.isl_successor, inclusive=True)
        transition(t, Event.HALT)
        t.action_done = None
        self._final_commit(t)


def execute_speculation_opcode(sim: Simulator, t: ThreadContext, ins: Instruction) -> int:
    """Apply one of spawn / cqip / squash / pslice_entry / pslice_exit; return its cost."""
    engine, prog, config = sim.engine, sim.program, sim.config
    op, label = ins.op, ins.label
    if op == "pslice_exit":
        if t.state is S.PRECOMPUTE:
            t.regs.seal_precomputation()
            transition(t, Event.PSLICE_EXIT)
            sim.trace.emit("pslice_exit", t, label=label)
        t.pc += 1
        return 1
    if t.state is S.PRECOMPUTE:
        raise SimulationError(f"{op} executed inside a p-slice (thread {t.thread_id})")
    if op == "pslice_entry":
        t.pc = prog.pslice_bounds(label)[1] + 1
        return 1
    if op == "spawn":
        child = engine.spawn_thread(t, label, ready_cycle=sim.cycle + max(1, config.spawn_cost_cycles))
        if child is not None:
            sim.spawn_order.append(child.thread_id)
        t.pc += 1
        return max(1, config.spawn_cost_cycles)
    if op == "squash":
        victim = t.isl_successor
        while victim is not None and victim.start_label != label:
            victim = victim.isl_successor
        if victim is not None:
            engine.squash_from(victim, inclusive=True)
        sim.trace.emit("squash_instr", t, label=label,
                       victim=victim.thread_id if victim is not None else None)
        t.pc += 1
        return max(1, config.squash_cost_cycles)
    # cqip
    succ = t.isl_successor
    if succ is not None and succ.start_label == label:
        if t.stable:
            transition(t, Event.CQIP)
            t.action_done = None
            sim.trace.emit("thread_end", t, label=label, child=succ.thread_id)
        else:
            transition(t, Event.THREAD_END)
            t.wait_reason = "cqip"
            sim.trace.emit("wait", t, reason="cqip", label=label)
    else:
        t.pc += 1
    return 1


def collect_stats(sim: Simulator) -> RunStats:
    engine = sim.engine
    return RunStats(
        spawned_threads=engine.spawned,
        failed_threads=len(engine.failed),
        refused_spawns=engine.refused_spawns,
        spmt_cycles=sim.cycle,
        restarts=sum(engine.restarts.values()),
        squashed_threads=len(engine.squashed),
        verify_failures=sim.verify_failures,
        stall_cycles=sim.stall_cycles,
        commits=len(engine.commit_order),
    )


def run_speculative(program: Program, config: MachineConfig | None = None,
                    trace: bool = False, check: bool = True) -> RunResult:
    """Run the speculative machine and (by default) check it against the oracle."""
    config = config or MachineConfig()
    seq = run_sequential(program, config)
    result = Simulator(program, config, trace=trace).run()
    result.stats.seq_cycles = seq.cycles
    if check and not result.same_state(seq):
        diff_regs = [i for i in range(NUM_REGS) if result.registers[i] != seq.registers[i]]
        diff_mem = np.flatnonzero(result.memory != seq.memory)[:8].tolist()
        raise EquivalenceError(
            f"speculative state differs from sequential: registers {diff_regs}, memory {diff_mem}"
        )
    return result
