"""Thread lifecycle, thread versions and the Immediate Successor List (ISL).

Live threads form a doubly linked list ordered by logical program order. The
head is the single stable (non-speculative) thread. A spawned child is linked
directly after its parent, so a parent that spawns twice ends up with the
younger child nearer to it than the older one.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import SimulationError
from .isa import NUM_REGS, Program
from .memcache import L1MemCache
from .regcache import RegisterFile
from .trace import Trace


class ThreadState(Enum):
    IDLE = "Idle"
    INITIALIZATION = "Initialization"
    PRECOMPUTE = "PreCompute"
    SP_EXECUTION = "SpExecution"
    STABLE_EXECUTION = "StableExecution"
    WAIT = "Wait"
    SUB_THREAD_VERIFY = "SubThreadVerify"
    VERIFICATION = "Verification"
    COMMIT = "Commit"
    SQUASH = "Squash"
    RESTART = "Restart"


class Event(Enum):
    ALLOCATED = "allocated"
    INIT_DONE = "init_done"
    MAIN_START = "main_start"
    PSLICE_EXIT = "pslice_exit"
    THREAD_END = "thread_end"
    SUCCESSOR_LOST = "successor_lost"
    STABLE_TOKEN = "stable_token"
    VERIFY_REQUEST = "verify_request"
    CQIP = "cqip"
    HALT = "halt"
    VERIFY_PASSED = "verify_passed"
    VERIFY_FAILED = "verify_failed"
    COMMIT_DONE = "commit_done"
    SQUASH = "squash"
    SQUASH_DONE = "squash_done"
    VIOLATION = "violation"
    RESTARTED = "restarted"


S, E = ThreadState, Event

SPECULATIVE_STATES = frozenset(
    {S.INITIALIZATION, S.PRECOMPUTE, S.SP_EXECUTION, S.WAIT, S.VERIFICATION, S.RESTART}
)

TRANSITIONS: dict[tuple[ThreadState, Event], ThreadState] = {
    (S.IDLE, E.ALLOCATED): S.INITIALIZATION,
    (S.INITIALIZATION, E.INIT_DONE): S.PRECOMPUTE,
    (S.INITIALIZATION, E.MAIN_START): S.STABLE_EXECUTION,
    (S.PRECOMPUTE, E.PSLICE_EXIT): S.SP_EXECUTION,
    (S.SP_EXECUTION, E.THREAD_END): S.WAIT,
    (S.SP_EXECUTION, E.STABLE_TOKEN): S.STABLE_EXECUTION,
    (S.WAIT, E.STABLE_TOKEN): S.STABLE_EXECUTION,
    (S.WAIT, E.SUCCESSOR_LOST): S.SP_EXECUTION,
    (S.WAIT, E.VERIFY_REQUEST): S.VERIFICATION,
    (S.VERIFICATION, E.STABLE_TOKEN): S.STABLE_EXECUTION,
    (S.STABLE_EXECUTION, E.CQIP): S.SUB_THREAD_VERIFY,
    (S.STABLE_EXECUTION, E.HALT): S.COMMIT,
    (S.SUB_THREAD_VERIFY, E.VERIFY_PASSED): S.COMMIT,
    (S.SUB_THREAD_VERIFY, E.VERIFY_FAILED): S.STABLE_EXECUTION,
    (S.SUB_THREAD_VERIFY, E.SUCCESSOR_LOST): S.STABLE_EXECUTION,
    (S.COMMIT, E.COMMIT_DONE): S.IDLE,
    (S.SP_EXECUTION, E.VIOLATION): S.RESTART,
    (S.WAIT, E.VIOLATION): S.RESTART,
    (S.RESTART, E.RESTARTED): S.PRECOMPUTE,
    (S.SQUASH, E.SQUASH_DONE): S.IDLE,
}
for _state in SPECULATIVE_STATES:
    TRANSITIONS[(_state, E.SQUASH)] = S.SQUASH


@dataclass(eq=False)
class PE:
    pe_id: int
    cache: L1MemCache = field(default_factory=L1MemCache)
    regs: RegisterFile = field(default_factory=RegisterFile)
    thread: ThreadContext | None = None


@dataclass(eq=False)
class ThreadContext:
    thread_id: int
    version: int
    start_label: str | None
    pc: int
    spawn_snapshot: tuple[int, ...]
    parent: ThreadContext | None = None
    state: ThreadState = ThreadState.IDLE
    isl_successor: ThreadContext | None = None
    isl_predecessor: ThreadContext | None = None
    stable: bool = False
    pe: PE | None = None
    alive: bool = True
    spawn_version: int = 0
    # scheduling bookkeeping
    ready_cycle: int = 0
    busy_until: int = 0
    action_done: int | None = None
    wait_reason: str | None = None

    @property
    def cache(self) -> L1MemCache:
        return self.pe.cache

    @property
    def regs(self) -> RegisterFile:
        return self.pe.regs

    def __repr__(self) -> str:
        return f"<T{self.thread_id} v{self.version} {self.state.value} pc={self.pc}>"


def transition(thread: ThreadContext, event: Event) -> ThreadState:
    try:
        new = TRANSITIONS[(thread.state, event)]
    except KeyError:
        raise SimulationError(
            f"thread {thread.thread_id}: no transition from {thread.state.value} on {event.value}"
        ) from None
    thread.state = new
    return new


class ThreadEngine:
    """Processing elements, live threads and main memory of one run."""

    def __init__(self, program: Program, num_pes: int, memory_words: int, trace: Trace | None = None,
                 squash_cost_cycles: int = 1):
        self.program = program
        self.trace = trace or Trace(enabled=False)
        self.memory = np.zeros(memory_words, dtype=np.int64)
        self.pes = [PE(i) for i in range(num_pes)]
        self.squash_cost_cycles = squash_cost_cycles
        self.cycle = 0
        self.head: ThreadContext | None = None
        self.next_tid = 0
        self.spawned = 0
        self.refused_spawns = 0
        self.failed: set[int] = set()
        self.restarts: Counter[int] = Counter()
        self.squashed: list[int] = []
        self.commit_order: list[int] = []

    # -- lookup -----------------------------------------------------------
    def isl(self) -> list[ThreadContext]:
        out, t = [], self.head
        while t is not None:
            out.append(t)
            t = t.isl_successor
        return out

    def successors(self, thread: ThreadContext) -> list[ThreadContext]:
        out, t = [], thread.isl_successor
        while t is not None:
            out.append(t)
            t = t.isl_successor
        return out

    def predecessors(self, thread: ThreadContext) -> list[ThreadContext]:
        """Logically earlier live threads, nearest first."""
        out, t = [], thread.isl_predecessor
        while t is not None:
            out.append(t)
            t = t.isl_predecessor
        return out

    def speculative_level(self, thread: ThreadContext) -> int:
        if not thread.alive:
            raise SimulationError(f"thread {thread.thread_id} is not live")
        return len(self.predecessors(thread))

    def idle_pe(self) -> PE | None:
        for pe in self.pes:
            if pe.thread is None:
                return pe
        return None

    def _allocate(self, pe: PE, thread: ThreadContext) -> None:
        pe.thread = thread
        thread.pe = pe
        pe.cache.invalidate_all()
        pe.cache.owner = thread
        pe.regs.reset(thread.spawn_snapshot)
        pe.regs.on_event = lambda kind, **kw: self.trace.emit(kind, thread, **kw)
        transition(thread, Event.ALLOCATED)

    def _free(self, thread: ThreadContext) -> None:
        pe = thread.pe
        pe.cache.invalidate_all()
        pe.regs.reset([0] * NUM_REGS)
        pe.regs.on_event = None
        pe.cache.owner = None
        pe.thread = None
        thread.alive = False

    # -- lifecycle --------------------------------------------------------
    def start_main(self, entry_pc: int = 0) -> ThreadContext:
        main = ThreadContext(self.next_tid, version=1, start_label=None, pc=entry_pc,
                             spawn_snapshot=(0,) * NUM_REGS, spawn_version=1)
        self.next_tid += 1
        self._allocate(self.pes[0], main)
        main.regs.seal_precomputation()
        transition(main, Event.MAIN_START)
        main.stable = True
        self.head = main
        self.trace.emit("start", main, version=main.version)
        return main

    def spawn_thread(self, parent: ThreadContext, label: str, ready_cycle: int | None = None):
        """Spawn a child at ``label``; returns None if no PE is idle."""
        if parent.state not in (S.SP_EXECUTION, S.STABLE_EXECUTION):
            raise SimulationError(f"spawn from thread in state {parent.state.value}")
        pe = self.idle_pe()
        if pe is None:
            self.refused_spawns += 1
            self.trace.emit("spawn_refused", parent, label=label)
            return None
        entry, _ = self.program.pslice_bounds(label)
        child = ThreadContext(
            self.next_tid,
            version=parent.version,
            start_label=label,
            pc=entry + 1,
            spawn_snapshot=tuple(parent.regs.values()),
            parent=parent,
            spawn_version=parent.version,
            ready_cycle=self.cycle + 1 if ready_cycle is None else ready_cycle,
        )
        self.next_tid += 1
        parent.version += 1
        self._allocate(pe, child)
        # link as parent's immediate successor, inheriting its successors
        child.isl_predecessor = parent
        child.isl_successor = parent.isl_successor
        if parent.isl_successor is not None:
            parent.isl_successor.isl_predecessor = child
        parent.isl_successor = child
        self.spawned += 1
        self.trace.emit("spawn", child, parent=parent.thread_id, label=label,
                        version=child.version, parent_version=parent.version)
        return child

    def squash_from(self, victim: ThreadContext, inclusive: bool = True) -> set[int]:
        """Terminate ``victim`` (if inclusive) and every more speculative thread."""
        doomed = ([victim] if inclusive else []) + self.successors(victim)
        if not doomed:
            return set()
        if any(t.stable for t in doomed):
            raise SimulationError("attempted to squash the stable thread")
        tail = victim.isl_predecessor if inclusive else victim
        tail.isl_successor = None
        for t in doomed:
            transition(t, Event.SQUASH)
            self.trace.emit("squash", t, version=t.version)
            self._free(t)
            transition(t, Event.SQUASH_DONE)
            t.isl_successor = t.isl_predecessor = None
            self.failed.add(t.thread_id)
            self.squashed.append(t.thread_id)
        return {t.thread_id for t in doomed}

    def restart(self, thread: ThreadContext) -> None:
        """Discard a violated thread's speculative state and rerun its p-slice."""
        self.squash_from(thread, inclusive=False)
        transition(thread, Event.VIOLATION)
        thread.cache.invalidate_all()
        thread.regs.reset(thread.spawn_snapshot)
        thread.version = thread.spawn_version
        thread.pc = self.program.pslice_bounds(thread.start_label)[0] + 1
        thread.ready_cycle = self.cycle + self.squash_cost_cycles
        thread.busy_until = 0
        thread.action_done = None
        thread.wait_reason = None
        self.failed.add(thread.thread_id)
        self.restarts[thread.thread_id] += 1
        self.trace.emit("restart", thread, version=thread.version, pc=thread.pc)

    def pass_token(self, committer: ThreadContext) -> ThreadContext | None:
        succ = committer.isl_successor
        committer.stable = False
        self.commit_order.append(committer.thread_id)
        self._free(committer)
        transition(committer, Event.COMMIT_DONE)
        committer.isl_successor = None
        if succ is not None:
            succ.isl_predecessor = None
            succ.stable = True
            transition(succ, Event.STABLE_TOKEN)
            self.trace.emit("token", succ, src=committer.thread_id)
        self.head = succ
        return succ

    def check_invariants(self) -> None:
        order = self.isl()
        stable = [t for pe in self.pes if (t := pe.thread) is not None and t.stable]
        if len(stable) != 1 or stable[0] is not self.head:
            raise SimulationError(f"expected exactly one stable thread at the ISL head, got {stable}")
        live = {id(pe.thread) for pe in self.pes if pe.thread is not None}
        if live != {id(t) for t in order}:
            raise SimulationError("ISL does not match the set of live threads")
        for a, b in zip(order, order[1:]):
            if b.isl_predecessor is not a:
                raise SimulationError("broken ISL back-link")


def speculative_level(engine: ThreadEngine, thread: ThreadContext) -> int:
    return engine.speculative_level(thread)
