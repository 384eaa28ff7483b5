"""Per-thread register cache.

Each register carries three state bits: V (valid), L (loaded first: the first
speculative access was a read) and M (modified in speculation). During the
p-slice registers are accessed directly; leaving the p-slice seals every
register into ``Init``. Speculative reads and writes then move registers
through ``Validate``, ``MCommit`` and ``VaandMC``. The value returned by the
first speculative read is recorded so the parent can validate it at commit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import SimulationError
from .isa import NUM_REGS


class RegState(Enum):
    INVALID = "Invalid"
    INIT = "Init"
    VALIDATE = "Validate"
    MCOMMIT = "MCommit"
    VAANDMC = "VaandMC"


# (V, L, M); None marks a don't-care bit
REG_STATE_BITS = {
    RegState.INIT: (1, 0, 0),
    RegState.VALIDATE: (1, 1, 0),
    RegState.MCOMMIT: (1, 0, 1),
    RegState.VAANDMC: (1, 1, 1),
    RegState.INVALID: (0, None, None),
}


def decode_reg_state(v: int, l: int, m: int) -> RegState:
    if not v:
        return RegState.INVALID
    for state, bits in REG_STATE_BITS.items():
        if bits == (v, l, m):
            return state
    raise SimulationError(f"unencodable register state bits {(v, l, m)}")


@dataclass
class RegCacheLine:
    tag: int
    data: int = 0
    v: int = 0
    l: int = 0
    m: int = 0
    first_read_value: int | None = None

    @property
    def state(self) -> RegState:
        return decode_reg_state(self.v, self.l, self.m)


class RegisterFile:
    """Working registers of one thread plus their cache-state bits."""

    def __init__(self, snapshot=None, sealed=False, on_event=None):
        snapshot = list(snapshot) if snapshot is not None else [0] * NUM_REGS
        self.lines = [RegCacheLine(tag=i, data=snapshot[i]) for i in range(NUM_REGS)]
        self.on_event = on_event
        if sealed:
            self.seal_precomputation()

    def _emit(self, kind, reg, line):
        if self.on_event is not None:
            self.on_event(kind, reg=reg, value=line.data, state=line.state.value)

    def state(self, reg: int) -> RegState:
        return self.lines[reg].state

    def values(self) -> list[int]:
        return [ln.data for ln in self.lines]

    # -- pre-computation: direct access, no state change
    def read_pre(self, reg: int) -> int:
        return self.lines[reg].data

    def write_pre(self, reg: int, value: int) -> None:
        self.lines[reg].data = value

    def seal_precomputation(self) -> None:
        for ln in self.lines:
            ln.v, ln.l, ln.m = 1, 0, 0
            ln.first_read_value = None

    # -- speculation / stable execution
    def read_sp(self, reg: int) -> int:
        ln = self.lines[reg]
        if not ln.v:
            raise SimulationError(f"speculative read of unsealed register r{reg}")
        if not ln.l and not ln.m:
            ln.l = 1
            ln.first_read_value = ln.data
            self._emit("RS", reg, ln)
        return ln.data

    def write_sp(self, reg: int, value: int) -> None:
        ln = self.lines[reg]
        if not ln.v:
            raise SimulationError(f"speculative write of unsealed register r{reg}")
        ln.data = value
        if not ln.m:
            ln.m = 1
            self._emit("WS", reg, ln)

    def registers_needing_validation(self) -> list[tuple[int, int]]:
        return [(ln.tag, ln.first_read_value) for ln in self.lines if ln.v and ln.l]

    def synchronize_from_parent(self, parent_final) -> None:
        """Install the committing parent's final values into unwritten registers.

        ``Init`` and ``Validate`` registers take the parent's value; registers
        this thread wrote keep their own (logically later) value.
        """
        for ln in self.lines:
            if ln.v and not ln.m:
                ln.data = parent_final[ln.tag]

    def reset(self, snapshot) -> None:
        for ln, value in zip(self.lines, snapshot):
            ln.data = value
            ln.v = ln.l = ln.m = 0
            ln.first_read_value = None


def seal_precomputation(regfile: RegisterFile) -> None:
    regfile.seal_precomputation()


def reg_read_sp(regfile: RegisterFile, reg: int) -> int:
    return regfile.read_sp(reg)


def reg_write_sp(regfile: RegisterFile, reg: int, value: int) -> None:
    regfile.write_sp(reg, value)


def registers_needing_validation(regfile: RegisterFile) -> list[tuple[int, int]]:
    return regfile.registers_needing_validation()


def synchronize_from_parent(regfile: RegisterFile, parent_final) -> None:
    regfile.synchronize_from_parent(parent_final)


def reg_access_pre(regfile: RegisterFile, reg: int, op: str, value: int | None = None) -> int:
    if op == "read":
        return regfile.read_pre(reg)
    if op == "write":
        regfile.write_pre(reg, value)
        return value
    raise ValueError(f"op must be 'read' or 'write', got {op!r}")
