"""Toy load/store ISA with the five speculation instructions.

Sixteen 64-bit integer registers ``r0``..``r15`` and a flat, word-addressed
memory. Programs are line-oriented text::

    # comment
    LOOP:
        cqip LOOP
        pslice_entry LOOP
        addi r1, r1, 1
        pslice_exit LOOP
        ld r2, [r1+100]
        blt r1, r3, LOOP
        halt

A thread spawned with ``spawn L`` starts at label ``L``, whose instruction
must be ``cqip L`` immediately followed by ``pslice_entry L``. The parent's
copy of ``cqip L`` ends the parent thread; the child skips it and runs its
p-slice. Run sequentially, the speculation opcodes are no-ops and p-slices
are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ProgramError

NUM_REGS = 16
WORD_BITS = 64
_MASK = (1 << WORD_BITS) - 1
_SIGN = 1 << (WORD_BITS - 1)

ALU_OPS = frozenset({"li", "mov", "add", "sub", "mul", "addi"})
MEM_OPS = frozenset({"ld", "st"})
BRANCH_OPS = frozenset({"beq", "bne", "blt"})
SPEC_OPS = frozenset({"spawn", "cqip", "squash", "pslice_entry", "pslice_exit"})
CONTROL_OPS = BRANCH_OPS | {"jmp"}
OPCODES = ALU_OPS | MEM_OPS | CONTROL_OPS | SPEC_OPS | {"halt"}

# opcodes that may not appear between pslice_entry and pslice_exit
_FORBIDDEN_IN_PSLICE = SPEC_OPS | {"halt"}


def wrap64(value: int) -> int:
    """Wrap an integer to signed 64-bit two's complement."""
    value &= _MASK
    return value - (1 << WORD_BITS) if value & _SIGN else value


@dataclass(frozen=True)
class Instruction:
    op: str
    regs: tuple[int, ...] = ()
    imm: int | None = None
    label: str | None = None
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        r = [f"r{i}" for i in self.regs]
        op = self.op
        if op == "li":
            return f"li {r[0]}, {self.imm}"
        if op == "mov":
            return f"mov {r[0]}, {r[1]}"
        if op in ("add", "sub", "mul"):
            return f"{op} {r[0]}, {r[1]}, {r[2]}"
        if op == "addi":
            return f"addi {r[0]}, {r[1]}, {self.imm}"
        if op in MEM_OPS:
            sign = "-" if self.imm < 0 else "+"
            return f"{op} {r[0]}, [{r[1]}{sign}{abs(self.imm)}]"
        if op in BRANCH_OPS:
            return f"{op} {r[0]}, {r[1]}, {self.label}"
        if op == "halt":
            return "halt"
        return f"{op} {self.label}"


@dataclass
class Program:
    instructions: list[Instruction]
    labels: dict[str, int]
    pslice_ranges: dict[str, tuple[int, int]]

    def __len__(self) -> int:
        return len(self.instructions)

    def target(self, label: str) -> int:
        try:
            return self.labels[label]
        except KeyError:
            raise ProgramError(f"undefined label {label!r}") from None

    def pslice_bounds(self, label: str) -> tuple[int, int]:
        """Index range ``(entry, exit)`` of the p-slice belonging to ``label``."""
        try:
            return self.pslice_ranges[label]
        except KeyError:
            raise ProgramError(f"label {label!r} has no p-slice") from None

    def in_pslice(self, pc: int) -> str | None:
        """Label whose p-slice strictly contains ``pc`` (entry excluded)."""
        for label, (entry, exit_) in self.pslice_ranges.items():
            if entry < pc <= exit_:
                return label
        return None

    def spawn_targets(self) -> set[str]:
        return {i.label for i in self.instructions if i.op == "spawn"}


def pslice_bounds(program: Program, label: str) -> tuple[int, int]:
    return program.pslice_bounds(label)


def sequential_next(program: Program, pc: int, taken: bool = False) -> int:
    """Successor of ``pc`` under non-speculative semantics.

    ``taken`` selects the branch target of a conditional branch. Speculation
    opcodes fall through, except ``pslice_entry`` which jumps past the
    matching ``pslice_exit``. ``halt`` is its own successor.
    """
    if not 0 <= pc < len(program.instructions):
        raise ProgramError(f"pc {pc} out of range")
    instr = program.instructions[pc]
    op = instr.op
    if op == "pslice_entry":
        return program.pslice_bounds(instr.label)[1] + 1
    if op == "jmp":
        return program.target(instr.label)
    if op in BRANCH_OPS:
        return program.target(instr.label) if taken else pc + 1
    if op == "halt":
        return pc
    return pc + 1


# -- parsing -----------------------------------------------------------------

_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*)\s*:\s*(.*)$")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_MEMREF_RE = re.compile(r"^\[\s*(r\d+)\s*(?:([+-])\s*(-?\d+)\s*)?\]$")


def _reg(tok: str, line: int) -> int:
    tok = tok.strip()
    if not re.fullmatch(r"r\d+", tok):
        raise ProgramError(f"expected register, got {tok!r}", line)
    idx = int(tok[1:])
    if not 0 <= idx < NUM_REGS:
        raise ProgramError(f"register index out of range: {tok}", line)
    return idx


def _imm(tok: str, line: int) -> int:
    tok = tok.strip()
    if not re.fullmatch(r"-?\d+", tok):
        raise ProgramError(f"expected decimal immediate, got {tok!r}", line)
    value = int(tok)
    if not -(1 << 63) <= value < (1 << 63):
        raise ProgramError(f"immediate out of 64-bit range: {tok}", line)
    return value


def _name(tok: str, line: int) -> str:
    tok = tok.strip()
    if not _NAME_RE.match(tok):
        raise ProgramError(f"expected label, got {tok!r}", line)
    return tok


def _memref(tok: str, line: int) -> tuple[int, int]:
    m = _MEMREF_RE.match(tok.strip())
    if not m:
        raise ProgramError(f"expected memory operand [rS+IMM], got {tok!r}", line)
    base = _reg(m.group(1), line)
    offset = 0
    if m.group(3) is not None:
        offset = _imm(m.group(3), line)
        if m.group(2) == "-":
            offset = -offset
    return base, offset


_ARITY = {
    "li": 2, "mov": 2, "add": 3, "sub": 3, "mul": 3, "addi": 3,
    "ld": 2, "st": 2, "beq": 3, "bne": 3, "blt": 3, "jmp": 1, "halt": 0,
}


def _parse_instruction(text: str, line: int) -> Instruction:
    parts = text.split(None, 1)
    op = parts[0].lower()
    if op not in OPCODES:
        raise ProgramError(f"unknown opcode {parts[0]!r}", line)
    args = [a.strip() for a in parts[1].split(",")] if len(parts) > 1 else []
    want = 1 if op in SPEC_OPS else _ARITY[op]
    if len(args) != want:
        raise ProgramError(f"{op} takes {want} operand(s), got {len(args)}", line)

    if op == "li":
        return Instruction(op, (_reg(args[0], line),), imm=_imm(args[1], line), line=line)
    if op == "mov":
        return Instruction(op, (_reg(args[0], line), _reg(args[1], line)), line=line)
    if op in ("add", "sub", "mul"):
        return Instruction(op, tuple(_reg(a, line) for a in args), line=line)
    if op == "addi":
        regs = (_reg(args[0], line), _reg(args[1], line))
        return Instruction(op, regs, imm=_imm(args[2], line), line=line)
    if op in MEM_OPS:
        base, offset = _memref(args[1], line)
        return Instruction(op, (_reg(args[0], line), base), imm=offset, line=line)
    if op in BRANCH_OPS:
        regs = (_reg(args[0], line), _reg(args[1], line))
        return Instruction(op, regs, label=_name(args[2], line), line=line)
    if op == "halt":
        return Instruction(op, line=line)
    return Instruction(op, label=_name(args[0], line), line=line)


def parse_program(text: str) -> Program:
    """Parse and validate program source; raises ProgramError on any defect."""
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    label_lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        while body:
            m = _LABEL_RE.match(body)
            if not m:
                break
            name = m.group(1)
            if name.lower() in OPCODES:
                break
            if name in labels:
                raise ProgramError(
                    f"duplicate label {name!r} (first defined on line {label_lines[name]})",
                    lineno,
                )
            labels[name] = len(instructions)
            label_lines[name] = lineno
            body = m.group(2).strip()
        if body:
            instructions.append(_parse_instruction(body, lineno))
    return validate(instructions, labels, label_lines)


def validate(instructions, labels, label_lines=None) -> Program:
    label_lines = label_lines or {}
    n = len(instructions)

    for instr in instructions:
        if instr.label is not None and instr.label not in labels:
            raise ProgramError(f"undefined label {instr.label!r}", instr.line)

    entries: dict[str, int] = {}
    exits: dict[str, int] = {}
    for idx, instr in enumerate(instructions):
        if instr.op in ("pslice_entry", "pslice_exit"):
            seen = entries if instr.op == "pslice_entry" else exits
            if instr.label in seen:
                raise ProgramError(f"duplicate {instr.op} {instr.label}", instr.line)
            seen[instr.label] = idx
    ranges: dict[str, tuple[int, int]] = {}
    for label, entry in entries.items():
        exit_ = exits.get(label)
        if exit_ is None or exit_ <= entry:
            raise ProgramError(f"unmatched pslice_entry {label}", instructions[entry].line)
        ranges[label] = (entry, exit_)
    for label, exit_ in exits.items():
        if label not in entries:
            raise ProgramError(f"unmatched pslice_exit {label}", instructions[exit_].line)

    spans = sorted(ranges.items(), key=lambda kv: kv[1][0])
    for (la, (_, xa)), (lb, (eb, _)) in zip(spans, spans[1:]):
        if eb <= xa:
            raise ProgramError(
                f"p-slices {la} and {lb} overlap", instructions[eb].line
            )

    def inside(pc):
        for label, (e, x) in ranges.items():
            if e < pc <= x:
                return label
        return None

    for idx, instr in enumerate(instructions):
        op = instr.op
        owner = inside(idx)
        if op == "cqip" and labels[instr.label] != idx:
            raise ProgramError(f"cqip {instr.label} must sit at label {instr.label}", instr.line)
        if owner is not None and idx != ranges[owner][1] and op in _FORBIDDEN_IN_PSLICE:
            raise ProgramError(f"{op} not allowed inside p-slice {owner}", instr.line)
        if op in CONTROL_OPS:
            tgt = labels[instr.label]
            tgt_owner = inside(tgt) if tgt < n else None
            if owner is not None and tgt_owner != owner:
                raise ProgramError(f"branch leaves p-slice {owner}", instr.line)
            if owner is None and tgt_owner is not None:
                raise ProgramError(f"branch into p-slice {tgt_owner}", instr.line)
        if op == "spawn":
            label = instr.label
            start = labels[label]
            if label not in ranges:
                raise ProgramError(f"spawn target {label} has no p-slice", instr.line)
            if (
                start + 1 >= n
                or instructions[start].op != "cqip"
                or instructions[start].label != label
                or ranges[label][0] != start + 1
            ):
                raise ProgramError(
                    f"spawn target {label} must begin with 'cqip {label}' "
                    f"followed by 'pslice_entry {label}'",
                    instr.line,
                )
    return Program(list(instructions), dict(labels), ranges)


def format_program(program: Program) -> str:
    """Render a program back to source text that parses to an equal Program."""
    by_index: dict[int, list[str]] = {}
    for name, idx in program.labels.items():
        by_index.setdefault(idx, []).append(name)
    out = []
    for idx, instr in enumerate(program.instructions):
        for name in by_index.get(idx, ()):
            out.append(f"{name}:")
        out.append(f"    {instr}")
    for name in by_index.get(len(program.instructions), ()):
        out.append(f"{name}:")
    return "\n".join(out) + "\n"
