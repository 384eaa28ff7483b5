"""Seeded generator of annotated random programs.

Programs are built from segments: plain blocks, spawn regions (optionally
with two out-of-order spawns and a ``squash``), and counted loops that spawn
one thread per iteration. P-slices are either faithful copies of the code
they stand in for, deliberately corrupted copies, or empty, so runs exercise
both passing and failing verification. Every generated program terminates
when run sequentially and only touches addresses below 64.
"""

from __future__ import annotations

import random

DATA_REGS = [f"r{i}" for i in range(1, 9)]
CHECKSUM_REG = "r9"
LOOP_REG, BOUND_REG = "r14", "r15"
MEM_SLOTS = 16


class _Gen:
    def __init__(self, seed: int, max_len: int):
        self.rng = random.Random(seed)
        self.max_len = max_len
        self.lines: list[str] = []
        self.count = 0
        self.nlabels = 0

    def label(self, stem: str) -> str:
        self.nlabels += 1
        return f"{stem}{self.nlabels}"

    def emit(self, text: str) -> None:
        self.lines.append("    " + text)
        self.count += 1

    def mark(self, name: str) -> None:
        self.lines.append(f"{name}:")

    def room(self) -> int:
        return self.max_len - self.count

    # -- random straight-line code --------------------------------------
    def instr(self, in_loop: bool) -> str:
        rng = self.rng
        d, s, t = (rng.choice(DATA_REGS) for _ in range(3))
        base = LOOP_REG if in_loop and rng.random() < 0.5 else "r0"
        k = rng.randrange(MEM_SLOTS)
        kind = rng.choices(
            ["li", "mov", "add", "sub", "mul", "addi", "ld", "st"],
            weights=[2, 1, 2, 2, 1, 2, 3, 3],
        )[0]
        if kind == "li":
            return f"li {d}, {rng.randint(-20, 20)}"
        if kind == "mov":
            return f"mov {d}, {s}"
        if kind in ("add", "sub", "mul"):
            return f"{kind} {d}, {s}, {t}"
        if kind == "addi":
            return f"addi {d}, {s}, {rng.randint(-5, 5)}"
        if kind == "ld":
            return f"ld {d}, [{base}+{k}]"
        return f"st {s}, [{base}+{k}]"

    def block(self, n: int, in_loop: bool = False, exit_label: str | None = None) -> list[str]:
        """Emit ``n`` random instructions, possibly with one forward branch.

        Returns the branch-free instruction list, used to build p-slices.
        """
        body = []
        for _ in range(n):
            text = self.instr(in_loop)
            body.append(text)
            if not text.startswith("st ") and self.rng.random() < 0.4:
                # fold the result into a checksum so consumed values stay observable
                dest = text.split()[1].rstrip(",")
                body.append(f"add {CHECKSUM_REG}, {CHECKSUM_REG}, {dest}")
        skip_at = None
        if n >= 3 and self.rng.random() < 0.3:
            skip_at = self.rng.randrange(n - 1)
        for i, text in enumerate(body):
            if i == skip_at:
                a, b = self.rng.sample(DATA_REGS, 2)
                op = self.rng.choice(["beq", "bne", "blt"])
                if exit_label is not None and self.rng.random() < 0.15:
                    self.emit(f"{op} {a}, {b}, {exit_label}")
                    skip_at = None
                else:
                    skip = self.label("SKIP")
                    self.emit(f"{op} {a}, {b}, {skip}")
                    self.emit(text)
                    self.mark(skip)
                    continue
            self.emit(text)
        return body

    def pslice(self, faithful: list[str], in_loop: bool) -> list[str]:
        rng = self.rng
        mode = rng.choices(
            ["faithful", "registers", "corrupt", "partial", "empty"], weights=[3, 4, 2, 2, 1]
        )[0]
        if mode == "empty":
            return []
        body = list(faithful)
        if mode == "registers":
            # predict register live-ins only; memory is left to speculation
            body = [b for b in body if not b.startswith("st ")]
        if mode == "partial" and body:
            body = [b for b in body if rng.random() < 0.6]
        if mode == "corrupt":
            if body and rng.random() < 0.7:
                body[rng.randrange(len(body))] = self.instr(in_loop)
            else:
                reg = LOOP_REG if in_loop and rng.random() < 0.3 else rng.choice(DATA_REGS)
                value = rng.choice([rng.randint(-3, 3), 1 << 40])
                body.append(f"li {reg}, {value}")
        return body

    def emit_child_start(self, label: str, pslice: list[str]) -> None:
        self.mark(label)
        self.emit(f"cqip {label}")
        self.emit(f"pslice_entry {label}")
        for text in pslice:
            self.emit(text)
        self.emit(f"pslice_exit {label}")

    # -- segments ------------------------------------------------------------
    def seg_block(self, exit_label):
        self.block(self.rng.randint(2, 6), exit_label=exit_label)

    def seg_spawn(self, exit_label):
        rng = self.rng
        outer = self.label("T")
        nested = rng.random() < 0.35
        inner = self.label("T") if nested else None
        self.block(rng.randint(0, 3))
        self.emit(f"spawn {outer}")
        if nested:
            self.emit(f"spawn {inner}")
        parent = self.block(rng.randint(1, 12), exit_label=exit_label)
        if rng.random() < 0.15:
            self.emit(f"squash {inner or outer}")
        if nested:
            self.emit_child_start(inner, self.pslice(parent, False))
            middle = self.block(rng.randint(1, 6), exit_label=exit_label)
            self.emit_child_start(outer, self.pslice(parent + middle, False))
        else:
            self.emit_child_start(outer, self.pslice(parent, False))
        self.block(rng.randint(1, 5), exit_label=exit_label)

    def seg_loop(self, exit_label):
        rng = self.rng
        head, body, end = self.label("LOOP"), self.label("BODY"), self.label("END")
        self.emit(f"li {LOOP_REG}, 0")
        self.emit(f"li {BOUND_REG}, {rng.randint(2, 8)}")
        n = rng.randint(1, 9)
        # the p-slice is built before the body is known, so draw the body first
        saved = self.lines, self.count
        self.lines = []
        reduce = rng.random() < 0.5
        if reduce:
            # loop-carried dependence through memory: read early, write late
            slot = rng.randrange(MEM_SLOTS)
            self.emit(f"ld r10, [r0+{slot}]")
        work = self.block(n, in_loop=True)
        if reduce:
            self.emit(f"add r10, r10, {rng.choice(DATA_REGS)}")
            self.emit(f"st r10, [r0+{slot}]")
        body_lines, body_count = self.lines, self.count - saved[1]
        self.lines, self.count = saved
        slice_ = self.pslice(work + [f"addi {LOOP_REG}, {LOOP_REG}, 1"], True)
        if rng.random() < 0.5 and f"addi {LOOP_REG}, {LOOP_REG}, 1" not in slice_:
            slice_.append(f"addi {LOOP_REG}, {LOOP_REG}, 1")
        self.emit_child_start(head, slice_)
        self.emit(f"blt {LOOP_REG}, {BOUND_REG}, {body}")
        self.emit(f"jmp {end}")
        self.mark(body)
        self.emit(f"spawn {head}")
        self.lines.extend(body_lines)
        self.count += body_count
        self.emit(f"addi {LOOP_REG}, {LOOP_REG}, 1")
        self.emit(f"jmp {head}")
        self.mark(end)

    def build(self) -> str:
        rng = self.rng
        exit_label = "EXIT"
        for r in DATA_REGS:
            if rng.random() < 0.5:
                self.emit(f"li {r}, {rng.randint(-10, 10)}")
        segments = [self.seg_block, self.seg_spawn, self.seg_loop]
        while self.room() > 80:
            rng.choices(segments, weights=[1, 3, 2])[0](exit_label)
            if rng.random() < 0.3:
                break
        self.mark(exit_label)
        self.emit(f"st {CHECKSUM_REG}, [r0+{MEM_SLOTS}]")
        self.emit("halt")
        return "\n".join(self.lines) + "\n"


def random_program_source(seed: int, max_len: int = 200) -> str:
    """Source text of a random annotated program with at most ``max_len`` instructions."""
    return _Gen(seed, max_len).build()


def random_program(seed: int, max_len: int = 200):
    from .isa import parse_program

    return parse_program(random_program_source(seed, max_len))
