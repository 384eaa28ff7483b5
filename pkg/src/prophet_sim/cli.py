"""``prophet`` command: run, sweep, trace and generate programs.

Exit status is 0 on success, 1 on a bad program or bad input, and 2 when the
speculative run disagrees with the sequential one.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .core import MachineConfig, RunResult, run_speculative
from .errors import EquivalenceError, ProphetError
from .generator import random_program_source
from .isa import Program, parse_program

COLUMNS = ("program", "PEs", "spawned", "failed", "pct_successful",
           "seq_cycles", "spmt_cycles", "speedup")

EXIT_OK, EXIT_INPUT, EXIT_EQUIVALENCE = 0, 1, 2


@dataclass
class SweepSpec:
    pe_counts: list[int]
    programs: list[str] = field(default_factory=list)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.pe_counts:
            raise ValueError("pe_counts must not be empty")
        if any(n < 1 for n in self.pe_counts):
            raise ValueError("every PE count must be >= 1")


def load_program(ref: str) -> tuple[str, Program]:
    """Read a program from a file path or a built-in corpus name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        name = path.name
    else:
        try:
            text = corpus.source(ref)
        except KeyError:
            raise FileNotFoundError(f"{ref}: no such file or built-in program") from None
        name = ref.removesuffix(".prophet")
    return name, parse_program(text)


def stats_row(name: str, pes: int, result: RunResult) -> list[str]:
    s = result.stats
    pct = "N/A" if s.successful_pct is None else f"{s.successful_pct:.1f}"
    speedup = "N/A" if s.speedup is None else f"{s.speedup:.3f}"
    return [name, str(pes), str(s.spawned_threads), str(s.failed_threads), pct,
            str(s.seq_cycles), str(s.spmt_cycles), speedup]


def to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def to_table(rows: list[list[str]]) -> str:
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(COLUMNS)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(COLUMNS, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def _config(args, pes: int) -> MachineConfig:
    return MachineConfig(
        num_pes=pes,
        spawn_cost_cycles=args.spawn_cost,
        mem_latency_cycles=args.mem_latency,
        verify_cost_per_word=args.verify_cost,
        max_cycles=args.max_cycles,
    )


def _pe_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad PE list {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("PE counts must be integers >= 1")
    return values


def cmd_run(args, out) -> int:
    name, program = load_program(args.program)
    result = run_speculative(program, _config(args, args.pes), trace=bool(args.trace))
    if args.trace:
        Path(args.trace).write_text("\n".join(result.trace) + "\n", encoding="utf-8")
    rows = [stats_row(name, args.pes, result)]
    out.write(to_csv(rows) if args.csv else to_table(rows))
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    spec = SweepSpec(pe_counts=args.pes, programs=list(args.programs))
    loaded = [load_program(ref) for ref in spec.programs]
    rows = []
    for name, program in loaded:
        for pes in spec.pe_counts:
            rows.append(stats_row(name, pes, run_speculative(program, _config(args, pes))))
    out.write(to_csv(rows))
    return EXIT_OK


def cmd_trace(args, out) -> int:
    _, program = load_program(args.program)
    result = run_speculative(program, _config(args, args.pes), trace=True)
    out.write("\n".join(result.trace) + "\n")
    return EXIT_OK


def cmd_generate(args, out) -> int:
    out.write(random_program_source(args.seed, args.max_len))
    return EXIT_OK


def cmd_list(args, out) -> int:
    out.write("\n".join(corpus.names()) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prophet", description="Speculative multithreading simulator with pre-computation slices."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    machine = argparse.ArgumentParser(add_help=False)
    machine.add_argument("--mem-latency", type=int, default=1, metavar="N")
    machine.add_argument("--spawn-cost", type=int, default=1, metavar="N")
    machine.add_argument("--verify-cost", type=int, default=1, metavar="N",
                         help="verification cycles per compared word")
    machine.add_argument("--max-cycles", type=int, default=1_000_000, metavar="N")

    p = sub.add_parser("run", parents=[machine], help="run one program in both modes")
    p.add_argument("program", help="program file or built-in name")
    p.add_argument("--pes", type=int, default=4)
    p.add_argument("--csv", action="store_true", help="print CSV instead of a table")
    p.add_argument("--trace", metavar="FILE", help="also write the event trace to FILE")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[machine], help="CSV over programs and PE counts")
    p.add_argument("programs", nargs="*")
    p.add_argument("--pes", type=_pe_list, default=[1, 2, 4, 8], metavar="LIST",
                   help="comma-separated PE counts (default 1,2,4,8)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", parents=[machine], help="print the event trace of a run")
    p.add_argument("program")
    p.add_argument("--pes", type=int, default=4)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("generate", help="print a random annotated program")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-len", type=int, default=200)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("list", help="list built-in programs")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except EquivalenceError as exc:
        err.write(f"equivalence failure: {exc}\n")
        return EXIT_EQUIVALENCE
    except (ProphetError, OSError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
