import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prophet_sim import ProgramError, format_program, parse_program, sequential_next
from prophet_sim.generator import random_program_source
from prophet_sim.isa import Instruction, wrap64

CHILD = """
        li r1, 1
        spawn T
        li r2, 2
T:      cqip T
        pslice_entry T
        li r2, 2
        pslice_exit T
        add r3, r1, r2
        halt
"""


def test_parse_basic_program():
    prog = parse_program(CHILD)
    assert len(prog) == 9
    assert prog.labels == {"T": 3}
    assert prog.pslice_ranges == {"T": (4, 6)}
    assert prog.instructions[0] == Instruction("li", (1,), 1)
    assert prog.instructions[7] == Instruction("add", (3, 1, 2))
    assert prog.spawn_targets() == {"T"}


def test_memory_operand_forms():
    prog = parse_program("ld r1, [r2+8]\nst r1, [r3-4]\nld r4, [r5]\nhalt\n")
    assert prog.instructions[0] == Instruction("ld", (1, 2), 8)
    assert prog.instructions[1] == Instruction("st", (1, 3), -4)
    assert prog.instructions[2] == Instruction("ld", (4, 5), 0)
    assert str(prog.instructions[1]) == "st r1, [r3-4]"


def test_comments_and_label_only_lines():
    prog = parse_program("# header\nA:\n  # nothing\nB: li r1, 2  # trailing\n jmp A\n")
    assert prog.labels == {"A": 0, "B": 0}
    assert len(prog) == 2


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("li r1, 1\nfoo r2\n", 2, "foo"),
        ("li r1\n", 1, None),
        ("li r16, 1\n", 1, None),
        ("jmp NOWHERE\n", 1, "undefined label"),
        ("A: li r1, 1\nA: halt\n", 2, "duplicate label"),
        ("X: cqip X\npslice_entry X\nli r1, 1\nhalt\n", 2, "unmatched pslice_entry"),
        ("X: li r1, 1\npslice_exit X\n", 2, "unmatched pslice_exit"),
        ("spawn T\nT: cqip T\nli r1, 1\nhalt\n", 1, "no p-slice"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ProgramError) as exc:
        parse_program(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")
    if fragment:
        assert fragment in str(exc.value)


def test_forbidden_opcodes_inside_pslice():
    text = CHILD.replace("        li r2, 2\n        pslice_exit T", "        halt\n        pslice_exit T")
    with pytest.raises(ProgramError, match="not allowed inside p-slice"):
        parse_program(text)


def test_branch_into_pslice_rejected():
    text = "jmp IN\nT: cqip T\npslice_entry T\nIN: li r1, 1\npslice_exit T\nhalt\n"
    with pytest.raises(ProgramError, match="branch into p-slice"):
        parse_program(text)


def test_branch_out_of_pslice_rejected():
    text = "spawn T\nT: cqip T\npslice_entry T\njmp OUT\npslice_exit T\nOUT: halt\n"
    with pytest.raises(ProgramError, match="branch leaves"):
        parse_program(text)


def test_overlapping_pslices_rejected():
    text = ("A: cqip A\npslice_entry A\nB: cqip B\npslice_entry B\n"
            "pslice_exit A\npslice_exit B\nhalt\n")
    with pytest.raises(ProgramError):
        parse_program(text)


def test_cqip_must_sit_at_its_label():
    with pytest.raises(ProgramError, match="must sit at label"):
        parse_program("A: li r1, 1\ncqip A\nhalt\n")


def test_sequential_next_semantics():
    prog = parse_program(CHILD)
    assert sequential_next(prog, 0) == 1
    assert sequential_next(prog, 1) == 2  # spawn falls through
    assert sequential_next(prog, 3) == 4  # cqip falls through
    assert sequential_next(prog, 4) == 7  # p-slice skipped
    assert sequential_next(prog, 8) == 8  # halt
    with pytest.raises(ProgramError):
        sequential_next(prog, 99)


def test_wrap64():
    assert wrap64(2**63) == -(2**63)
    assert wrap64(-(2**63) - 1) == 2**63 - 1
    assert wrap64(5) == 5


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_format_round_trip(seed):
    prog = parse_program(random_program_source(seed))
    again = parse_program(format_program(prog))
    assert again.instructions == prog.instructions
    assert again.labels == prog.labels
    assert again.pslice_ranges == prog.pslice_ranges


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_generated_programs_respect_length_bound(seed):
    assert len(parse_program(random_program_source(seed, max_len=200))) <= 200
