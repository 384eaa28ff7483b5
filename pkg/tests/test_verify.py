import pytest

from prophet_sim import parse_program
from prophet_sim.threads import Event, ThreadEngine, ThreadState, transition
from prophet_sim.verify import (
    VerificationReport,
    commit_thread,
    resolve_verification,
    verification_cost,
    verify_sub_thread,
)

PROG = parse_program("""
        spawn A
A:      cqip A
        pslice_entry A
        pslice_exit A
        halt
""")


def setup():
    engine = ThreadEngine(PROG, num_pes=3, memory_words=32)
    main = engine.start_main()
    child = engine.spawn_thread(main, "A")
    transition(child, Event.INIT_DONE)
    return engine, main, child


def finish_pslice(child):
    child.regs.seal_precomputation()
    transition(child, Event.PSLICE_EXIT)


def test_empty_child_passes():
    engine, main, child = setup()
    finish_pslice(child)
    report = verify_sub_thread(engine, main, child)
    assert report.passed and report.compared_words == 0
    assert verify_sub_thread(engine, main, None).passed


def test_memory_and_register_mismatches_named():
    engine, main, child = setup()
    child.cache.write_pre(5, 42)      # predicted [5] = 42
    child.cache.write_pre(6, 7)       # predicted [6] = 7
    finish_pslice(child)
    child.regs.lines[3].data = 9
    child.regs.read_sp(3)             # consumed r3 = 9
    main.cache.write_sp(5, 41, main.version)
    engine.memory[6] = 7
    main.regs.write_sp(3, 10)
    report = verify_sub_thread(engine, main, child)
    assert not report.passed
    assert report.memory_mismatches == [(5, 42, 41)]
    assert report.register_mismatches == [(3, 9, 10)]
    assert report.compared_words == 3


def test_verification_does_not_mutate():
    engine, main, child = setup()
    child.cache.write_pre(5, 1)
    finish_pslice(child)
    before = ([(l.tag, l.data, l.ver, l.o) for l in child.cache.lines()], child.regs.values())
    verify_sub_thread(engine, main, child)
    verify_sub_thread(engine, main, child)
    after = ([(l.tag, l.data, l.ver, l.o) for l in child.cache.lines()], child.regs.values())
    assert before == after


def test_report_passed_iff_no_mismatch():
    assert VerificationReport().passed
    assert not VerificationReport(memory_mismatches=[(1, 2, 3)]).passed
    assert not VerificationReport(register_mismatches=[(1, 2, 3)]).passed


def test_cost_counts_words():
    engine, main, child = setup()
    child.cache.write_pre(5, 1)
    finish_pslice(child)
    child.regs.read_sp(2)
    main.cache.write_sp(8, 1, main.version)
    main.cache.write_sp(9, 1, main.version)
    assert verification_cost(main, child, per_word=2) == 1 + 2 * (1 + 1 + 2)
    assert verification_cost(main, None, per_word=3) == 1 + 3 * 2


def test_failed_verification_squashes_child_and_continues():
    engine, main, child = setup()
    child.cache.write_pre(5, 1)
    finish_pslice(child)
    main.pc = 1
    transition(main, Event.CQIP)
    report = verify_sub_thread(engine, main, child)
    assert not resolve_verification(engine, main, report)
    assert not child.alive
    assert main.state is ThreadState.STABLE_EXECUTION and main.pc == 2
    assert engine.isl() == [main]


def test_passed_verification_commits_and_synchronizes():
    engine, main, child = setup()
    finish_pslice(child)
    child.regs.read_sp(4)             # consumed r4 = 0 (snapshot)
    child.regs.write_sp(6, 66)
    main.regs.write_sp(5, 55)         # r5 unread by child: synchronized
    main.regs.write_sp(6, 77)         # child's own r6 wins
    main.cache.write_sp(3, 33, main.version)
    transition(main, Event.CQIP)
    report = verify_sub_thread(engine, main, child)
    assert resolve_verification(engine, main, report)
    assert engine.memory[3] == 33
    assert child.stable and engine.head is child
    assert child.regs.values()[5] == 55 and child.regs.values()[6] == 66
    assert engine.commit_order == [main.thread_id]


def test_commit_requires_commit_state():
    engine, main, _ = setup()
    with pytest.raises(ValueError):
        commit_thread(engine, main)
