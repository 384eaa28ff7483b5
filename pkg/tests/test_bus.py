import pytest

from prophet_sim import parse_program
from prophet_sim.bus import BusMessage, MessageKind, SnoopBus, check_violation
from prophet_sim.errors import SimulationError
from prophet_sim.memcache import L1MemCache
from prophet_sim.threads import Event, ThreadEngine, ThreadState, transition

PROG = parse_program("""
        spawn A
A:      cqip A
        pslice_entry A
        pslice_exit A
        halt
""")


def chain(n, pes=4):
    """Main thread plus ``n`` descendants, each spawned by the previous one."""
    engine = ThreadEngine(PROG, num_pes=pes, memory_words=32)
    threads = [engine.start_main()]
    for _ in range(n):
        t = engine.spawn_thread(threads[-1], "A")
        transition(t, Event.INIT_DONE)
        t.regs.seal_precomputation()
        transition(t, Event.PSLICE_EXIT)
        threads.append(t)
    return engine, SnoopBus(engine), threads


@pytest.mark.parametrize("kind, params", [
    (MessageKind.RSpR, {}),
    (MessageKind.LSpW, {"value": None}),
    (MessageKind.RPrR, {"speculative_level": 1}),
    (MessageKind.LPrR, {"value": 3}),
])
def test_message_parameters_validated(kind, params):
    with pytest.raises(SimulationError, match="malformed"):
        BusMessage(kind, 0, 5, **params)


def test_well_formed_messages():
    BusMessage(MessageKind.RPrR, 1, 5, speculative_level=1, thread_version=2)
    BusMessage(MessageKind.VioTest, 1, 5, speculative_level=0)
    BusMessage(MessageKind.LPrW, 1, 5, value=0)


def test_remote_speculative_read_prefers_nearest_predecessor():
    engine, bus, (main, a, b) = chain(2)
    engine.memory[7] = 1
    assert bus.remote_read_sp(b, 7) == 1  # memory
    main.cache.write_sp(7, 2, main.version)
    assert bus.remote_read_sp(b, 7) == 2
    a.cache.write_sp(7, 3, a.version)
    assert bus.remote_read_sp(b, 7) == 3
    responses = bus.broadcast(BusMessage(MessageKind.RSpR, b.thread_id, 7, speculative_level=2))
    assert [r.responder for r in responses] == [a.thread_id, main.thread_id]


def test_remote_read_skips_predecessor_still_in_pslice():
    engine, bus, (main, a, b) = chain(2)
    main.cache.write_sp(7, 2, main.version)
    a.state = ThreadState.PRECOMPUTE
    a.cache.write_pre(7, 99)
    assert bus.remote_read_sp(b, 7) == 2


def test_remote_precompute_read_respects_spawn_point():
    engine, bus, (main, a) = chain(1)
    # a was spawned when main had version 1; main is now at version 2
    main.cache.write_sp(4, 10, 1)
    main.cache.write_sp(4, 20, 2)
    assert bus.remote_read_pre(a, 4) == 10
    main.cache.write_sp(5, 30, 2)
    engine.memory[5] = 6
    assert bus.remote_read_pre(a, 5) == 6


def test_violation_detection_only_for_speculative_remote_loads():
    c = L1MemCache()
    msg = BusMessage(MessageKind.VioTest, 0, 3, speculative_level=0)
    c.read_pre(3, lambda: 0)  # PreSh: rl=1 but version 0
    assert not check_violation(c, msg)
    c.write_sp(3, 1, 1)  # own write, rl mirrors nothing read in speculation
    assert not check_violation(c, msg)
    c.read_sp(4, lambda: 0, 1)
    assert check_violation(c, BusMessage(MessageKind.VioTest, 0, 4, speculative_level=0))


def test_viotest_restarts_least_speculative_violator_only():
    engine, bus, (main, a, b, c) = chain(3)
    for t in (a, c):
        t.cache.read_sp(9, lambda: 0, t.version)
    violator = bus.viotest(main, 9)
    assert violator is a
    assert a.state is ThreadState.RESTART
    assert not b.alive and not c.alive
    assert engine.restarts == {a.thread_id: 1}
    assert main.state is ThreadState.STABLE_EXECUTION


def test_viotest_without_readers_is_silent():
    engine, bus, (main, a) = chain(1)
    assert bus.viotest(main, 9) is None
    assert a.state is ThreadState.SP_EXECUTION
