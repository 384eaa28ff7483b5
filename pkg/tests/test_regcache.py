import pytest
from hypothesis import given
from hypothesis import strategies as st

from prophet_sim.errors import SimulationError
from prophet_sim.isa import NUM_REGS
from prophet_sim.regcache import (
    REG_STATE_BITS,
    RegisterFile,
    RegState,
    decode_reg_state,
    reg_access_pre,
    registers_needing_validation,
    synchronize_from_parent,
)

# register state encoding, copied from the published table
REG_TABLE = {
    "Init": (1, 0, 0),
    "Validate": (1, 1, 0),
    "MCommit": (1, 0, 1),
    "VaandMC": (1, 1, 1),
}


@pytest.mark.parametrize("name, bits", REG_TABLE.items())
def test_decode_matches_table(name, bits):
    assert decode_reg_state(*bits).value == name
    assert REG_STATE_BITS[RegState(name)] == bits


@pytest.mark.parametrize("l", [0, 1])
@pytest.mark.parametrize("m", [0, 1])
def test_invalid_ignores_other_bits(l, m):
    assert decode_reg_state(0, l, m) is RegState.INVALID


def test_pre_computation_leaves_bits_alone():
    rf = RegisterFile(snapshot=range(NUM_REGS))
    rf.write_pre(3, 99)
    assert rf.read_pre(3) == 99
    assert rf.state(3) is RegState.INVALID
    assert reg_access_pre(rf, 3, "read") == 99
    rf.seal_precomputation()
    assert all(rf.state(r) is RegState.INIT for r in range(NUM_REGS))


def test_read_then_write_reaches_vaandmc():
    rf = RegisterFile(snapshot=[7] * NUM_REGS, sealed=True)
    assert rf.read_sp(3) == 7
    assert rf.state(3) is RegState.VALIDATE
    rf.write_sp(3, 8)
    assert rf.state(3) is RegState.VAANDMC
    assert rf.registers_needing_validation() == [(3, 7)]


def test_write_first_is_never_validated():
    rf = RegisterFile(sealed=True)
    rf.write_sp(3, 5)
    rf.read_sp(3)
    assert rf.state(3) is RegState.MCOMMIT
    assert registers_needing_validation(rf) == []


def test_speculative_access_before_sealing_is_an_error():
    rf = RegisterFile()
    with pytest.raises(SimulationError):
        rf.read_sp(0)
    with pytest.raises(SimulationError):
        rf.write_sp(0, 1)


def test_synchronize_only_unwritten_registers():
    rf = RegisterFile(snapshot=[1] * NUM_REGS, sealed=True)
    rf.read_sp(1)       # Validate: takes the parent value
    rf.write_sp(2, 50)  # MCommit: keeps its own
    synchronize_from_parent(rf, [9] * NUM_REGS)
    values = rf.values()
    assert values[0] == 9 and values[1] == 9 and values[2] == 50


def test_events_reported():
    seen = []
    rf = RegisterFile(sealed=True, on_event=lambda kind, **kw: seen.append((kind, kw["reg"])))
    rf.read_sp(4)
    rf.read_sp(4)
    rf.write_sp(4, 1)
    rf.write_sp(4, 2)
    assert seen == [("RS", 4), ("WS", 4)]


ops = st.lists(st.tuples(st.sampled_from(["r", "w"]), st.integers(0, NUM_REGS - 1),
                         st.integers(-100, 100)), max_size=60)


@given(ops)
def test_matches_first_access_model(seq):
    """l records "first access was a read", m records "ever written"."""
    snapshot = list(range(100, 100 + NUM_REGS))
    rf = RegisterFile(snapshot=snapshot, sealed=True)
    first: dict[int, tuple[str, int]] = {}
    written = set()
    current = list(snapshot)
    for kind, reg, value in seq:
        if kind == "r":
            assert rf.read_sp(reg) == current[reg]
            first.setdefault(reg, ("r", current[reg]))
        else:
            rf.write_sp(reg, value)
            current[reg] = value
            first.setdefault(reg, ("w", None))
            written.add(reg)
    expected = sorted((r, v) for r, (k, v) in first.items() if k == "r")
    assert sorted(rf.registers_needing_validation()) == expected
    for reg in range(NUM_REGS):
        l = int(first.get(reg, ("-",))[0] == "r")
        m = int(reg in written)
        assert rf.state(reg) is decode_reg_state(1, l, m)
