"""Independent oracles shared by the test modules."""

from __future__ import annotations

from contextlib import contextmanager

from prophet_sim.trace import parse_line

ACCEPTANCE_LINES: list[str] = []


@contextmanager
def criterion(number: int, title: str):
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""
    detail: dict = {}
    try:
        yield detail
    except BaseException as exc:
        line = f"criterion {number} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0]
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"criterion {number} PASS  {title}" + (f" ({extra})" if extra else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def replay_isl(trace_lines):
    """Rebuild the thread list from trace events and check commit order.

    Uses only the trace: ``start`` creates the head, ``spawn`` inserts the
    child right after its parent, ``squash`` removes a thread, ``commit``
    must come from the current head and removes it, ``token`` must name the
    new head. Returns (commit sequence, max simultaneous stable threads).
    """
    order: list[str] = []
    stable: set[str] = set()
    commits: list[str] = []
    max_stable = 0
    last_committed = None
    for line in trace_lines:
        f = parse_line(line)
        ev, tid = f["ev"], f["tid"]
        if ev == "start":
            assert not order
            order.append(tid)
            stable.add(tid)
        elif ev == "spawn":
            parent = f["parent"]
            order.insert(order.index(parent) + 1, tid)
        elif ev == "squash":
            assert tid not in stable, "stable thread squashed"
            order.remove(tid)
        elif ev == "commit":
            assert order and order[0] == tid, f"commit of {tid} while head is {order[:1]}"
            assert tid in stable
            order.pop(0)
            stable.discard(tid)
            commits.append(tid)
            last_committed = tid
        elif ev == "token":
            assert f["src"] == last_committed
            assert order and order[0] == tid, "token not passed to the ISL successor"
            stable.add(tid)
        max_stable = max(max_stable, len(stable))
    return commits, max_stable


def visible_value(writes, memory, reader_version, parent, parent_predecessors, addr):
    """Brute-force value a pre-computation read of ``addr`` should observe.

    ``writes`` is the full write log as (thread, version, addr, value) in
    issue order. The parent contributes only its writes made under versions
    up to the reader's version (i.e. before the spawn point); each earlier
    thread contributes its latest write; otherwise memory answers.
    """
    mine = [w for w in writes if w[0] == parent and w[2] == addr and w[1] <= reader_version]
    if mine:
        return mine[-1][3]
    for q in parent_predecessors:
        theirs = [w for w in writes if w[0] == q and w[2] == addr]
        if theirs:
            return theirs[-1][3]
    return int(memory[addr])
