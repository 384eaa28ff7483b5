"""Snooping bus: message vocabulary, remote reads and RAW-violation detection.

The bus is an instantaneous, deterministic broadcast. Snoopers are visited in
ISL order. Remote reads are answered by the nearest logically earlier thread
holding the address, falling back to main memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import SimulationError
from .memcache import L1MemCache
from .threads import ThreadContext, ThreadEngine, ThreadState


class MessageKind(Enum):
    LPrR = "LPrR"
    RPrR = "RPrR"
    LPrW = "LPrW"
    LSpR = "LSpR"
    LSpW = "LSpW"
    RSpR = "RSpR"
    VioTest = "VioTest"


# optional parameters each kind must carry (addr and sender are always present)
MESSAGE_PARAMS = {
    MessageKind.LPrR: frozenset(),
    MessageKind.RPrR: frozenset({"speculative_level", "thread_version"}),
    MessageKind.LPrW: frozenset({"value"}),
    MessageKind.LSpR: frozenset(),
    MessageKind.LSpW: frozenset({"value"}),
    MessageKind.RSpR: frozenset({"speculative_level"}),
    MessageKind.VioTest: frozenset({"speculative_level"}),
}
LOCAL_KINDS = frozenset({MessageKind.LPrR, MessageKind.LPrW, MessageKind.LSpR, MessageKind.LSpW})


@dataclass(frozen=True)
class BusMessage:
    kind: MessageKind
    sender: int
    addr: int
    speculative_level: int | None = None
    value: int | None = None
    thread_version: int | None = None

    def __post_init__(self):
        present = {
            name
            for name in ("speculative_level", "value", "thread_version")
            if getattr(self, name) is not None
        }
        if present != MESSAGE_PARAMS[self.kind]:
            raise SimulationError(
                f"malformed {self.kind.value} message: parameters {sorted(present)}, "
                f"expected {sorted(MESSAGE_PARAMS[self.kind])}"
            )


@dataclass(frozen=True)
class Response:
    responder: int | None  # None: main memory
    value: int
    ver: int | None = None


def check_violation(receiver_cache: L1MemCache, viotest: BusMessage) -> bool:
    """True if the receiver consumed ``viotest.addr`` from a predecessor in speculation."""
    return receiver_cache.has_speculative_remote_load(viotest.addr)


class SnoopBus:
    def __init__(self, engine: ThreadEngine):
        self.engine = engine
        self.messages = 0

    def _thread(self, tid: int) -> ThreadContext:
        for pe in self.engine.pes:
            if pe.thread is not None and pe.thread.thread_id == tid:
                return pe.thread
        raise SimulationError(f"message from unknown thread {tid}")

    def _memory(self, addr: int) -> Response:
        return Response(None, int(self.engine.memory[addr]))

    def broadcast(self, msg: BusMessage) -> list[Response]:
        """Deliver ``msg``; return snoop responses ordered nearest-first."""
        self.messages += 1
        sender = self._thread(msg.sender)
        if msg.kind in LOCAL_KINDS:
            self._trace(sender, msg)
            return []
        if msg.kind is MessageKind.RSpR:
            responses = []
            for q in self.engine.predecessors(sender):
                if q.state in (ThreadState.INITIALIZATION, ThreadState.PRECOMPUTE,
                               ThreadState.RESTART):
                    # p-slice data is still being produced
                    continue
                line = q.cache.owned_view(msg.addr)
                if line is not None:
                    responses.append(Response(q.thread_id, line.data, line.ver))
            return responses
        if msg.kind is MessageKind.RPrR:
            return self._precompute_responses(sender, msg)
        # VioTest
        responses = []
        for r in self.engine.successors(sender):
            if check_violation(r.cache, msg):
                responses.append(Response(r.thread_id, 1))
        return responses

    def _precompute_responses(self, sender: ThreadContext, msg: BusMessage) -> list[Response]:
        parent = sender.parent
        if parent is None or not parent.alive:
            # parent and all its predecessors have committed
            return []
        responses = []
        line = parent.cache.version_at_most(msg.addr, msg.thread_version)
        if line is not None:
            responses.append(Response(parent.thread_id, line.data, line.ver))
        for q in self.engine.predecessors(parent):
            line = q.cache.owned_view(msg.addr)
            if line is not None:
                responses.append(Response(q.thread_id, line.data, line.ver))
        return responses

    def _trace(self, sender, msg, **outcome):
        trace = self.engine.trace
        if not (trace.enabled or trace.subscribers):
            return
        fields = {"level": msg.speculative_level, "addr": msg.addr}
        if msg.value is not None:
            fields["value"] = msg.value
        if msg.thread_version is not None:
            fields["ver"] = msg.thread_version
        fields.update(outcome)
        trace.emit(msg.kind.value, sender, **fields)

    # -- helpers used by the execution core --------------------------------
    def remote_read_pre(self, thread: ThreadContext, addr: int) -> int:
        msg = BusMessage(MessageKind.RPrR, thread.thread_id, addr,
                         speculative_level=self.engine.speculative_level(thread),
                         thread_version=thread.version)
        responses = self.broadcast(msg)
        resp = responses[0] if responses else self._memory(addr)
        self._trace(thread, msg, src=resp.responder if resp.responder is not None else "mem",
                    got=resp.value)
        return resp.value

    def remote_read_sp(self, thread: ThreadContext, addr: int) -> int:
        msg = BusMessage(MessageKind.RSpR, thread.thread_id, addr,
                         speculative_level=self.engine.speculative_level(thread))
        responses = self.broadcast(msg)
        resp = responses[0] if responses else self._memory(addr)
        self._trace(thread, msg, src=resp.responder if resp.responder is not None else "mem",
                    got=resp.value)
        return resp.value

    def viotest(self, thread: ThreadContext, addr: int) -> ThreadContext | None:
        """Broadcast a VioTest for ``addr``; restart the least speculative violator."""
        msg = BusMessage(MessageKind.VioTest, thread.thread_id, addr,
                         speculative_level=self.engine.speculative_level(thread))
        responses = self.broadcast(msg)
        self._trace(thread, msg, violators=[r.responder for r in responses])
        if not responses:
            return None
        violator = self._thread(responses[0].responder)
        handle_violation(self.engine, violator)
        return violator

    def local(self, kind: MessageKind, thread: ThreadContext, addr: int, value=None) -> None:
        trace = self.engine.trace
        if trace.enabled or trace.subscribers:
            self.broadcast(BusMessage(kind, thread.thread_id, addr, value=value))


def handle_violation(engine: ThreadEngine, violator: ThreadContext) -> None:
    """Squash everything after the violator, then restart it."""
    engine.restart(violator)
