"""Multi-version L1 data cache, one per processing element.

A line is one 64-bit word tagged by address and by version. Version 0 marks
data produced or loaded while the owner ran its p-slice; speculative data is
tagged with the owner's current thread version. Writing under a new version
ages the previous newest line (sets its O bit) instead of overwriting it, so
a child's pre-computation reads can still find the value its parent held at
spawn time.

Misses are resolved by a caller-supplied ``fetch`` callable; the cache itself
never talks to the bus.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import SimulationError


class MemLineState(Enum):
    INVALID = "Invalid"
    PRE_SH = "PreSh"
    PRE_EX = "PreEx"
    PRE_EX_O = "PreExO"
    SP_SH = "SpSh"
    SP_SH_M = "SpShM"
    SP_SH_O = "SpShO"
    SP_EX = "SpEx"
    SP_EX_O = "SpExO"


# (V, RL, M, Ver, O). Ver is "0" for pre-computation, "TV" for a thread
# version; None marks a don't-care bit.
MEM_STATE_BITS = {
    MemLineState.INVALID: (0, None, None, None, None),
    MemLineState.PRE_SH: (1, 1, 0, "0", 1),
    MemLineState.PRE_EX: (1, 0, 1, "0", 0),
    MemLineState.PRE_EX_O: (1, 0, 1, "0", 1),
    MemLineState.SP_SH: (1, 1, 0, "TV", 0),
    MemLineState.SP_SH_M: (1, 1, 1, "TV", 0),
    MemLineState.SP_SH_O: (1, 1, 1, "TV", 1),
    MemLineState.SP_EX: (1, 0, 1, "TV", 0),
    MemLineState.SP_EX_O: (1, 0, 1, "TV", 1),
}

_DECODE = {
    (rl, m, ver, o): state
    for state, (v, rl, m, ver, o) in MEM_STATE_BITS.items()
    if v
}


def decode_mem_state(v: int, rl: int, m: int, ver: int, o: int) -> MemLineState:
    if not v:
        return MemLineState.INVALID
    key = (rl, m, "0" if ver == 0 else "TV", o)
    state = _DECODE.get(key)
    if state is None and key[:3] == (1, 0, "0"):
        # O is printed as 1 for PreSh; accept either value
        state = MemLineState.PRE_SH
    if state is None:
        raise SimulationError(f"unencodable cache line bits V=1 RL={rl} M={m} Ver={ver} O={o}")
    return state


def state_bits(state: MemLineState, version: int) -> tuple[int, int, int, int, int]:
    """Concrete (V, RL, M, Ver, O) for ``state``; don't-cares become 0."""
    if state is not MemLineState.INVALID and state.value.startswith("Sp") and version < 1:
        raise ValueError("speculative states need a thread version >= 1")
    v, rl, m, ver, o = MEM_STATE_BITS[state]
    ver = 0 if ver in ("0", None) else version
    return (v, rl or 0, m or 0, ver, o or 0)


@dataclass
class MemCacheLine:
    tag: int
    data: int
    ver: int
    v: int = 1
    rl: int = 0
    m: int = 0
    o: int = 0

    @property
    def state(self) -> MemLineState:
        return decode_mem_state(self.v, self.rl, self.m, self.ver, self.o)

    @property
    def is_pre_shared(self) -> bool:
        return self.ver == 0 and self.rl == 1 and self.m == 0


def encode_state(line: MemCacheLine) -> MemLineState:
    return line.state


class L1MemCache:
    def __init__(self, owner=None):
        self.owner = owner
        self._lines: dict[int, dict[int, MemCacheLine]] = {}

    def __len__(self) -> int:
        return sum(len(vers) for vers in self._lines.values())

    def lines(self) -> list[MemCacheLine]:
        return [ln for addr in sorted(self._lines) for _, ln in sorted(self._lines[addr].items())]

    def lines_for(self, addr: int) -> list[MemCacheLine]:
        return [ln for _, ln in sorted(self._lines.get(addr, {}).items())]

    def newest_version(self, addr: int) -> MemCacheLine | None:
        vers = self._lines.get(addr)
        if not vers:
            return None
        return vers[max(vers)]

    def owned_view(self, addr: int) -> MemCacheLine | None:
        """Newest line holding data this thread may use in speculation.

        A PreSh line is a p-slice copy of some predecessor's data and is
        never served once the p-slice is over.
        """
        line = self.newest_version(addr)
        if line is None or line.is_pre_shared:
            return None
        return line

    def version_at_most(self, addr: int, version: int) -> MemCacheLine | None:
        vers = self._lines.get(addr)
        if not vers:
            return None
        best = None
        for ver, line in vers.items():
            if ver <= version and not line.is_pre_shared and (best is None or ver > best.ver):
                best = line
        return best

    def _install(self, line: MemCacheLine) -> MemCacheLine:
        self._lines.setdefault(line.tag, {})[line.ver] = line
        return line

    # -- pre-computation accesses (version 0) --------------------------------
    def write_pre(self, addr: int, value: int) -> MemCacheLine:
        """LPrW: create or overwrite the version-0 line as PreEx."""
        vers = self._lines.get(addr, {})
        if vers and max(vers) != 0:
            raise SimulationError("pre-computation write with speculative lines present")
        line = vers.get(0)
        if line is None:
            line = self._install(MemCacheLine(addr, value, ver=0))
        line.data = value
        line.rl, line.m, line.o = 0, 1, 0
        return line

    def read_pre(self, addr: int, fetch: Callable[[], int]) -> tuple[int, bool]:
        """LPrR; on a miss ``fetch`` performs the RPrR. Returns (value, hit)."""
        line = self.newest_version(addr)
        if line is not None:
            return line.data, True
        value = fetch()
        self._install(MemCacheLine(addr, value, ver=0, rl=1, m=0, o=1))
        return value, False

    # -- speculative accesses -------------------------------------------------
    def write_sp(self, addr: int, value: int, version: int) -> MemCacheLine:
        """LSpW under thread version ``version`` (the caller emits VioTest)."""
        if version < 1:
            raise SimulationError("speculative write needs a thread version >= 1")
        newest = self.newest_version(addr)
        if newest is not None and newest.ver == version:
            newest.data = value
            newest.m = 1
            return newest
        vers = self._lines.get(addr, {})
        read_in_speculation = any(ln.rl and ln.ver > 0 for ln in vers.values())
        if newest is not None:
            newest.o = 1
            if newest.ver > 0 and newest.rl:
                # SpSh has no aged encoding of its own; it ages into SpShO
                newest.m = 1
        return self._install(
            MemCacheLine(addr, value, ver=version, rl=int(read_in_speculation), m=1, o=0)
        )

    def read_sp(self, addr: int, fetch: Callable[[], int], version: int) -> tuple[int, bool]:
        """LSpR; on a miss ``fetch`` performs the RSpR. Returns (value, hit)."""
        line = self.owned_view(addr)
        if line is not None:
            return line.data, True
        value = fetch()
        self._install(MemCacheLine(addr, value, ver=version, rl=1, m=0, o=0))
        return value, False

    # -- bulk operations -------------------------------------------------------
    def dirty_lines(self) -> list[MemCacheLine]:
        out = []
        for addr in sorted(self._lines):
            line = self.newest_version(addr)
            if line.m:
                out.append(line)
        return out

    def commit_lines(self, memory) -> int:
        """Write each address's newest modified line to ``memory``; empty the cache."""
        dirty = self.dirty_lines()
        for line in dirty:
            memory[line.tag] = line.data
        self.invalidate_all()
        return len(dirty)

    def invalidate_all(self) -> None:
        self._lines.clear()

    def lines_needing_verification(self) -> list[tuple[int, int]]:
        out = []
        for addr in sorted(self._lines):
            line = self._lines[addr].get(0)
            if line is not None and line.m:
                out.append((addr, line.data))
        return out

    def has_speculative_remote_load(self, addr: int) -> bool:
        return any(ln.rl and ln.ver > 0 for ln in self._lines.get(addr, {}).values())


# functional aliases mirroring the message names
def local_write_pre(cache: L1MemCache, addr: int, value: int) -> MemCacheLine:
    return cache.write_pre(addr, value)


def local_read_pre(cache: L1MemCache, addr: int, fetch) -> int:
    return cache.read_pre(addr, fetch)[0]


def local_write_sp(cache: L1MemCache, addr: int, value: int, version: int) -> MemCacheLine:
    return cache.write_sp(addr, value, version)


def local_read_sp(cache: L1MemCache, addr: int, fetch, version: int) -> int:
    return cache.read_sp(addr, fetch, version)[0]


def newest_version(cache: L1MemCache, addr: int) -> MemCacheLine | None:
    return cache.newest_version(addr)


def commit_lines(cache: L1MemCache, memory) -> int:
    return cache.commit_lines(memory)


def invalidate_all(cache: L1MemCache) -> None:
    cache.invalidate_all()


def lines_needing_verification(cache: L1MemCache) -> list[tuple[int, int]]:
    return cache.lines_needing_verification()
