"""Line-oriented event trace: ``cycle=N pe=N tid=N ev=KIND k=v ...``."""

from __future__ import annotations


class Trace:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.cycle = 0
        self.lines: list[str] = []
        self.subscribers = []

    def emit(self, ev: str, thread=None, pe=None, **details) -> None:
        if not self.enabled and not self.subscribers:
            return
        if thread is not None:
            tid = thread.thread_id
            pe = thread.pe.pe_id if pe is None and thread.pe is not None else pe
        else:
            tid = None
        fields = [f"cycle={self.cycle}", f"pe={_fmt(pe)}", f"tid={_fmt(tid)}", f"ev={ev}"]
        fields.extend(f"{k}={_fmt(v)}" for k, v in details.items())
        line = " ".join(fields)
        if self.enabled:
            self.lines.append(line)
        for callback in self.subscribers:
            callback(line)

    def subscribe(self, callback) -> None:
        self.subscribers.append(callback)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value) or "-"
    return str(value)


def parse_line(line: str) -> dict[str, str]:
    """Split one trace line into its ``key=value`` fields."""
    return dict(tok.split("=", 1) for tok in line.split())
