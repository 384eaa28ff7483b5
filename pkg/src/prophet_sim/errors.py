"""Exception hierarchy shared by the parser, the simulator and the CLI."""


class ProphetError(Exception):
    pass


class ProgramError(ProphetError):
    """A program failed to parse or validate, or faulted at run time."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SimulationError(ProphetError):
    """An internal invariant of the simulated machine was violated."""


class WatchdogError(SimulationError):
    pass


class EquivalenceError(SimulationError):
    """Speculative execution diverged from the sequential oracle."""
