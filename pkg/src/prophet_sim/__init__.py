"""Cycle-level simulator of the Prophet speculative multithreading model."""

from .core import (
    MachineConfig,
    RunResult,
    RunStats,
    Simulator,
    collect_stats,
    run_sequential,
    run_speculative,
)
from .errors import EquivalenceError, ProgramError, SimulationError, WatchdogError
from .isa import Instruction, Program, format_program, parse_program, sequential_next

__all__ = [
    "EquivalenceError",
    "Instruction",
    "MachineConfig",
    "Program",
    "ProgramError",
    "RunResult",
    "RunStats",
    "SimulationError",
    "Simulator",
    "WatchdogError",
    "collect_stats",
    "format_program",
    "parse_program",
    "run_sequential",
    "run_speculative",
    "sequential_next",
]
