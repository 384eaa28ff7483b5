"""Built-in example programs shipped with the package."""

from __future__ import annotations

from importlib import resources

from .isa import Program, parse_program


def names() -> list[str]:
    files = resources.files(__package__).joinpath("corpus").iterdir()
    return sorted(f.name[: -len(".prophet")] for f in files if f.name.endswith(".prophet"))


def source(name: str) -> str:
    name = name.removesuffix(".prophet")
    path = resources.files(__package__).joinpath("corpus", f"{name}.prophet")
    if not path.is_file():
        raise KeyError(f"no built-in program named {name!r}")
    return path.read_text(encoding="utf-8")


def load(name: str) -> Program:
    return parse_program(source(name))
