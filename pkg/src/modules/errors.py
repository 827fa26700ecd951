from typing import Optional


class QcohError(Exception):
    """Base class for every error raised by the verifier."""


class InputError(QcohError, ValueError):
    """Malformed or inconsistent user input. The CLI exits with code 3."""


class ParseError(InputError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class NonHomogeneous(InputError):
    def __init__(self, line: Optional[int], message: str):
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}non-homogeneous input: {message}")


class UnknownName(InputError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown name '{name}'")


class RelationNotKilled(InputError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"relation {index} has nonzero image; the map is not well defined")


class BufferTooSmall(InputError):
    def __init__(self, degree: int, buffer: int):
        self.degree = degree
        self.buffer = buffer
        super().__init__(f"generator degree {degree} lies outside the window extended by buffer {buffer}")


class CapExhausted(QcohError):
    """Cap escalation ran out before the realized dimensions stabilized."""

    def __init__(self, max_cap: int, detail: str = ""):
        self.max_cap = max_cap
        super().__init__(f"no stabilization up to denominator cap {max_cap}" + (f" ({detail})" if detail else ""))


class GluingMismatch(QcohError):
    """The two computations of sections over the overlap disagree."""
