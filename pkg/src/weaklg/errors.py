"""Exception types shared across the package."""


class WeakLGError(Exception):
    """Base class for all errors raised by weaklg."""


class ShapeError(WeakLGError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(WeakLGError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvariantError(WeakLGError):
    """A state, channel or table violates one of its invariants."""


class UnsupportedGateError(WeakLGError, ValueError):
    """Unknown gate kind."""


class CircuitParseError(WeakLGError, ValueError):
    """Malformed circuit text. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class StructuralError(WeakLGError, ValueError):
    """A circuit lacks a structural element an operation relies on."""


class ResolutionError(WeakLGError, ValueError):
    """A discretised outcome grid is too coarse or too narrow."""


class LabelMismatchError(WeakLGError, ValueError):
    """Two outcome-labelled families do not share their labels."""


class ConfigError(WeakLGError, ValueError):
    """Invalid configuration. ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
