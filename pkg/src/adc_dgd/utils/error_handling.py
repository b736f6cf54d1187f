"""
Error handling classes for consensus simulation
"""

from typing import Optional, List, Sequence, Tuple, Any
from dataclasses import dataclass


@dataclass
class ErrorLocation:
    """Represents the location of an error in a config file"""
    line: int
    column: int = 1
    file: Optional[str] = None
    context: Optional[str] = None  # Source line context


class SimulationError(Exception):
    """Base exception for simulator errors"""

    def __init__(self, message: str, location: Optional[ErrorLocation] = None,
                 suggestion: Optional[str] = None):
        self.message = message
        self.location = location
        self.suggestion = suggestion
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        msg = self.message
        if self.location:
            file_info = f" in {self.location.file}" if self.location.file else ""
            msg += f" at line {self.location.line}, column {self.location.column}{file_info}"
            if self.location.context:
                msg += f"\n  Context: {self.location.context}"
        if self.suggestion:
            msg += f"\n  Suggestion: {self.suggestion}"
        return msg


class TopologyError(SimulationError):
    """Raised when a graph cannot be built or is not connected"""
    pass


class MatrixValidationError(SimulationError):
    """Raised when a consensus matrix violates one of its invariants"""

    def __init__(self, message: str, property_name: Optional[str] = None,
                 indices: Optional[Sequence[Tuple[int, ...]]] = None,
                 location: Optional[ErrorLocation] = None, suggestion: Optional[str] = None):
        self.property_name = property_name
        self.indices = list(indices) if indices else []
        super().__init__(message, location, suggestion)

    def _format_message(self) -> str:
        msg = super()._format_message()
        if self.property_name:
            msg += f" (property: '{self.property_name}'"
            if self.indices:
                shown = ", ".join(str(ix) for ix in self.indices[:8])
                more = ", ..." if len(self.indices) > 8 else ""
                msg += f", indices: {shown}{more}"
            msg += ")"
        return msg


class ObjectiveError(SimulationError):
    """Raised for malformed objectives or dimension mismatches"""
    pass


class NoFiniteMinimizerError(ObjectiveError):
    """Raised when a quadratic family has no finite global minimizer"""
    pass


class ScheduleError(SimulationError):
    """Raised for invalid step-size schedule queries"""
    pass


class CompressionError(SimulationError):
    """Base class for compression failures"""
    pass


class CompressionOverflowError(CompressionError):
    """Raised when a codeword index leaves the 16-bit range"""

    def __init__(self, message: str, coordinate: Optional[int] = None, value: Optional[float] = None,
                 node: Optional[int] = None, round_index: Optional[int] = None,
                 suggestion: Optional[str] = None):
        self.coordinate = coordinate
        self.value = value
        self.node = node
        self.round_index = round_index
        super().__init__(message, suggestion=suggestion)

    def _format_message(self) -> str:
        msg = super()._format_message()
        parts = []
        if self.node is not None:
            parts.append(f"node: {self.node}")
        if self.round_index is not None:
            parts.append(f"round: {self.round_index}")
        if self.coordinate is not None:
            parts.append(f"coordinate: {self.coordinate}")
        if self.value is not None:
            parts.append(f"value: {self.value!r}")
        if parts:
            msg += f" ({', '.join(parts)})"
        return msg


class CompressionRangeError(CompressionError):
    """Raised when an input lies outside a sparsifier's level range"""
    pass


class DecodeError(CompressionError):
    """Raised when a codeword cannot be decoded"""
    pass


class DivergenceError(SimulationError):
    """Raised when iterates become non-finite or exceed the divergence threshold"""

    def __init__(self, message: str, round_index: Optional[int] = None, value: Optional[float] = None):
        self.round_index = round_index
        self.value = value
        super().__init__(message)


class ConfigError(SimulationError):
    """Raised when a run configuration is invalid"""

    def __init__(self, message: str, key: Optional[str] = None,
                 location: Optional[ErrorLocation] = None, suggestion: Optional[str] = None):
        self.key = key
        super().__init__(message, location, suggestion)

    def _format_message(self) -> str:
        msg = super()._format_message()
        if self.key:
            msg += f" (key: '{self.key}')"
        return msg


class AssumptionViolationWarning(UserWarning):
    """Emitted when a sampled problem appears to violate a standing assumption"""
    pass


def _numbered(title: str, items: Sequence[str], dropped: int = 0) -> str:
    if not items:
        return f"No {title.lower()}"
    body = [f"{title}:"] + [f"  {i}. {item}" for i, item in enumerate(items, 1)]
    if dropped:
        body.append(f"  ... and {dropped} more")
    return "\n".join(body)


class ErrorReporter:
    """
    Collects validation errors and early-termination warnings

    Validators add every problem they find; callers log the full listing and
    then raise the first error, which is the one users act on.
    """

    def __init__(self, limit: int = 100):
        self.errors: List[SimulationError] = []
        self.warnings: List[str] = []
        self.limit = limit
        self.dropped = 0

    def add_error(self, error: SimulationError):
        if len(self.errors) < self.limit:
            self.errors.append(error)
        else:
            self.dropped += 1

    def add_warning(self, warning: str, location: Optional[ErrorLocation] = None):
        if location is not None:
            where = f" in {location.file}" if location.file else ""
            warning = f"{warning} at line {location.line}{where}"
        self.warnings.append(warning)

    def has_errors(self) -> bool:
        return bool(self.errors)

    def raise_if_errors(self):
        if self.errors:
            raise self.errors[0]

    def format_errors(self) -> str:
        return _numbered("Errors", [str(e) for e in self.errors], self.dropped)

    def format_warnings(self) -> str:
        return _numbered("Warnings", self.warnings)


def describe_error(error: Any) -> str:
    """One-line description of an exception, for CSV termination fields and logs"""
    text = str(error).splitlines()[0] if str(error) else type(error).__name__
    return f"{type(error).__name__}: {text}"
