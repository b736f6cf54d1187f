"""
Utility modules for the simulator
"""

from .error_handling import (
    SimulationError, TopologyError, MatrixValidationError, ObjectiveError, NoFiniteMinimizerError,
    CompressionError, CompressionOverflowError, CompressionRangeError, DecodeError,
    DivergenceError, ConfigError, ScheduleError, AssumptionViolationWarning, ErrorReporter, ErrorLocation,
)
from .codec_utils import (
    INT16_MIN, INT16_MAX, int16_overflow, pack_int16, unpack_int16, pack_float64, unpack_float64,
    payload_bytes,
)

__all__ = [
    # Error handling
    'SimulationError', 'TopologyError', 'MatrixValidationError', 'ObjectiveError', 'NoFiniteMinimizerError',
    'CompressionError', 'CompressionOverflowError', 'CompressionRangeError', 'DecodeError',
    'DivergenceError', 'ConfigError', 'ScheduleError', 'AssumptionViolationWarning',
    'ErrorReporter', 'ErrorLocation',

    # Wire format
    'INT16_MIN', 'INT16_MAX', 'int16_overflow', 'pack_int16', 'unpack_int16',
    'pack_float64', 'unpack_float64', 'payload_bytes',
]
