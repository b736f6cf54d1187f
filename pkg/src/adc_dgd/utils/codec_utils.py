"""
Wire-format utilities for codeword payloads
"""

from typing import Literal, Tuple

import numpy as np

INT16_MIN = -32768
INT16_MAX = 32767

INT16_BYTES = 2
FLOAT64_BYTES = 8

_DTYPES = {
    ("int16", "little"): np.dtype("<i2"),
    ("int16", "big"): np.dtype(">i2"),
    ("float64", "little"): np.dtype("<f8"),
    ("float64", "big"): np.dtype(">f8"),
}


def int16_overflow(indices: np.ndarray) -> Tuple[bool, int]:
    """
    Check whether any lattice index falls outside the signed 16-bit range

    Args:
        indices: Array of (float or integer) lattice indices

    Returns:
        (overflowed, first offending flat position or -1)
    """
    flat = np.asarray(indices).ravel()
    bad = np.flatnonzero((flat < INT16_MIN) | (flat > INT16_MAX) | ~np.isfinite(flat))
    if bad.size:
        return True, int(bad[0])
    return False, -1


def pack_int16(values: np.ndarray, endianness: Literal["little", "big"] = "little") -> bytes:
    """
    Serialize int16 values, one per coordinate

    Raises:
        ValueError: If a value doesn't fit in 16 bits
    """
    arr = np.asarray(values)
    overflowed, pos = int16_overflow(arr)
    if overflowed:
        raise ValueError(f"Value {arr.ravel()[pos]} doesn't fit in 16 bits")
    return arr.astype(_DTYPES[("int16", endianness)]).tobytes()


def unpack_int16(data: bytes, endianness: Literal["little", "big"] = "little") -> np.ndarray:
    if len(data) % INT16_BYTES:
        raise ValueError(f"Payload length {len(data)} is not a multiple of {INT16_BYTES}")
    return np.frombuffer(data, dtype=_DTYPES[("int16", endianness)]).astype(np.int16)


def pack_float64(values: np.ndarray, endianness: Literal["little", "big"] = "little") -> bytes:
    return np.asarray(values, dtype=np.float64).astype(_DTYPES[("float64", endianness)]).tobytes()


def unpack_float64(data: bytes, endianness: Literal["little", "big"] = "little") -> np.ndarray:
    if len(data) % FLOAT64_BYTES:
        raise ValueError(f"Payload length {len(data)} is not a multiple of {FLOAT64_BYTES}")
    return np.frombuffer(data, dtype=_DTYPES[("float64", endianness)]).astype(np.float64)


def payload_bytes(dim: int, compressed: bool) -> int:
    """Bytes for one message of `dim` coordinates"""
    return dim * (INT16_BYTES if compressed else FLOAT64_BYTES)
