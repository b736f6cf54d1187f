"""
Compression: unbiased stochastic compression operators and their codewords
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from adc_dgd.utils.codec_utils import (
    FLOAT64_BYTES, INT16_BYTES, INT16_MAX, INT16_MIN,
    int16_overflow, pack_float64, pack_int16, unpack_float64, unpack_int16,
)
from adc_dgd.utils.error_handling import (
    CompressionError, CompressionOverflowError, CompressionRangeError, DecodeError,
)

logger = logging.getLogger(__name__)


class CompressorKind(str, Enum):
    IDENTITY = "identity"
    ROUND = "round"
    GRID = "grid"
    SPARSIFY = "sparsify"


# Level tables for sparsifier codewords, keyed by a stable id
_LEVEL_TABLES: Dict[str, np.ndarray] = {}


def uniform_levels(m: int, bound: float) -> np.ndarray:
    """Levels 0 = a_0 < a_1 < ... < a_m = bound, evenly spaced"""
    if m < 1:
        raise CompressionError(f"Sparsifier needs at least one level, got m={m}")
    if not bound > 0:
        raise CompressionError(f"Sparsifier bound must be positive, got M={bound}")
    return np.arange(m + 1, dtype=np.float64) * (bound / m)


def register_level_table(levels: np.ndarray, table_id: Optional[str] = None) -> str:
    levels = np.asarray(levels, dtype=np.float64)
    if levels.ndim != 1 or len(levels) < 2:
        raise CompressionError("Level table needs at least two entries, 0 and the bound")
    if levels[0] != 0.0 or np.any(np.diff(levels) <= 0):
        raise CompressionError("Level table must start at 0 and be strictly increasing")
    if len(levels) - 1 > INT16_MAX:
        raise CompressionError(f"Level table has {len(levels) - 1} levels; at most {INT16_MAX} fit a codeword")
    table_id = table_id or "levels:" + ",".join(repr(float(a)) for a in levels)
    existing = _LEVEL_TABLES.get(table_id)
    if existing is not None and not np.array_equal(existing, levels):
        raise CompressionError(f"Level table id '{table_id}' is already bound to different levels")
    frozen = levels.copy()
    frozen.setflags(write=False)
    _LEVEL_TABLES[table_id] = frozen
    return table_id


def level_table(table_id: str) -> np.ndarray:
    try:
        return _LEVEL_TABLES[table_id]
    except KeyError:
        raise DecodeError(f"Unknown level table id '{table_id}'") from None


@dataclass(frozen=True, eq=False)
class Codeword:
    """
    What one node broadcasts in one round

    values are int16 lattice (or level) indices for compressing operators and raw
    float64 values for the identity operator.
    """
    values: np.ndarray
    kind: CompressorKind
    scale: float = 1.0
    table_id: Optional[str] = None

    @property
    def byte_cost(self) -> int:
        per = FLOAT64_BYTES if self.kind is CompressorKind.IDENTITY else INT16_BYTES
        return per * int(self.values.size)

    def to_bytes(self) -> bytes:
        if self.kind is CompressorKind.IDENTITY:
            return pack_float64(self.values)
        return pack_int16(self.values)

    @classmethod
    def from_bytes(cls, data: bytes, kind: CompressorKind, scale: float = 1.0,
                   table_id: Optional[str] = None) -> "Codeword":
        kind = CompressorKind(kind)
        try:
            values = unpack_float64(data) if kind is CompressorKind.IDENTITY else unpack_int16(data)
        except ValueError as e:
            raise DecodeError(f"Malformed codeword payload: {e}") from e
        return cls(values=values, kind=kind, scale=scale, table_id=table_id)


def decode(c: Codeword) -> np.ndarray:
    """Exact real vector the sender sampled"""
    if c.kind is CompressorKind.IDENTITY:
        return np.array(c.values, dtype=np.float64)
    if c.kind in (CompressorKind.ROUND, CompressorKind.GRID):
        if not (c.scale > 0 and np.isfinite(c.scale)):
            raise DecodeError(f"Invalid lattice scale {c.scale!r}")
        return c.values.astype(np.float64) * c.scale
    if c.kind is CompressorKind.SPARSIFY:
        if c.table_id is None:
            raise DecodeError("Sparsifier codeword carries no level table id")
        levels = level_table(c.table_id)
        idx = c.values.astype(np.int64)
        if np.any(np.abs(idx) >= len(levels)):
            raise DecodeError(f"Level index out of range for table '{c.table_id}'")
        return np.sign(idx) * levels[np.abs(idx)]
    raise DecodeError(f"Unknown codeword kind {c.kind!r}")


def _check_indices(lo: np.ndarray, up: np.ndarray, z: np.ndarray):
    candidate = np.where(up, lo + 1.0, lo)
    overflowed, pos = int16_overflow(np.concatenate([lo.ravel(), candidate.ravel()]))
    if overflowed:
        coord = pos % z.size
        raise CompressionOverflowError(
            "Lattice index does not fit a 16-bit codeword",
            coordinate=int(coord), value=float(z.ravel()[coord]),
            suggestion="reduce the amplifying exponent or use a coarser grid spacing")


def _lattice_draw(z: np.ndarray, delta: float, rng: np.random.Generator,
                  inverted: bool = False) -> np.ndarray:
    scaled = z / delta
    if not np.all(np.isfinite(scaled)):
        bad = int(np.flatnonzero(~np.isfinite(scaled.ravel()))[0])
        raise CompressionOverflowError("Cannot compress a non-finite value",
                                       coordinate=bad, value=float(z.ravel()[bad]))
    lo = np.floor(scaled)
    frac = scaled - lo
    u = rng.random(z.shape)
    # literal form of the textbook rule swaps the two probabilities
    up = (u < 1.0 - frac) if inverted else (u < frac)
    _check_indices(lo, up, z)
    idx = lo + up
    return idx.astype(np.int16)


@dataclass(frozen=True)
class Compressor:
    """Unbiased stochastic compression operator descriptor"""
    kind: CompressorKind
    delta: float = 1.0
    levels: int = 16
    bound: float = 16.0
    inverted: bool = False
    # explicit sparsifier partition 0 = a_0 < ... < a_m = M; overrides levels and bound
    table: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CompressorKind(self.kind))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "bound", float(self.bound))
        if self.kind is CompressorKind.GRID and not self.delta > 0:
            raise CompressionError(f"Grid spacing must be positive, got {self.delta}")
        if self.kind is CompressorKind.ROUND and self.delta != 1.0:
            raise CompressionError("Stochastic rounding uses the unit lattice; use a grid compressor for other spacings")
        if self.table is not None:
            if self.kind is not CompressorKind.SPARSIFY:
                raise CompressionError("Only the sparsifier takes a level table")
            table = tuple(float(a) for a in self.table)
            if len(table) < 2:
                raise CompressionError("Level table needs at least two entries, 0 and the bound")
            object.__setattr__(self, "table", table)
            object.__setattr__(self, "levels", len(table) - 1)
            object.__setattr__(self, "bound", table[-1])
        if self.kind is CompressorKind.SPARSIFY:
            register_level_table(self._partition(), self.table_id)

    def _partition(self) -> np.ndarray:
        if self.table is not None:
            return np.array(self.table, dtype=np.float64)
        return uniform_levels(self.levels, self.bound)

    @property
    def table_id(self) -> Optional[str]:
        if self.kind is not CompressorKind.SPARSIFY:
            return None
        if self.table is not None:
            return "levels:" + ",".join(repr(a) for a in self.table)
        return f"uniform:{self.levels}:{self.bound!r}"

    @property
    def level_values(self) -> np.ndarray:
        """Sparsifier partition, registered again in processes that unpickled this descriptor"""
        return level_table(register_level_table(self._partition(), self.table_id))

    @property
    def sigma2(self) -> float:
        return variance_bound(self)

    @property
    def bytes_per_coordinate(self) -> int:
        return FLOAT64_BYTES if self.kind is CompressorKind.IDENTITY else INT16_BYTES

    def compress(self, z, rng: np.random.Generator) -> Codeword:
        z = np.asarray(z, dtype=np.float64)
        if self.kind is CompressorKind.IDENTITY:
            return Codeword(values=z.copy(), kind=self.kind)
        if self.kind is CompressorKind.ROUND:
            return compress_round(z, rng, inverted=self.inverted)
        if self.kind is CompressorKind.GRID:
            return compress_grid(z, self.delta, rng)
        return compress_sparsify(z, self.level_values, rng, self.table_id)

    def describe(self) -> str:
        if self.kind is CompressorKind.GRID:
            return f"grid(delta={self.delta:g})"
        if self.kind is CompressorKind.SPARSIFY and self.table is not None:
            return "sparsify(levels=[" + ", ".join(f"{a:g}" for a in self.table) + "])"
        if self.kind is CompressorKind.SPARSIFY:
            return f"sparsify(m={self.levels}, M={self.bound:g})"
        if self.kind is CompressorKind.ROUND and self.inverted:
            return "round(inverted)"
        return self.kind.value


def identity() -> Compressor:
    return Compressor(CompressorKind.IDENTITY)


def stochastic_rounding(inverted: bool = False) -> Compressor:
    return Compressor(CompressorKind.ROUND, inverted=inverted)


def grid_quantizer(delta: float) -> Compressor:
    return Compressor(CompressorKind.GRID, delta=float(delta))


def sparsifier(levels: int = 16, bound: float = 16.0, table: Optional[Sequence[float]] = None) -> Compressor:
    if table is not None:
        return Compressor(CompressorKind.SPARSIFY, table=tuple(table))
    return Compressor(CompressorKind.SPARSIFY, levels=int(levels), bound=float(bound))


def compress_round(z, rng: np.random.Generator, inverted: bool = False) -> Codeword:
    """Round up with probability equal to the fractional part"""
    z = np.asarray(z, dtype=np.float64)
    return Codeword(values=_lattice_draw(z, 1.0, rng, inverted), kind=CompressorKind.ROUND, scale=1.0)


def compress_grid(z, delta: float, rng: np.random.Generator) -> Codeword:
    """Randomized quantization onto the grid a_i = i * delta"""
    z = np.asarray(z, dtype=np.float64)
    return Codeword(values=_lattice_draw(z, delta, rng), kind=CompressorKind.GRID, scale=float(delta))


def compress_sparsify(z, levels: Sequence[float], rng: np.random.Generator,
                      table_id: Optional[str] = None) -> Codeword:
    """
    Quantization sparsifier over magnitude buckets a_i < |z| <= a_{i+1}

    levels is any partition 0 = a_0 < a_1 < ... < a_m = M of [0, M]. Emits
    sign(z) * a_{i+1} with probability |z| / a_{i+1}, otherwise 0.
    """
    z = np.asarray(z, dtype=np.float64)
    table_id = register_level_table(levels, table_id)
    table = level_table(table_id)
    bound = float(table[-1])
    mag = np.abs(z)
    if not np.all(np.isfinite(mag)) or np.any(mag > bound):
        bad = int(np.flatnonzero(~(mag <= bound))[0])
        raise CompressionRangeError(
            f"|z| = {mag.ravel()[bad]:.6g} exceeds the sparsifier bound M = {bound:g} "
            f"(coordinate {bad})",
            suggestion="raise the sparsifier bound or reduce the amplifying exponent")
    bucket = np.searchsorted(table, mag, side="left")
    top = table[bucket]
    prob = np.divide(mag, top, out=np.zeros_like(mag), where=bucket > 0)
    keep = rng.random(z.shape) < prob
    idx = np.where(keep, np.sign(z) * bucket, 0.0)
    return Codeword(values=idx.astype(np.int16), kind=CompressorKind.SPARSIFY, table_id=table_id)


def variance_bound(c: Compressor) -> float:
    """Per-coordinate bound on E[(C(z) - z)^2]"""
    if c.kind is CompressorKind.IDENTITY:
        return 0.0
    if c.kind is CompressorKind.ROUND:
        return 0.25
    if c.kind is CompressorKind.GRID:
        return c.delta ** 2 / 4.0
    table = c.level_values
    lower, upper = table[:-1], table[1:]
    # v(a_{i+1} - v) on (a_i, a_{i+1}] peaks at the midpoint, or at a_i when a_i is past it
    v = np.clip(upper / 2.0, lower, upper)
    return float(np.max(v * (upper - v)))


def empirical_unbiasedness(c: Compressor, z, trials: int,
                           rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample mean of C(z) - z and sample variance of C(z), per coordinate

    All draws are made in one vectorized call.
    """
    if trials < 10_000:
        raise CompressionError(f"Unbiasedness estimates need at least 10^4 trials, got {trials}")
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if c.kind is CompressorKind.IDENTITY:
        return np.zeros_like(z), np.zeros_like(z)
    samples = decode(c.compress(np.broadcast_to(z, (trials,) + z.shape), rng))
    return samples.mean(axis=0) - z, samples.var(axis=0, ddof=1)


__all__ = [
    "CompressorKind", "Compressor", "Codeword", "decode", "variance_bound",
    "compress_round", "compress_grid", "compress_sparsify", "empirical_unbiasedness",
    "identity", "stochastic_rounding", "grid_quantizer", "sparsifier",
    "uniform_levels", "register_level_table", "level_table",
    "INT16_MIN", "INT16_MAX",
]
