"""
Binary formats for samples and masks.

GPF1 (fields), little-endian:
    magic "GPFLD001" | u32 d | u32 cells[d] | f64 spacing[d] | u64 seed |
    u16 n | n bytes utf-8 kernel id | f64 values (C order)

GPM1 (masks), little-endian, run-length encoded:
    magic "GPMSK001" | u32 d | u32 cells[d] | f64 spacing[d] | f64 level |
    u16 n | n bytes utf-8 source id | u64 run count | u32 runs
Runs alternate False, True, False, ... over the C-order flattening and always
start with a (possibly empty) False run.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .connectivity import ExcursionMask
from .synthesis import FieldSample, GridSpec

FIELD_MAGIC = b"GPFLD001"
MASK_MAGIC = b"GPMSK001"


def _pack_header(magic: bytes, grid: GridSpec) -> bytes:
    d = grid.dimension
    return magic + struct.pack(f"<I{d}I{d}d", d, *grid.cells, *grid.spacing)


def _pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("identifier too long for the file header")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ValueError("truncated file")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def text(self) -> str:
        (n,) = self.take("<H")
        raw = self.data[self.pos:self.pos + n]
        if len(raw) != n:
            raise ValueError("truncated file")
        self.pos += n
        return raw.decode("utf-8")

    def grid(self) -> GridSpec:
        (d,) = self.take("<I")
        if d not in (1, 2, 3):
            raise ValueError(f"unsupported dimension {d} in header")
        cells = self.take(f"<{d}I")
        spacing = self.take(f"<{d}d")
        return GridSpec(cells=cells, extent=tuple(c * h for c, h in zip(cells, spacing)))


def _check_magic(data: bytes, magic: bytes) -> _Reader:
    if data[:len(magic)] != magic:
        raise ValueError(f"not a {magic.decode()} file")
    reader = _Reader(data)
    reader.pos = len(magic)
    return reader


def encode_field(s: FieldSample) -> bytes:
    return (
        _pack_header(FIELD_MAGIC, s.grid)
        + struct.pack("<Q", s.seed)
        + _pack_text(s.kernel_id)
        + s.values.astype("<f8").tobytes(order="C")
    )


def decode_field(data: bytes) -> FieldSample:
    reader = _check_magic(data, FIELD_MAGIC)
    grid = reader.grid()
    (seed,) = reader.take("<Q")
    kernel_id = reader.text()
    count = int(np.prod(grid.cells))
    payload = data[reader.pos:]
    if len(payload) != 8 * count:
        raise ValueError(f"expected {count} values, found {len(payload) // 8}")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.cells)
    return FieldSample(grid=grid, values=values, kernel_id=kernel_id, seed=seed, method="file")


def run_lengths(bits: np.ndarray) -> np.ndarray:
    """Alternating run lengths of a flattened boolean array, starting with False."""
    flat = np.asarray(bits, dtype=bool).ravel()
    if flat.size == 0:
        return np.zeros(0, dtype=np.uint32)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate([[0], runs])
    return runs.astype(np.uint32)


def expand_runs(runs: np.ndarray, size: int) -> np.ndarray:
    values = np.arange(len(runs)) % 2 == 1
    flat = np.repeat(values, runs.astype(np.int64))
    if flat.size != size:
        raise ValueError(f"runs cover {flat.size} cells, grid has {size}")
    return flat


def encode_mask(m: ExcursionMask) -> bytes:
    if m.kind == "nodal":
        raise ValueError("GPM1 stores vertex masks only")
    runs = run_lengths(m.bits)
    return (
        _pack_header(MASK_MAGIC, m.grid)
        + struct.pack("<d", m.level)
        + _pack_text(m.source_id)
        + struct.pack("<Q", len(runs))
        + runs.astype("<u4").tobytes()
    )


def decode_mask(data: bytes) -> ExcursionMask:
    reader = _check_magic(data, MASK_MAGIC)
    grid = reader.grid()
    (level,) = reader.take("<d")
    source_id = reader.text()
    (n_runs,) = reader.take("<Q")
    payload = data[reader.pos:]
    if len(payload) != 4 * n_runs:
        raise ValueError("run table length does not match run count")
    runs = np.frombuffer(payload, dtype="<u4")
    bits = expand_runs(runs, int(np.prod(grid.cells))).reshape(grid.cells)
    return ExcursionMask(grid=grid, bits=bits, level=level, source_id=source_id, kind="excursion")


def write_field(s: FieldSample, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_field(s))


def read_field(path: Union[str, Path]) -> FieldSample:
    return decode_field(Path(path).read_bytes())


def write_mask(m: ExcursionMask, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_mask(m))


def read_mask(path: Union[str, Path]) -> ExcursionMask:
    return decode_mask(Path(path).read_bytes())
