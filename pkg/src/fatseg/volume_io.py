"""Header + raw volume files, voxel geometry and slice access.

A volume is stored as two files: a UTF-8 text header of ``key=value``
lines and a little-endian raw payload, x-fastest, then y, then z::

    dims=nx ny nz
    spacing=dx dy dz
    type=int16
    order=little
    raw=case.raw

Arrays are held in memory as ``(nz, ny, nx)`` so that C order matches the
on-disk x-fastest layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

HEADER_KEYS = ("dims", "spacing", "type", "order", "raw")
DTYPES = {"int16": np.dtype("<i2"), "uint8": np.dtype("u1")}


class VolumeFormatError(ValueError):
    """Malformed header, payload or grid contents."""


class Label(IntEnum):
    BACKGROUND = 0
    SAT = 1
    VAT = 2
    FAT = 3  # fat not yet split into SAT/VAT


@dataclass(frozen=True)
class VoxelSpacing:
    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for v in (self.dx, self.dy, self.dz):
            if not (math.isfinite(v) and v > 0):
                raise VolumeFormatError(f"spacing must be positive and finite, got {self}")

    @property
    def voxel_ml(self) -> float:
        return self.dx * self.dy * self.dz / 1000.0

    @property
    def pixel_mm2(self) -> float:
        return self.dx * self.dy


def _frozen(data: np.ndarray, dtype) -> np.ndarray:
    arr = np.array(data, dtype=dtype, copy=True, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class VolumeGrid:
    """CT intensities in HU. ``data`` has shape ``(nz, ny, nx)`` and is read-only."""

    data: np.ndarray
    spacing: VoxelSpacing

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise VolumeFormatError(f"volume must be a non-empty 3D array, got shape {data.shape}")
        if data.dtype != np.int16:
            if np.any(data < -32768) or np.any(data > 32767):
                raise VolumeFormatError("HU values outside int16 range")
        object.__setattr__(self, "data", _frozen(data, np.int16))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return nx, ny, nz

    def __eq__(self, other):
        if not isinstance(other, VolumeGrid):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class MaskGrid:
    """Per-voxel :class:`Label` codes, shape ``(nz, ny, nx)``, read-only."""

    data: np.ndarray
    spacing: VoxelSpacing

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise VolumeFormatError(f"mask must be a non-empty 3D array, got shape {data.shape}")
        if data.size and (data.min() < 0 or data.max() > max(Label)):
            raise VolumeFormatError("mask contains codes outside {0, 1, 2, 3}")
        object.__setattr__(self, "data", _frozen(data, np.uint8))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return nx, ny, nz

    def matches(self, vol: VolumeGrid) -> bool:
        return self.dims == vol.dims and self.spacing == vol.spacing

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.data == label))

    def volume_ml(self, label: Label) -> float:
        return self.count(label) * self.spacing.voxel_ml

    def __eq__(self, other):
        if not isinstance(other, MaskGrid):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.data, other.data)


def _raw_path(header: Path) -> Path:
    return header.with_suffix(".raw") if header.suffix != ".raw" else header.with_suffix(".raw.raw")


def _write(path, data: np.ndarray, spacing: VoxelSpacing, type_name: str) -> None:
    path = Path(path)
    raw = _raw_path(path)
    nz, ny, nx = data.shape
    lines = [
        f"dims={nx} {ny} {nz}",
        f"spacing={spacing.dx!r} {spacing.dy!r} {spacing.dz!r}",
        f"type={type_name}",
        "order=little",
        f"raw={raw.name}",
    ]
    payload = np.ascontiguousarray(data, dtype=DTYPES[type_name]).tobytes(order="C")
    raw.write_bytes(payload)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_header(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such header: {path}")
    fields = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise VolumeFormatError(f"bad header line {line!r}")
        fields[key.strip()] = value.strip()
    missing = [k for k in HEADER_KEYS if k not in fields]
    if missing:
        raise VolumeFormatError(f"header missing keys: {missing}")
    return fields


def _read(path) -> tuple[np.ndarray, VoxelSpacing, str]:
    path = Path(path)
    h = read_header(path)
    try:
        dims = [int(v) for v in h["dims"].split()]
        spacing_vals = [float(v) for v in h["spacing"].split()]
    except ValueError as exc:
        raise VolumeFormatError(f"unparseable dims/spacing in {path}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeFormatError(f"dims must be three positive integers, got {h['dims']!r}")
    if len(spacing_vals) != 3:
        raise VolumeFormatError(f"spacing must have three values, got {h['spacing']!r}")
    spacing = VoxelSpacing(*spacing_vals)
    if h["type"] not in DTYPES:
        raise VolumeFormatError(f"unsupported element type {h['type']!r}")
    if h["order"] != "little":
        raise VolumeFormatError(f"unsupported byte order {h['order']!r}")
    raw = path.parent / h["raw"]
    if not raw.is_file():
        raise FileNotFoundError(f"raw payload not found: {raw}")
    dtype = DTYPES[h["type"]]
    nx, ny, nz = dims
    payload = raw.read_bytes()
    expected = nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(f"payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    return data, spacing, h["type"]


def load_volume(path) -> VolumeGrid:
    data, spacing, type_name = _read(path)
    if type_name != "int16":
        raise VolumeFormatError(f"volume must be int16, got {type_name}")
    return VolumeGrid(data, spacing)


def save_volume(vol: VolumeGrid, path) -> None:
    _write(path, vol.data, vol.spacing, "int16")


def load_mask(path) -> MaskGrid:
    data, spacing, type_name = _read(path)
    if type_name != "uint8":
        raise VolumeFormatError(f"mask must be uint8, got {type_name}")
    return MaskGrid(data, spacing)


def save_mask(mask: MaskGrid, path) -> None:
    _write(path, mask.data, mask.spacing, "uint8")


def extract_slice(vol: VolumeGrid | MaskGrid, z: int) -> np.ndarray:
    """Return the z-th xy-plane as a read-only ``(ny, nx)`` view."""
    nz = vol.data.shape[0]
    if not 0 <= z < nz:
        raise IndexError(f"slice {z} out of range [0, {nz})")
    return vol.data[z]
