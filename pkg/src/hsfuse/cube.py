"""Hyperspectral cube data model and the ``.hsc`` container format.

A cube with ``nv`` rows, ``nh`` columns and ``b`` bands lives in memory as a
flat float64 vector in band-sequential order, each band plane column-major:
the 1-based flat index of pixel ``i`` in band ``k`` is ``i + (k - 1) * N``
with ``N = nv * nh``.  This matches ``numpy`` Fortran-order raveling of an
``(nv, nh, b)`` array, which is what :meth:`HsCube.as_array` returns.

On disk a cube is an ASCII header line ``HSC1 <nv> <nh> <b>\\n`` followed
immediately by ``nv * nh * b`` float64 little-endian samples in flat order,
with no padding and no trailing bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HsCube",
    "GuideImage",
    "HscFormatError",
    "flatten_index",
    "load_cube",
    "save_cube",
    "load_guide",
    "save_guide",
    "rgb_composite",
]

_MAGIC = b"HSC1"


class HscFormatError(ValueError):
    """Raised for malformed ``.hsc`` content; the message names the byte offset."""


def _validated_data(data, nv: int, nh: int, bands: int, what: str) -> np.ndarray:
    if nv < 1 or nh < 1 or bands < 1:
        raise ValueError(f"{what}: dimensions must be >= 1, got ({nv}, {nh}, {bands})")
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.ravel()
    expected = nv * nh * bands
    if arr.size != expected:
        raise ValueError(
            f"{what}: data length {arr.size} != nv*nh*bands = {expected}"
        )
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{what}: non-finite sample at flat index {bad}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HsCube:
    """An immutable hyperspectral image as a flat vector plus dimensions."""

    data: np.ndarray
    nv: int
    nh: int
    b: int

    def __post_init__(self):
        object.__setattr__(
            self, "data", _validated_data(self.data, self.nv, self.nh, self.b, "HsCube")
        )

    @property
    def n_pixels(self) -> int:
        return self.nv * self.nh

    @property
    def size(self) -> int:
        return self.nv * self.nh * self.b

    def as_array(self) -> np.ndarray:
        """Return the cube as an ``(nv, nh, b)`` array (a copy)."""
        return self.data.reshape((self.nv, self.nh, self.b), order="F").copy()

    @classmethod
    def from_array(cls, arr) -> "HsCube":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected a 2-D or 3-D array, got ndim={arr.ndim}")
        nv, nh, b = arr.shape
        return cls(arr.ravel(order="F"), nv, nh, b)


@dataclass(frozen=True, eq=False)
class GuideImage:
    """A guide (PAN or MS) image in the same flat layout; ``bands`` is 1 for PAN."""

    data: np.ndarray
    nv: int
    nh: int
    bands: int

    def __post_init__(self):
        object.__setattr__(
            self,
            "data",
            _validated_data(self.data, self.nv, self.nh, self.bands, "GuideImage"),
        )

    @property
    def n_pixels(self) -> int:
        return self.nv * self.nh

    @property
    def size(self) -> int:
        return self.nv * self.nh * self.bands

    def as_array(self) -> np.ndarray:
        return self.data.reshape((self.nv, self.nh, self.bands), order="F").copy()

    @classmethod
    def from_array(cls, arr) -> "GuideImage":
        cube = HsCube.from_array(arr)
        return cls(cube.data, cube.nv, cube.nh, cube.b)


def flatten_index(pixel: int, band: int, n_pixels: int, n_bands: int | None = None) -> int:
    """Map a (1-based pixel, 1-based band) pair to the 1-based flat index.

    The flat position of pixel ``i`` in band ``k`` is ``i + (k - 1) * n_pixels``.
    """
    if not 1 <= pixel <= n_pixels:
        raise IndexError(f"pixel index {pixel} out of range [1, {n_pixels}]")
    if band < 1 or (n_bands is not None and band > n_bands):
        hi = n_bands if n_bands is not None else "inf"
        raise IndexError(f"band index {band} out of range [1, {hi}]")
    return pixel + (band - 1) * n_pixels


def _read_hsc(path) -> tuple[np.ndarray, int, int, int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise HscFormatError(f"{path}: no header newline found (byte offset 0)")
    header = raw[:nl]
    parts = header.split(b" ")
    if len(parts) != 4 or parts[0] != _MAGIC:
        raise HscFormatError(
            f"{path}: malformed header {header!r} (byte offset 0); "
            f"expected 'HSC1 <nv> <nh> <b>'"
        )
    try:
        nv, nh, b = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise HscFormatError(
            f"{path}: non-integer dimension in header (byte offset 0)"
        ) from exc
    if nv < 1 or nh < 1 or b < 1:
        raise HscFormatError(
            f"{path}: non-positive dimensions ({nv}, {nh}, {b}) in header (byte offset 0)"
        )
    payload = raw[nl + 1 :]
    expected = nv * nh * b * 8
    if len(payload) < expected:
        raise HscFormatError(
            f"{path}: truncated payload, expected {expected} bytes but file ends at "
            f"byte offset {nl + 1 + len(payload)}"
        )
    if len(payload) > expected:
        raise HscFormatError(
            f"{path}: {len(payload) - expected} trailing bytes starting at "
            f"byte offset {nl + 1 + expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data, nv, nh, b


def _write_hsc(data: np.ndarray, nv: int, nh: int, b: int, path) -> None:
    header = f"HSC1 {nv} {nh} {b}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load_cube(path) -> HsCube:
    """Load an ``.hsc`` file as an :class:`HsCube`."""
    data, nv, nh, b = _read_hsc(path)
    return HsCube(data, nv, nh, b)


def save_cube(cube: HsCube, path) -> None:
    """Write a cube to ``path`` in the ``.hsc`` container format."""
    _write_hsc(cube.data, cube.nv, cube.nh, cube.b, path)


def load_guide(path) -> GuideImage:
    """Load an ``.hsc`` file as a :class:`GuideImage`."""
    data, nv, nh, b = _read_hsc(path)
    return GuideImage(data, nv, nh, b)


def save_guide(guide: GuideImage, path) -> None:
    _write_hsc(guide.data, guide.nv, guide.nh, guide.bands, path)


def rgb_composite(cube: HsCube, r_band: int, g_band: int, b_band: int) -> np.ndarray:
    """Extract three bands as an ``(nv, nh, 3)`` image clamped to [0, 1]."""
    arr = cube.as_array()
    out = np.empty((cube.nv, cube.nh, 3))
    for ch, band in enumerate((r_band, g_band, b_band)):
        if not 1 <= band <= cube.b:
            raise IndexError(f"band index {band} out of range [1, {cube.b}]")
        out[:, :, ch] = arr[:, :, band - 1]
    return np.clip(out, 0.0, 1.0)
