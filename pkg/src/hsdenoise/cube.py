"""Hyperspectral data cube: in-memory type, HSC1 binary format, preprocessing.

A cube is an H x W image whose pixels each hold a full spectrum of B bands.
Data is stored as a C-contiguous float32 array of shape (H, W, B), which is
exactly the pixel-interleaved layout the HSC1 file uses: per pixel, B
contiguous band values, pixels in raster order (rows top to bottom, columns
left to right).

HSC1 file layout (all little-endian):

    bytes 0-3   magic "HSC1"
    u32         height
    u32         width
    u32         bands
    u8          axis_flag (0 or 1)
    [bands f32] axis values, only if axis_flag == 1
    H*W*B f32   intensities, pixel-interleaved

``norm_factor`` is in-memory bookkeeping only (the cumulative divisor applied
by :func:`normalize_max`); it is not serialized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    FormatError,
    PreconditionError,
    RepairError,
    ShapeError,
)

__all__ = [
    "HyperCube",
    "PixelMask",
    "SplitIndices",
    "load_cube",
    "save_cube",
    "normalize_max",
    "find_saturated",
    "repair_saturated",
    "split_train_val",
]

MAGIC = b"HSC1"
_HEADER = struct.Struct("<4sIIIB")


@dataclass
class HyperCube:
    """An (H, W, B) stack of per-pixel spectra with an optional spectral axis.

    ``axis``, when present, gives the hyperspectral-index value of each band
    (e.g. Raman shift in cm^-1) and must be strictly monotonic.
    """

    data: np.ndarray
    axis: np.ndarray | None = None
    norm_factor: float = 1.0

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ShapeError("cube data must be a 3-D (height, width, bands) array")
        if min(self.data.shape) < 1:
            raise ShapeError(f"cube dimensions must all be >= 1, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ShapeError("cube data must be finite")
        if self.axis is not None:
            self.axis = np.ascontiguousarray(self.axis, dtype=np.float32)
            if self.axis.ndim != 1 or self.axis.shape[0] != self.bands:
                raise ShapeError(
                    f"axis length {self.axis.shape} does not match bands {self.bands}"
                )
            steps = np.diff(self.axis.astype(np.float64))
            if not ((steps > 0).all() or (steps < 0).all()):
                raise ShapeError("axis must be strictly monotonic")
        if not (np.isfinite(self.norm_factor) and self.norm_factor > 0):
            raise ShapeError(f"norm_factor must be positive, got {self.norm_factor}")
        self.norm_factor = float(self.norm_factor)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def spectra(self) -> np.ndarray:
        """View of the data as an (H*W, B) matrix of spectra in raster order."""
        return self.data.reshape(self.n_pixels, self.bands)

    def copy(self) -> "HyperCube":
        return HyperCube(
            self.data.copy(),
            None if self.axis is None else self.axis.copy(),
            self.norm_factor,
        )


@dataclass
class PixelMask:
    """Boolean per-pixel flags matching a cube's spatial dimensions."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ShapeError("pixel mask must be 2-D (height, width)")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def count(self) -> int:
        return int(self.mask.sum())


@dataclass
class SplitIndices:
    """Disjoint train/validation pixel indices covering 0..n-1."""

    train: np.ndarray
    val: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.train = np.ascontiguousarray(self.train, dtype=np.int64)
        self.val = np.ascontiguousarray(self.val, dtype=np.int64)


def load_cube(path) -> HyperCube:
    """Read an HSC1 file, rejecting malformed headers, sizes, or values."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than HSC1 header")
    magic, height, width, bands, axis_flag = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if min(height, width, bands) < 1:
        raise FormatError(
            f"{path}: header dimensions must be >= 1, got {height}x{width}x{bands}"
        )
    if axis_flag not in (0, 1):
        raise FormatError(f"{path}: axis flag must be 0 or 1, got {axis_flag}")
    n_axis = bands if axis_flag else 0
    n_data = height * width * bands
    expected = _HEADER.size + 4 * (n_axis + n_data)
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {height}x{width}x{bands} "
            f"(axis={axis_flag}), found {len(raw)}"
        )
    offset = _HEADER.size
    axis = None
    if axis_flag:
        axis = np.frombuffer(raw, dtype="<f4", count=n_axis, offset=offset).copy()
        offset += 4 * n_axis
        if not np.isfinite(axis).all():
            raise FormatError(f"{path}: non-finite axis values")
    data = np.frombuffer(raw, dtype="<f4", count=n_data, offset=offset)
    if not np.isfinite(data).all():
        raise FormatError(f"{path}: non-finite data values")
    data = data.reshape(height, width, bands).copy()
    try:
        return HyperCube(data, axis)
    except ShapeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_cube(cube: HyperCube, path) -> None:
    """Write a cube to disk in HSC1 format; :func:`load_cube` inverts it."""
    axis_flag = 0 if cube.axis is None else 1
    header = _HEADER.pack(MAGIC, cube.height, cube.width, cube.bands, axis_flag)
    with open(path, "wb") as fh:
        fh.write(header)
        if axis_flag:
            fh.write(cube.axis.astype("<f4").tobytes())
        fh.write(cube.data.astype("<f4").tobytes())


def normalize_max(cube: HyperCube) -> HyperCube:
    """Divide the whole cube by its global maximum.

    The maximum of the result is exactly 1.0. The divisor accumulates into
    ``norm_factor``, so re-normalizing an already normalized cube is a true
    identity (the second maximum is 1).
    """
    peak = float(cube.data.max())
    if peak <= 0.0:
        raise DegenerateInputError(
            f"cannot normalize a cube whose maximum is {peak}; need a positive value"
        )
    data = (cube.data.astype(np.float64) / peak).astype(np.float32)
    return HyperCube(
        data,
        None if cube.axis is None else cube.axis.copy(),
        cube.norm_factor * peak,
    )


def find_saturated(cube: HyperCube, threshold: float) -> PixelMask:
    """Flag every pixel whose spectrum reaches ``threshold`` (inclusive)."""
    if not threshold > 0:
        raise PreconditionError(f"saturation threshold must be > 0, got {threshold}")
    return PixelMask((cube.data >= threshold).any(axis=2))


# Saturated-pixel repair draws donors within this Chebyshev radius and
# replaces the flagged spectrum by their average.
REPAIR_RADIUS = 3
REPAIR_DONORS = 4


def repair_saturated(cube: HyperCube, mask: PixelMask, seed: int) -> HyperCube:
    """Replace each flagged pixel's spectrum by the mean of nearby unflagged ones.

    For every flagged pixel, up to ``REPAIR_DONORS`` distinct unflagged pixels
    within Chebyshev radius ``REPAIR_RADIUS`` are chosen with a seeded RNG and
    their spectra averaged element-wise. Unflagged pixels are never modified.
    Deterministic for a given seed.
    """
    if (mask.height, mask.width) != (cube.height, cube.width):
        raise ShapeError(
            f"mask is {mask.height}x{mask.width}, cube is {cube.height}x{cube.width}"
        )
    out = cube.data.copy()
    flagged = mask.mask
    if not flagged.any():
        return HyperCube(out, None if cube.axis is None else cube.axis.copy(),
                         cube.norm_factor)
    rng = np.random.default_rng(seed)
    h, w, r = cube.height, cube.width, REPAIR_RADIUS
    for y, x in np.argwhere(flagged):
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        window = ~flagged[y0:y1, x0:x1]
        donors = np.argwhere(window)
        if donors.shape[0] == 0:
            raise RepairError(
                f"pixel ({y}, {x}) has no unflagged neighbors within radius {r}"
            )
        m = min(REPAIR_DONORS, donors.shape[0])
        picked = donors[rng.choice(donors.shape[0], size=m, replace=False)]
        spectra = cube.data[picked[:, 0] + y0, picked[:, 1] + x0].astype(np.float64)
        out[y, x] = spectra.mean(axis=0).astype(np.float32)
    return HyperCube(out, None if cube.axis is None else cube.axis.copy(),
                     cube.norm_factor)


def split_train_val(n_pixels: int, fraction: float, seed: int) -> SplitIndices:
    """Seeded shuffle of 0..n-1 split into floor(fraction*n) train + rest val."""
    if n_pixels < 2:
        raise PreconditionError(f"need at least 2 pixels to split, got {n_pixels}")
    if not 0.0 < fraction < 1.0:
        raise PreconditionError(f"split fraction must be in (0, 1), got {fraction}")
    # epsilon guards against 0.7 * 10 == 6.999... style float droop
    n_train = int(np.floor(fraction * n_pixels + 1e-9))
    if n_train == 0 or n_train == n_pixels:
        raise DegenerateInputError(
            f"fraction {fraction} leaves an empty train or validation set for n={n_pixels}"
        )
    perm = np.random.default_rng(seed).permutation(n_pixels)
    return SplitIndices(perm[:n_train], perm[n_train:], seed)
