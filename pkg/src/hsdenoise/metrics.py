"""Image- and spectrum-quality metrics: local SNR, PSNR, MSE, baselines.

Conventions, fixed package-wide:

* SNR of a neighborhood is 20*log10(mean/std) in dB, computed over the disk
  of pixels within Euclidean radius ``radius`` (clipped at image borders),
  with the *sample* standard deviation. Degenerate neighborhoods are capped:
  +99 dB when std is zero with a positive mean, -99 dB when the mean is not
  positive. All dB outputs are clipped to [-99, +99].
* Region statistics (mean +/- std over a mask) use the population standard
  deviation and exclude capped pixels unless every pixel is capped.
* PSNR is 20*log10(peak / RMSE); the vector form takes the peak from its
  reference vector, the cube form uses the reference cube's global peak for
  every pixel (matching image-style reporting where one peak normalizes the
  whole dataset). Identical inputs cap at +99 dB.
* The moving-average baseline is a centered boxcar whose window shrinks at
  the edges (no zero padding). Even kernels place the extra tap on the right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import HyperCube
from .errors import DegenerateInputError, PreconditionError, ShapeError

__all__ = [
    "DB_CAP",
    "MetricsReport",
    "evaluate_denoising",
    "local_snr_map",
    "region_snr",
    "psnr",
    "psnr_cube",
    "mse",
    "mse_cube",
    "moving_average",
    "moving_average_cube",
    "line_profile",
]

DB_CAP = 99.0


def _disk_offsets(radius: int) -> list[tuple[int, int]]:
    r = int(radius)
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
            if dy * dy + dx * dx <= r * r]


def local_snr_map(image: np.ndarray, radius: int = 5) -> np.ndarray:
    """Per-pixel SNR (dB) over the border-clipped disk neighborhood."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError("image slice must be 2-D")
    if radius < 1:
        raise PreconditionError(f"radius must be >= 1, got {radius}")
    if not np.isfinite(image).all():
        raise PreconditionError("image must be finite")
    h, w = image.shape
    r = int(radius)
    padded = np.full((h + 2 * r, w + 2 * r), np.nan)
    padded[r : r + h, r : r + w] = image
    stack = np.stack([padded[r + dy : r + dy + h, r + dx : r + dx + w]
                      for dy, dx in _disk_offsets(r)])
    count = (~np.isnan(stack)).sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(stack, axis=0)
        var = np.nansum((stack - mean) ** 2, axis=0)
    std = np.sqrt(np.divide(var, count - 1, out=np.zeros_like(var),
                            where=count > 1))
    out = np.full((h, w), -DB_CAP)
    zero_std = std == 0
    out[zero_std & (mean > 0)] = DB_CAP
    ok = ~zero_std & (mean > 0)
    with np.errstate(divide="ignore"):
        out[ok] = 20.0 * np.log10(mean[ok] / std[ok])
    return np.clip(out, -DB_CAP, DB_CAP)


def region_snr(image: np.ndarray, mask: np.ndarray,
               radius: int = 5) -> tuple[float, float]:
    """Mean and population std (dB) of the local SNR map over masked pixels."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != np.asarray(image).shape:
        raise ShapeError(f"mask shape {mask.shape} does not match image")
    if not mask.any():
        raise PreconditionError("region mask is empty")
    values = local_snr_map(image, radius)[mask]
    uncapped = values[np.abs(values) < DB_CAP]
    if uncapped.size == 0:
        uncapped = values  # everything capped: report the caps themselves
    return float(uncapped.mean()), float(uncapped.std())


def psnr(test, reference) -> float:
    """Peak signal-to-noise ratio of ``test`` against a reference vector."""
    test = np.asarray(test, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if test.shape != reference.shape:
        raise ShapeError(f"shape mismatch {test.shape} vs {reference.shape}")
    rmse = float(np.sqrt(np.mean((test - reference) ** 2)))
    if rmse == 0.0:
        return DB_CAP
    peak = float(reference.max())
    if peak <= 0:
        raise DegenerateInputError("reference has no positive peak")
    return float(np.clip(20.0 * np.log10(peak / rmse), -DB_CAP, DB_CAP))


def mse(a, b) -> float:
    """Mean squared difference of two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def _check_cubes(test: HyperCube, reference: HyperCube):
    if test.data.shape != reference.data.shape:
        raise ShapeError(
            f"cube shapes differ: {test.data.shape} vs {reference.data.shape}"
        )


def psnr_cube(test: HyperCube, reference: HyperCube):
    """Per-pixel spectral PSNR against the reference cube's global peak.

    Returns (mean_db, std_db, per-pixel map); std is the population std.
    """
    _check_cubes(test, reference)
    peak = float(reference.data.max())
    if peak <= 0:
        raise DegenerateInputError("reference cube has no positive peak")
    diff = test.spectra().astype(np.float64) - reference.spectra().astype(np.float64)
    rmse = np.sqrt((diff * diff).mean(axis=1))
    values = np.full(rmse.shape, DB_CAP)
    nz = rmse > 0
    values[nz] = np.clip(20.0 * np.log10(peak / rmse[nz]), -DB_CAP, DB_CAP)
    return (float(values.mean()), float(values.std()),
            values.reshape(test.height, test.width))


def mse_cube(test: HyperCube, reference: HyperCube):
    """Per-pixel spectral MSE; returns (mean, std, per-pixel map)."""
    _check_cubes(test, reference)
    diff = test.spectra().astype(np.float64) - reference.spectra().astype(np.float64)
    values = (diff * diff).mean(axis=1)
    return (float(values.mean()), float(values.std()),
            values.reshape(test.height, test.width))


def moving_average(spectrum, kernel: int = 10) -> np.ndarray:
    """Centered boxcar smoothing with edge-shrunk windows; length preserved."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    if spectrum.ndim != 1:
        raise ShapeError("spectrum must be 1-D")
    if kernel < 1:
        raise PreconditionError(f"kernel must be >= 1, got {kernel}")
    return _boxcar(spectrum[None], kernel)[0]


def moving_average_cube(cube: HyperCube, kernel: int = 10) -> HyperCube:
    """Apply the boxcar baseline to every pixel spectrum of a cube."""
    if kernel < 1:
        raise PreconditionError(f"kernel must be >= 1, got {kernel}")
    smoothed = _boxcar(cube.spectra().astype(np.float64), kernel)
    return HyperCube(
        smoothed.astype(np.float32).reshape(cube.data.shape),
        None if cube.axis is None else cube.axis.copy(),
        cube.norm_factor,
    )


def _boxcar(rows: np.ndarray, kernel: int) -> np.ndarray:
    """Edge-shrunk centered boxcar over the last axis of an (N, B) array."""
    n, b = rows.shape
    lo = -((kernel - 1) // 2)
    hi = kernel // 2  # window [t+lo, t+hi]; even kernels lean right
    padded = np.full((n, b + kernel), np.nan)
    left = -lo
    padded[:, left : left + b] = rows
    stack = np.stack([padded[:, left + d : left + d + b] for d in range(lo, hi + 1)])
    with np.errstate(invalid="ignore"):
        return np.nanmean(stack, axis=0)


@dataclass
class MetricsReport:
    """Bundled evaluation of one cube against a reference.

    All dB values are capped to [-99, +99]; region stats are present only
    when a mask was supplied, the residual spectrum only when a pixel was
    named.
    """

    psnr_db: float
    psnr_std_db: float
    mse: float
    mse_std: float
    snr_map: np.ndarray | None = None                 # (H, W) dB of one band
    region_stats: dict[str, tuple[float, float]] | None = None
    residual_spectrum: np.ndarray | None = None

    def __post_init__(self):
        if self.mse < 0:
            raise PreconditionError("mse cannot be negative")
        if self.snr_map is not None and not np.isfinite(self.snr_map).all():
            raise PreconditionError("snr map must be finite after capping")


def evaluate_denoising(test: HyperCube, reference: HyperCube, band: int | None = None,
                       masks: dict[str, np.ndarray] | None = None,
                       residual_pixel: tuple[int, int] | None = None,
                       radius: int = 5) -> MetricsReport:
    """One-call summary: spectral PSNR/MSE plus optional spatial SNR views.

    ``band`` selects the slice for the SNR map (and region stats over
    ``masks``); ``residual_pixel`` adds that pixel's test-minus-reference
    spectrum.
    """
    psnr_db, psnr_std, _ = psnr_cube(test, reference)
    mse_mean, mse_std, _ = mse_cube(test, reference)
    snr_map = None
    region_stats = None
    if band is not None:
        if not 0 <= band < test.bands:
            raise PreconditionError(f"band {band} out of range [0, {test.bands})")
        image = test.data[:, :, band].astype(np.float64)
        snr_map = local_snr_map(image, radius)
        if masks:
            region_stats = {name: region_snr(image, mask, radius)
                            for name, mask in masks.items()}
    residual = None
    if residual_pixel is not None:
        y, x = residual_pixel
        residual = (test.data[y, x].astype(np.float64)
                    - reference.data[y, x].astype(np.float64))
    return MetricsReport(psnr_db, psnr_std, mse_mean, mse_std,
                         snr_map, region_stats, residual)


def line_profile(image: np.ndarray, row: int, col_start: int, col_end: int):
    """Pixel values along a row segment (inclusive ends).

    Returns (column indices, values).
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeError("image slice must be 2-D")
    h, w = image.shape
    if not (0 <= row < h and 0 <= col_start <= col_end < w):
        raise PreconditionError(
            f"profile row={row}, cols=[{col_start}, {col_end}] out of range "
            f"for {h}x{w} image"
        )
    cols = np.arange(col_start, col_end + 1)
    return cols, image[row, cols].astype(np.float64)
