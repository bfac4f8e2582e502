"""Quality measures against a ground-truth cube: PSNR, SAM and ERGAS.

PSNR here follows the normalized-cube convention
``10 log10(NB / ||u - truth||^2)`` (peak value 1).  SAM is the per-pixel
angle between spectral vectors, reported in degrees; pixels whose spectrum
has zero norm in either image are excluded from the mean and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cube import HsCube

__all__ = ["MetricReport", "SingularBandError", "psnr", "sam", "ergas", "per_band_mse", "metric_report"]


class SingularBandError(ValueError):
    """A truth band has zero mean, so its normalized error is undefined."""


def _check_dims(u: HsCube, truth: HsCube):
    if (u.nv, u.nh, u.b) != (truth.nv, truth.nh, truth.b):
        raise ValueError(
            f"dimension mismatch: ({u.nv}, {u.nh}, {u.b}) vs "
            f"({truth.nv}, {truth.nh}, {truth.b})"
        )


def psnr(u: HsCube, truth: HsCube) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the cubes are identical."""
    _check_dims(u, truth)
    err = float(np.sum((u.data - truth.data) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(u.size / err)


def sam(u: HsCube, truth: HsCube) -> tuple[np.ndarray, float]:
    """Spectral angle per pixel (degrees) and the mean over valid pixels.

    Invalid pixels (zero spectral norm on either side) hold NaN in the
    per-pixel vector and are left out of the mean.
    """
    _check_dims(u, truth)
    n = u.n_pixels
    x = u.data.reshape((n, u.b), order="F")
    t = truth.data.reshape((n, truth.b), order="F")
    nx = np.linalg.norm(x, axis=1)
    nt = np.linalg.norm(t, axis=1)
    valid = (nx > 0) & (nt > 0)
    per_pixel = np.full(n, np.nan)
    dots = np.einsum("ij,ij->i", x[valid], t[valid])
    cosines = np.clip(dots / (nx[valid] * nt[valid]), -1.0, 1.0)
    per_pixel[valid] = np.degrees(np.arccos(cosines))
    mean = float(np.mean(per_pixel[valid])) if valid.any() else math.nan
    return per_pixel, mean


def per_band_mse(u: HsCube, truth: HsCube) -> np.ndarray:
    """Mean squared error per band, length ``b``."""
    _check_dims(u, truth)
    diff = (u.data - truth.data).reshape((u.n_pixels, u.b), order="F")
    return (diff**2).mean(axis=0)


def ergas(u: HsCube, truth: HsCube, r: int) -> float:
    """Relative global dimensionless synthesis error at resolution ratio ``r``."""
    _check_dims(u, truth)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    n = u.n_pixels
    du = (u.data - truth.data).reshape((n, u.b), order="F")
    tb = truth.data.reshape((n, truth.b), order="F")
    means = tb.mean(axis=0)
    if np.any(means == 0):
        band = int(np.flatnonzero(means == 0)[0]) + 1
        raise SingularBandError(f"truth band {band} has zero mean")
    ratios = (du**2).sum(axis=0) / means**2
    return float(100.0 / r * np.sqrt(ratios.mean()))


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    sam_deg: float
    ergas: float
    per_band_mse: np.ndarray
    sam_excluded: int = 0


def metric_report(u: HsCube, truth: HsCube, r: int) -> MetricReport:
    per_pixel, mean = sam(u, truth)
    return MetricReport(
        psnr_db=psnr(u, truth),
        sam_deg=mean,
        ergas=ergas(u, truth, r),
        per_band_mse=per_band_mse(u, truth),
        sam_excluded=int(np.isnan(per_pixel).sum()),
    )
