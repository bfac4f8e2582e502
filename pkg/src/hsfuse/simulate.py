"""Observation simulation: degrade a ground-truth cube into (v, g).

The low-resolution cube is ``v = S B u + n_v`` and the guide is
``g = R u + n_g`` with iid Gaussian noise.  Randomness comes from
``numpy.random.default_rng`` (PCG64) via ``standard_normal``, drawing the
``v`` noise first and the ``g`` noise second, so a seed pins the outputs
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import HsCube
from .operators import SpectralResponse, blur, downsample, spectral_response_apply

__all__ = ["DegradationSpec", "simulate_observations", "make_test_cube"]


@dataclass(frozen=True)
class DegradationSpec:
    """Downsampling ratio, noise levels, spectral response and RNG seed."""

    r: int
    sigma_v: float
    sigma_g: float
    response: SpectralResponse
    seed: int = 0
    blur_kernel: str = "gaussian"
    blur_sigma: float | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.sigma_v < 0 or self.sigma_g < 0:
            raise ValueError("noise standard deviations must be >= 0")


def simulate_observations(
    truth: HsCube, spec: DegradationSpec
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Generate (v, g, epsilon_oracle, eta_oracle) from a ground-truth cube.

    The oracle radii are the realized noise norms ``||n_v||`` and ``||n_g||``,
    which are exactly the ball radii that keep the truth feasible.
    """
    if truth.nv % spec.r or truth.nh % spec.r:
        raise ValueError(
            f"r={spec.r} must divide nv={truth.nv} and nh={truth.nh}"
        )
    if spec.response.hs_bands != truth.b:
        raise ValueError(
            f"response covers {spec.response.hs_bands} bands, cube has {truth.b}"
        )
    bl = blur(
        truth.nv, truth.nh, truth.b, spec.r,
        sigma=spec.blur_sigma, kernel=spec.blur_kernel,
    )
    s = downsample(truth.nv, truth.nh, truth.b, spec.r)
    resp_op = spectral_response_apply(spec.response, truth.nv, truth.nh)

    rng = np.random.default_rng(spec.seed)
    clean_v = s.apply(bl.apply(truth.data))
    n_v = spec.sigma_v * rng.standard_normal(clean_v.size)
    clean_g = resp_op.apply(truth.data)
    n_g = spec.sigma_g * rng.standard_normal(clean_g.size)
    v = clean_v + n_v
    g = clean_g + n_g
    return v, g, float(np.linalg.norm(n_v)), float(np.linalg.norm(n_g))


def _tile_size(nv: int, nh: int) -> int:
    return max(min(nv, nh) // 4, 2)


def make_test_cube(nv: int, nh: int, b: int, pattern: str = "blocks", seed: int = 0) -> HsCube:
    """Deterministic synthetic test cube with values in [0, 1].

    Patterns:
      - ``constant``: every sample is 0.5.
      - ``blocks``: piecewise-constant square tiles (side ``max(min(nv, nh) // 4, 2)``)
        with a distinct level per tile, modulated by a smooth positive
        per-band curve, so spatial differences are nonzero exactly on tile
        boundaries.
      - ``textured``: ``blocks`` plus a small smooth sinusoidal texture.
    """
    if nv < 1 or nh < 1 or b < 1:
        raise ValueError(f"dimensions must be >= 1, got ({nv}, {nh}, {b})")
    if pattern == "constant":
        return HsCube.from_array(np.full((nv, nh, b), 0.5))
    if pattern not in ("blocks", "textured"):
        raise ValueError(f"unknown pattern {pattern!r}")

    t = _tile_size(nv, nh)
    rng = np.random.default_rng(seed)
    ntv = -(-nv // t)
    nth = -(-nh // t)
    levels = rng.uniform(0.15, 0.95, size=(ntv, nth))
    rows = np.arange(nv) // t
    cols = np.arange(nh) // t
    plane = levels[rows[:, None], cols[None, :]]
    # Smooth, strictly positive spectrum keeps tile contrasts alive in every band.
    w = 0.6 + 0.4 * np.cos(np.pi * np.arange(b) / max(b - 1, 1))
    arr = plane[:, :, None] * w[None, None, :]
    if pattern == "textured":
        yy = np.arange(nv)[:, None, None]
        xx = np.arange(nh)[None, :, None]
        kk = np.arange(b)[None, None, :]
        arr = arr + 0.02 * np.sin(2 * np.pi * (yy / nv + xx / nh + kk / b))
    return HsCube.from_array(np.clip(arr, 0.0, 1.0))
