"""Closed-form proximity operators and projections.

All maps here are pure functions of their inputs.  The group soft-threshold
works on strided groups: component ``i`` (0-based) belongs to group
``i mod n_groups``, so a group's members sit ``stride`` apart in the flat
vector.  That layout matches stacked difference fields, where the vertical
and horizontal (and spectral) components of one pixel are separated by the
per-field length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GroupLayout",
    "prox_box",
    "prox_l1",
    "prox_group_l12",
    "group_l12_norm",
    "project_l2_ball",
    "prox_conjugate",
]


@dataclass(frozen=True)
class GroupLayout:
    """Strided grouping of a flat vector into ``n_groups`` groups of equal size."""

    n_groups: int
    group_size: int
    stride: int

    def __post_init__(self):
        if self.n_groups < 1 or self.group_size < 1 or self.stride < 1:
            raise ValueError(f"invalid layout {self}")

    def validate(self, length: int) -> None:
        if self.n_groups * self.group_size != length:
            raise ValueError(
                f"layout covers {self.n_groups * self.group_size} components, "
                f"vector has {length}"
            )
        if self.stride * (self.group_size - 1) + self.n_groups > length:
            raise ValueError(f"layout {self} indexes past length {length}")

    def gather(self, x: np.ndarray) -> np.ndarray:
        """View/copy of ``x`` as a (group_size, n_groups) matrix."""
        if self.stride == self.n_groups:
            return x.reshape(self.group_size, self.n_groups)
        idx = (
            np.arange(self.n_groups)[None, :]
            + self.stride * np.arange(self.group_size)[:, None]
        )
        return x[idx]

    def scatter(self, g: np.ndarray, length: int) -> np.ndarray:
        if self.stride == self.n_groups:
            return g.reshape(length)
        out = np.empty(length)
        idx = (
            np.arange(self.n_groups)[None, :]
            + self.stride * np.arange(self.group_size)[:, None]
        )
        out[idx] = g
        return out


def prox_box(x, lo: float, hi: float, gamma: float = 1.0) -> np.ndarray:
    """Componentwise clamp onto [lo, hi]; independent of the step ``gamma``."""
    if not lo < hi:
        raise ValueError(f"box bounds must satisfy lo < hi, got [{lo}, {hi}]")
    return np.clip(np.asarray(x, dtype=np.float64), lo, hi)


def prox_l1(x, gamma: float) -> np.ndarray:
    """Soft thresholding: sgn(x) * max(|x| - gamma, 0)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def prox_group_l12(x, layout: GroupLayout, gamma: float) -> np.ndarray:
    """Group soft thresholding: scale each group by max(1 - gamma/||group||, 0).

    Groups with zero norm map to zero (the prox of a norm at the origin).
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    layout.validate(x.size)
    g = layout.gather(x)
    norms = np.sqrt((g * g).sum(axis=0))
    factor = np.zeros_like(norms)
    nz = norms > 0
    factor[nz] = np.maximum(1.0 - gamma / norms[nz], 0.0)
    return layout.scatter(g * factor[None, :], x.size)


def group_l12_norm(x, layout: GroupLayout) -> float:
    """Mixed l1,2 norm: sum over groups of the group Euclidean norms."""
    x = np.asarray(x, dtype=np.float64)
    layout.validate(x.size)
    g = layout.gather(x)
    return float(np.sqrt((g * g).sum(axis=0)).sum())


def project_l2_ball(x, center, radius: float) -> np.ndarray:
    """Euclidean projection onto the ball of the given center and radius."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if x.shape != center.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {center.shape}")
    d = x - center
    nd = np.linalg.norm(d)
    if nd <= radius:
        return x.copy()
    return center + (radius / nd) * d


def prox_conjugate(
    prox_f: Callable[[np.ndarray, float], np.ndarray], x, gamma: float
) -> np.ndarray:
    """Prox of the convex conjugate via the Moreau decomposition:
    ``x - gamma * prox_f(x / gamma, 1 / gamma)``."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    return x - gamma * prox_f(x / gamma, 1.0 / gamma)
