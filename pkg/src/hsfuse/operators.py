"""Linear operators of the observation model and the fusion objective.

Every operator is a matched apply/adjoint pair over flat float64 vectors in
the band-sequential column-major layout of :mod:`hsfuse.cube`.  Spatial and
spectral differences use forward differences with a Neumann boundary (the
difference at the trailing row/column/band is zero), so constants are
annihilated.  The blur is a band-wise circular convolution applied in the
frequency domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

if TYPE_CHECKING:
    from .solver import FusionProblem

__all__ = [
    "LinearOperator",
    "SpectralResponse",
    "DegenerateResponseError",
    "identity",
    "diff_spatial",
    "diff_spectral",
    "hsstv_operator",
    "blur",
    "downsample",
    "spectral_response_apply",
    "band_select",
    "guide_lift",
    "stacked_operator",
    "operator_norm_estimate",
    "load_response_csv",
]


class DegenerateResponseError(ValueError):
    """A guide-lift row has zero weight after restriction to the band range."""


class LinearOperator:
    """A linear map with an exact adjoint, acting on flat vectors.

    Instances are immutable after construction and safe to share across
    threads; ``apply`` and ``adjoint`` never mutate their argument.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        apply: Callable[[np.ndarray], np.ndarray],
        adjoint: Callable[[np.ndarray], np.ndarray],
        name: str = "operator",
    ):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._apply = apply
        self._adjoint = adjoint
        self.name = name

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.in_dim,):
            raise ValueError(
                f"{self.name}.apply: expected vector of length {self.in_dim}, "
                f"got shape {x.shape}"
            )
        return self._apply(x)

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.out_dim,):
            raise ValueError(
                f"{self.name}.adjoint: expected vector of length {self.out_dim}, "
                f"got shape {y.shape}"
            )
        return self._adjoint(y)

    def __repr__(self):
        return f"LinearOperator({self.name}, {self.in_dim} -> {self.out_dim})"


def identity(n: int) -> LinearOperator:
    return LinearOperator(n, n, lambda x: x.copy(), lambda y: y.copy(), name="identity")


def _as_cube(x: np.ndarray, nv: int, nh: int, b: int) -> np.ndarray:
    return x.reshape((nv, nh, b), order="F")


def _flat(arr: np.ndarray) -> np.ndarray:
    return arr.ravel(order="F")


def diff_spatial(nv: int, nh: int, b: int) -> LinearOperator:
    """Spatial forward differences, vertical stacked above horizontal (2 NB out)."""
    n = nv * nh * b

    def apply(x):
        a = _as_cube(x, nv, nh, b)
        dv = np.zeros_like(a)
        dv[:-1] = a[1:] - a[:-1]
        dh = np.zeros_like(a)
        dh[:, :-1] = a[:, 1:] - a[:, :-1]
        return np.concatenate([_flat(dv), _flat(dh)])

    def adjoint(y):
        yv = _as_cube(y[:n], nv, nh, b)
        yh = _as_cube(y[n:], nv, nh, b)
        out = np.zeros((nv, nh, b))
        out[:-1] -= yv[:-1]
        out[1:] += yv[:-1]
        out[:, :-1] -= yh[:, :-1]
        out[:, 1:] += yh[:, :-1]
        return _flat(out)

    return LinearOperator(n, 2 * n, apply, adjoint, name="diff_spatial")


def diff_spectral(nv: int, nh: int, b: int) -> LinearOperator:
    """Forward difference along bands; the zero operator when ``b == 1``."""
    n = nv * nh * b

    def apply(x):
        a = _as_cube(x, nv, nh, b)
        d = np.zeros_like(a)
        d[:, :, :-1] = a[:, :, 1:] - a[:, :, :-1]
        return _flat(d)

    def adjoint(y):
        ya = _as_cube(y, nv, nh, b)
        out = np.zeros((nv, nh, b))
        out[:, :, :-1] -= ya[:, :, :-1]
        out[:, :, 1:] += ya[:, :, :-1]
        return _flat(out)

    return LinearOperator(n, n, apply, adjoint, name="diff_spectral")


def hsstv_operator(nv: int, nh: int, b: int, omega: float) -> LinearOperator:
    """The hybrid regularization operator: spatio-spectral differences stacked
    above ``omega`` times the plain spatial differences (4 NB out)."""
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    n = nv * nh * b
    d = diff_spatial(nv, nh, b)
    db = diff_spectral(nv, nh, b)

    def apply(x):
        return np.concatenate([d.apply(db.apply(x)), omega * d.apply(x)])

    def adjoint(y):
        top = d.adjoint(y[: 2 * n])
        bot = d.adjoint(y[2 * n :])
        return db.adjoint(top) + omega * bot

    return LinearOperator(n, 4 * n, apply, adjoint, name="hsstv_operator")


def _gaussian_kernel(r: int, sigma: float) -> np.ndarray:
    offs = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(offs[:, None] ** 2 + offs[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def blur(
    nv: int,
    nh: int,
    b: int,
    r: int,
    sigma: float | None = None,
    kernel: str = "gaussian",
) -> LinearOperator:
    """Band-wise circular convolution with a normalized (2r+1)x(2r+1) kernel.

    The default kernel is an isotropic Gaussian with standard deviation
    ``r / 2`` truncated to the kernel support; ``kernel="identity"`` gives the
    identity map (useful for ratio-1 sanity setups).  Application runs in the
    frequency domain, so the adjoint is multiplication by the conjugate
    transfer function.
    """
    n = nv * nh * b
    if kernel == "identity":
        op = identity(n)
        op.name = "blur"
        return op
    if kernel != "gaussian":
        raise ValueError(f"unknown blur kernel {kernel!r}")
    if r < 1:
        raise ValueError(f"blur radius must be >= 1, got {r}")
    size = 2 * r + 1
    if size > nv or size > nh:
        raise ValueError(
            f"blur kernel {size}x{size} larger than image {nv}x{nh}"
        )
    if sigma is None:
        sigma = r / 2.0
    if sigma <= 0:
        raise ValueError(f"blur sigma must be > 0, got {sigma}")
    k = _gaussian_kernel(r, sigma)
    psf = np.zeros((nv, nh))
    psf[:size, :size] = k
    psf = np.roll(psf, (-r, -r), axis=(0, 1))  # kernel center at the origin
    otf = np.fft.fft2(psf)

    def apply(x):
        a = _as_cube(x, nv, nh, b)
        fa = np.fft.fft2(a, axes=(0, 1))
        return _flat(np.fft.ifft2(fa * otf[:, :, None], axes=(0, 1)).real)

    def adjoint(y):
        a = _as_cube(y, nv, nh, b)
        fa = np.fft.fft2(a, axes=(0, 1))
        return _flat(np.fft.ifft2(fa * np.conj(otf)[:, :, None], axes=(0, 1)).real)

    return LinearOperator(n, n, apply, adjoint, name="blur")


def downsample(nv: int, nh: int, b: int, r: int) -> LinearOperator:
    """Keep the top-left pixel of each r x r block; the adjoint zero-fills."""
    if r < 1:
        raise ValueError(f"downsampling ratio must be >= 1, got {r}")
    if nv % r or nh % r:
        raise ValueError(f"r={r} must divide nv={nv} and nh={nh}")
    n = nv * nh * b
    m = (nv // r) * (nh // r) * b

    def apply(x):
        a = _as_cube(x, nv, nh, b)
        return _flat(a[::r, ::r, :])

    def adjoint(y):
        out = np.zeros((nv, nh, b))
        out[::r, ::r, :] = _as_cube(y, nv // r, nh // r, b)
        return _flat(out)

    return LinearOperator(n, m, apply, adjoint, name="downsample")


@dataclass(frozen=True)
class SpectralResponse:
    """Per-guide-band weights over the HS bands; shape (guide bands, HS bands)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"response matrix must be 2-D, got ndim={m.ndim}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("response entries must be finite and >= 0")
        if np.any((m > 0).sum(axis=1) == 0):
            row = int(np.flatnonzero((m > 0).sum(axis=1) == 0)[0]) + 1
            raise ValueError(f"response row {row} has no nonzero entry")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def guide_bands(self) -> int:
        return self.matrix.shape[0]

    @property
    def hs_bands(self) -> int:
        return self.matrix.shape[1]

    def support_range(self) -> tuple[int, int]:
        """Smallest 1-based contiguous band range covering all nonzero columns."""
        cols = np.flatnonzero((self.matrix > 0).any(axis=0))
        return int(cols[0]) + 1, int(cols[-1]) + 1

    @classmethod
    def pan_average(cls, hs_bands: int, band_lo: int = 1, band_hi: int | None = None):
        """Single-channel response averaging a contiguous "visible" band range.

        The default range is [1, ceil(hs_bands / 2)].
        """
        if band_hi is None or band_hi <= 0:
            band_hi = min(hs_bands, (hs_bands + 1) // 2)
        if not 1 <= band_lo <= band_hi <= hs_bands:
            raise ValueError(f"invalid PAN band range [{band_lo}, {band_hi}]")
        w = np.zeros((1, hs_bands))
        w[0, band_lo - 1 : band_hi] = 1.0 / (band_hi - band_lo + 1)
        return cls(w)


def load_response_csv(path) -> SpectralResponse:
    """Read a spectral-response weights file: CSV, one row per guide band."""
    m = np.loadtxt(path, delimiter=",", ndmin=2)
    return SpectralResponse(m)


def spectral_response_apply(resp: SpectralResponse, nv: int, nh: int) -> LinearOperator:
    """Pixel-wise spectral mixing: guide band j = sum_k resp[j, k] * HS band k."""
    w = resp.matrix
    bg, bh = w.shape
    n = nv * nh * bh
    m = nv * nh * bg

    def apply(x):
        a = _as_cube(x, nv, nh, bh)
        return _flat(np.einsum("jk,vhk->vhj", w, a))

    def adjoint(y):
        g = _as_cube(y, nv, nh, bg)
        return _flat(np.einsum("jk,vhj->vhk", w, g))

    return LinearOperator(n, m, apply, adjoint, name="spectral_response")


def band_select(nv: int, nh: int, b: int, band_lo: int, band_hi: int) -> LinearOperator:
    """Copy the contiguous 1-based band block [band_lo, band_hi]; adjoint zero-fills."""
    if not 1 <= band_lo <= band_hi <= b:
        raise ValueError(f"invalid band range [{band_lo}, {band_hi}] for b={b}")
    n = nv * nh * b
    nb = band_hi - band_lo + 1
    m = nv * nh * nb

    def apply(x):
        a = _as_cube(x, nv, nh, b)
        return _flat(a[:, :, band_lo - 1 : band_hi])

    def adjoint(y):
        out = np.zeros((nv, nh, b))
        out[:, :, band_lo - 1 : band_hi] = _as_cube(y, nv, nh, nb)
        return _flat(out)

    return LinearOperator(n, m, apply, adjoint, name="band_select")


def guide_lift(
    resp: SpectralResponse, band_lo: int, band_hi: int, nv: int, nh: int
) -> LinearOperator:
    """Map a guide image into the HS band block it covers.

    The mixing matrix is the response transposed, restricted to rows
    [band_lo, band_hi], with each row divided by its sum; a zero row after
    restriction is a :class:`DegenerateResponseError`.
    """
    if not 1 <= band_lo <= band_hi <= resp.hs_bands:
        raise ValueError(f"invalid band range [{band_lo}, {band_hi}]")
    t = resp.matrix.T[band_lo - 1 : band_hi]  # (selected bands, guide bands)
    sums = t.sum(axis=1)
    if np.any(sums <= 0):
        band = band_lo + int(np.flatnonzero(sums <= 0)[0])
        raise DegenerateResponseError(
            f"guide lift row for band {band} has zero weight; "
            f"shrink the band range or fix the response"
        )
    w = t / sums[:, None]
    bg = resp.guide_bands
    nb = band_hi - band_lo + 1
    n = nv * nh * bg
    m = nv * nh * nb

    def apply(x):
        g = _as_cube(x, nv, nh, bg)
        return _flat(np.einsum("kj,vhj->vhk", w, g))

    def adjoint(y):
        a = _as_cube(y, nv, nh, nb)
        return _flat(np.einsum("kj,vhk->vhj", w, a))

    return LinearOperator(n, m, apply, adjoint, name="guide_lift")


def stacked_operator(problem: "FusionProblem") -> LinearOperator:
    """The full primal-to-dual map of the fusion program.

    Sends the concatenated ``(u, q)`` to the five dual blocks
    ``(A u, D M_u u - D M q, D q, S B u, q)``; the adjoint distributes each
    block back onto ``u`` and ``q``.
    """
    n_hs = problem.n_hs
    n_guide = problem.n_guide
    a = problem.aomega
    d_blk = problem.d_block
    d_g = problem.d_guide
    m_u = problem.m_u
    m = problem.m_lift
    s = problem.downsamp
    bl = problem.blur_op
    dims = [a.out_dim, d_blk.out_dim, d_g.out_dim, s.out_dim, n_guide]
    splits = np.cumsum(dims)[:-1]
    out_dim = int(sum(dims))

    def apply(x):
        u, q = x[:n_hs], x[n_hs:]
        return np.concatenate(
            [
                a.apply(u),
                d_blk.apply(m_u.apply(u)) - d_blk.apply(m.apply(q)),
                d_g.apply(q),
                s.apply(bl.apply(u)),
                q,
            ]
        )

    def adjoint(y):
        y1, y2, y3, y4, y5 = np.split(y, splits)
        du = a.adjoint(y1) + m_u.adjoint(d_blk.adjoint(y2)) + bl.adjoint(s.adjoint(y4))
        dq = -m.adjoint(d_blk.adjoint(y2)) + d_g.adjoint(y3) + y5
        return np.concatenate([du, dq])

    return LinearOperator(n_hs + n_guide, out_dim, apply, adjoint, name="stacked")


def operator_norm_estimate(op: LinearOperator, iters: int = 50, seed: int = 0) -> float:
    """Estimate the operator norm by power iteration on ``adjoint(apply(.))``.

    Returns the square root of the final Rayleigh quotient; 0 for the zero
    operator.  Deterministic for a fixed seed.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.in_dim)
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0
    x /= nx
    lam = 0.0
    for _ in range(iters):
        z = op.adjoint(op.apply(x))
        lam = float(x @ z)
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        x = z / nz
    return float(np.sqrt(max(lam, 0.0)))
