"""Primal-dual splitting solver for the fusion program.

The program estimates a high-resolution cube ``u`` and a denoised guide ``q``
from a low-resolution cube ``v`` and a noisy guide ``g`` by minimizing

    ||A u||_{1,p} + lam * ||D M_u u - D M q||_{1,2} + rho * ||D q||_{1,2}

subject to ``S B u`` in an epsilon-ball around ``v``, ``q`` in an eta-ball
around ``g``, and box constraints on ``u`` and ``q``.  Each iteration takes a
box-prox primal step against the adjoints of the five dual blocks, then a
dual ascent step at the over-relaxed primal ``2 x+ - x`` followed by the
conjugate prox of each block (Moreau decomposition).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .cube import GuideImage, HsCube
from .operators import (
    LinearOperator,
    SpectralResponse,
    band_select,
    blur,
    diff_spatial,
    downsample,
    guide_lift,
    hsstv_operator,
    spectral_response_apply,
)
from .proximal import GroupLayout, group_l12_norm, project_l2_ball, prox_group_l12, prox_l1

__all__ = [
    "FusionProblem",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "ConvergenceTrace",
    "DivergenceError",
    "hsstv_value",
    "objective_value",
    "select_step_sizes",
    "pds_solve",
]

# Safety inflation applied to the estimated operator norm before step selection.
NORM_INFLATION = 1.01


@dataclass
class FusionProblem:
    """Operators, weights, radii and bounds defining one fusion instance."""

    nv: int
    nh: int
    bands: int
    guide_bands: int
    band_lo: int
    band_hi: int
    r: int
    omega: float
    p: int
    lam: float
    rho: float
    epsilon: float
    eta: float
    u_bounds: tuple[float, float]
    q_bounds: tuple[float, float]
    response: SpectralResponse
    aomega: LinearOperator
    d_block: LinearOperator
    d_guide: LinearOperator
    m_u: LinearOperator
    m_lift: LinearOperator
    downsamp: LinearOperator
    blur_op: LinearOperator

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if self.lam <= 0 or self.rho <= 0:
            raise ValueError("lam and rho must be > 0")
        if self.epsilon < 0 or self.eta < 0:
            raise ValueError("epsilon and eta must be >= 0")
        if not self.u_bounds[0] < self.u_bounds[1]:
            raise ValueError(f"invalid u bounds {self.u_bounds}")
        if not self.q_bounds[0] < self.q_bounds[1]:
            raise ValueError(f"invalid q bounds {self.q_bounds}")

    @property
    def n_pixels(self) -> int:
        return self.nv * self.nh

    @property
    def n_hs(self) -> int:
        return self.nv * self.nh * self.bands

    @property
    def n_guide(self) -> int:
        return self.nv * self.nh * self.guide_bands

    @property
    def n_block(self) -> int:
        return self.nv * self.nh * (self.band_hi - self.band_lo + 1)

    @classmethod
    def build(
        cls,
        nv: int,
        nh: int,
        bands: int,
        response: SpectralResponse,
        r: int,
        omega: float,
        p: int,
        lam: float,
        rho: float,
        epsilon: float,
        eta: float,
        u_bounds: tuple[float, float] = (0.0, 1.0),
        q_bounds: tuple[float, float] = (0.0, 1.0),
        band_range: tuple[int, int] | None = None,
        blur_kernel: str = "gaussian",
        blur_sigma: float | None = None,
    ) -> "FusionProblem":
        """Construct all operators for one instance.

        ``band_range`` defaults to the contiguous support of the response, so
        the edge-similarity term only compares the spectral range the guide
        actually covers.
        """
        if response.hs_bands != bands:
            raise ValueError(
                f"response covers {response.hs_bands} HS bands, cube has {bands}"
            )
        if band_range is None:
            band_range = response.support_range()
        band_lo, band_hi = band_range
        nblk = band_hi - band_lo + 1
        return cls(
            nv=nv,
            nh=nh,
            bands=bands,
            guide_bands=response.guide_bands,
            band_lo=band_lo,
            band_hi=band_hi,
            r=r,
            omega=omega,
            p=p,
            lam=lam,
            rho=rho,
            epsilon=epsilon,
            eta=eta,
            u_bounds=u_bounds,
            q_bounds=q_bounds,
            response=response,
            aomega=hsstv_operator(nv, nh, bands, omega),
            d_block=diff_spatial(nv, nh, nblk),
            d_guide=diff_spatial(nv, nh, response.guide_bands),
            m_u=band_select(nv, nh, bands, band_lo, band_hi),
            m_lift=guide_lift(response, band_lo, band_hi, nv, nh),
            downsamp=downsample(nv, nh, bands, r),
            blur_op=blur(nv, nh, bands, r, sigma=blur_sigma, kernel=blur_kernel),
        )


@dataclass
class SolverConfig:
    gamma1: float
    gamma2: float
    max_iters: int = 10000
    rel_tol: float = 1e-4
    trace_every: int = 10

    def __post_init__(self):
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("step sizes must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")


@dataclass
class SolverState:
    """Primal and dual iterates of the splitting algorithm."""

    u: np.ndarray
    q: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    y4: np.ndarray
    y5: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    rel_change: float
    v_gap: float
    g_gap: float


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    @property
    def final(self) -> TraceRecord | None:
        return self.records[-1] if self.records else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("iter,objective,rel_change,v_gap,g_gap\n")
        for r in self.records:
            buf.write(
                f"{r.iteration},{r.objective:.12e},{r.rel_change:.12e},"
                f"{r.v_gap:.12e},{r.g_gap:.12e}\n"
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


class DivergenceError(RuntimeError):
    """An iterate went non-finite or blew up; carries the partial trace."""

    def __init__(self, iteration: int, trace: ConvergenceTrace, detail: str):
        super().__init__(f"solver diverged at iteration {iteration}: {detail}")
        self.iteration = iteration
        self.trace = trace


def hsstv_value(u, nv: int, nh: int, bands: int, omega: float, p: int) -> float:
    """Value of the hybrid spatio-spectral regularizer at ``u``."""
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    a = hsstv_operator(nv, nh, bands, omega)
    z = a.apply(np.asarray(u, dtype=np.float64))
    n = nv * nh * bands
    if p == 1:
        return float(np.abs(z).sum())
    return group_l12_norm(z, GroupLayout(n_groups=n, group_size=4, stride=n))


def objective_value(u, q, problem: FusionProblem) -> float:
    """Regularization objective (constraints are reported as gaps, not here)."""
    u = np.asarray(u, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    nblk = problem.n_block
    ng = problem.n_guide
    lay2 = GroupLayout(n_groups=nblk, group_size=2, stride=nblk)
    lay3 = GroupLayout(n_groups=ng, group_size=2, stride=ng)
    z1 = problem.aomega.apply(u)
    if problem.p == 1:
        hsstv = float(np.abs(z1).sum())
    else:
        n = problem.n_hs
        hsstv = group_l12_norm(z1, GroupLayout(n_groups=n, group_size=4, stride=n))
    edge = problem.d_block.apply(problem.m_u.apply(u)) - problem.d_block.apply(
        problem.m_lift.apply(q)
    )
    guide_tv = problem.d_guide.apply(q)
    return (
        hsstv
        + problem.lam * group_l12_norm(edge, lay2)
        + problem.rho * group_l12_norm(guide_tv, lay3)
    )


def select_step_sizes(
    l_norm_estimate: float, gamma1: float | None = None
) -> tuple[float, float]:
    """Pick (gamma1, gamma2) with gamma1 * gamma2 * (1.01 * ||L||)^2 = 1.

    The squared condition is the provably convergent one; the estimated norm
    is inflated by 1% to absorb power-iteration error.  With ``gamma1`` left
    unset the steps are balanced (gamma1 = gamma2).
    """
    if l_norm_estimate <= 0:
        raise ValueError(f"operator norm estimate must be > 0, got {l_norm_estimate}")
    bound = (NORM_INFLATION * l_norm_estimate) ** 2
    if gamma1 is None:
        gamma1 = 1.0 / (NORM_INFLATION * l_norm_estimate)
    if gamma1 <= 0:
        raise ValueError(f"gamma1 must be > 0, got {gamma1}")
    return gamma1, 1.0 / (gamma1 * bound)


def _initial_state(problem: FusionProblem, v: np.ndarray, g: np.ndarray) -> SolverState:
    # Warm start: zero-filled upsampling of the observation for u, the noisy
    # guide for q, zeros for every dual block.
    u0 = problem.blur_op.adjoint(problem.downsamp.adjoint(v))
    return SolverState(
        u=u0,
        q=g.copy(),
        y1=np.zeros(problem.aomega.out_dim),
        y2=np.zeros(problem.d_block.out_dim),
        y3=np.zeros(problem.d_guide.out_dim),
        y4=np.zeros(problem.downsamp.out_dim),
        y5=np.zeros(problem.n_guide),
        iteration=0,
    )


def pds_solve(
    problem: FusionProblem,
    v,
    g,
    config: SolverConfig,
    init: SolverState | None = None,
) -> tuple[HsCube, GuideImage, ConvergenceTrace, str]:
    """Run the splitting iteration; returns (u, q, trace, status).

    Status is ``"converged"`` when the relative change of ``u`` drops below
    ``config.rel_tol``, else ``"max_iters"``.  Non-finite iterates or a
    runaway norm raise :class:`DivergenceError` carrying the partial trace.
    """
    v = np.asarray(v, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if v.shape != (problem.downsamp.out_dim,):
        raise ValueError(
            f"v has shape {v.shape}, expected ({problem.downsamp.out_dim},)"
        )
    if g.shape != (problem.n_guide,):
        raise ValueError(f"g has shape {g.shape}, expected ({problem.n_guide},)")

    st = init if init is not None else _initial_state(problem, v, g)
    g1, g2 = config.gamma1, config.gamma2
    lo_u, hi_u = problem.u_bounds
    lo_q, hi_q = problem.q_bounds
    n_hs = problem.n_hs
    lay1 = GroupLayout(n_groups=n_hs, group_size=4, stride=n_hs)
    lay2 = GroupLayout(n_groups=problem.n_block, group_size=2, stride=problem.n_block)
    lay3 = GroupLayout(n_groups=problem.n_guide, group_size=2, stride=problem.n_guide)
    blow_up = 1e6 * np.sqrt(n_hs)

    a = problem.aomega
    d_blk = problem.d_block
    d_g = problem.d_guide
    m_u = problem.m_u
    m = problem.m_lift
    s = problem.downsamp
    bl = problem.blur_op

    trace = ConvergenceTrace()
    u, q = st.u, st.q
    y1, y2, y3, y4, y5 = st.y1, st.y2, st.y3, st.y4, st.y5
    status = "max_iters"
    n = st.iteration

    def record(n, u, q, rel):
        v_gap = max(float(np.linalg.norm(s.apply(bl.apply(u)) - v)) - problem.epsilon, 0.0)
        g_gap = max(float(np.linalg.norm(q - g)) - problem.eta, 0.0)
        trace.append(
            TraceRecord(
                iteration=n,
                objective=objective_value(u, q, problem),
                rel_change=rel,
                v_gap=v_gap,
                g_gap=g_gap,
            )
        )

    for n in range(st.iteration + 1, st.iteration + config.max_iters + 1):
        grad_u = a.adjoint(y1) + m_u.adjoint(d_blk.adjoint(y2)) + bl.adjoint(s.adjoint(y4))
        u_new = np.clip(u - g1 * grad_u, lo_u, hi_u)
        # Note the minus sign on the edge-similarity dual: the q block enters
        # the difference field negated, so its adjoint comes back negated too.
        grad_q = -m.adjoint(d_blk.adjoint(y2)) + d_g.adjoint(y3) + y5
        q_new = np.clip(q - g1 * grad_q, lo_q, hi_q)

        ub = 2.0 * u_new - u
        qb = 2.0 * q_new - q
        y1 = y1 + g2 * a.apply(ub)
        y2 = y2 + g2 * (d_blk.apply(m_u.apply(ub)) - d_blk.apply(m.apply(qb)))
        y3 = y3 + g2 * d_g.apply(qb)
        y4 = y4 + g2 * s.apply(bl.apply(ub))
        y5 = y5 + g2 * qb

        if problem.p == 1:
            y1 = y1 - g2 * prox_l1(y1 / g2, 1.0 / g2)
        else:
            y1 = y1 - g2 * prox_group_l12(y1 / g2, lay1, 1.0 / g2)
        y2 = y2 - g2 * prox_group_l12(y2 / g2, lay2, problem.lam / g2)
        y3 = y3 - g2 * prox_group_l12(y3 / g2, lay3, problem.rho / g2)
        y4 = y4 - g2 * project_l2_ball(y4 / g2, v, problem.epsilon)
        y5 = y5 - g2 * project_l2_ball(y5 / g2, g, problem.eta)

        norm_new = float(np.linalg.norm(u_new))
        if not (
            np.all(np.isfinite(u_new))
            and np.all(np.isfinite(q_new))
            and np.all(np.isfinite(y1))
            and np.all(np.isfinite(y2))
            and np.all(np.isfinite(y3))
            and np.all(np.isfinite(y4))
            and np.all(np.isfinite(y5))
        ):
            raise DivergenceError(n, trace, "non-finite value in an iterate")
        if norm_new > blow_up:
            raise DivergenceError(n, trace, f"||u|| = {norm_new:.3e} exceeded guard")

        diff = float(np.linalg.norm(u - u_new))
        if norm_new > 0:
            rel = diff / norm_new
        else:
            rel = 0.0 if diff == 0 else np.inf
        u, q = u_new, q_new

        # The first iteration runs against all-zero duals, so u may not move
        # at all; the relative-change rule is only meaningful from there on.
        stop = rel < config.rel_tol and n > st.iteration + 1
        done = stop or n == st.iteration + config.max_iters
        if n % config.trace_every == 0 or done:
            record(n, u, q, rel)
        if stop:
            status = "converged"
            break

    st.u, st.q = u, q
    st.y1, st.y2, st.y3, st.y4, st.y5 = y1, y2, y3, y4, y5
    st.iteration = n

    u_cube = HsCube(u, problem.nv, problem.nh, problem.bands)
    q_img = GuideImage(q, problem.nv, problem.nh, problem.guide_bands)
    return u_cube, q_img, trace, status
