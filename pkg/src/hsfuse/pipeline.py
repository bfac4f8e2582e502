"""Command implementations behind the service endpoints and the CLI.

Each runner takes a resolved :class:`~hsfuse.config.ExperimentConfig`, does
the file I/O, and returns a small result record.  Usage problems (missing or
malformed inputs, inconsistent dimensions) raise :class:`UsageError`; the
callers map that onto HTTP 400 / exit code 2.
"""

from __future__ import annotations

import configparser
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, manifest_text
from .cube import (
    GuideImage,
    HsCube,
    HscFormatError,
    load_cube,
    load_guide,
    save_cube,
    save_guide,
)
from .metrics import metric_report
from .operators import (
    LinearOperator,
    SpectralResponse,
    band_select,
    blur,
    diff_spatial,
    diff_spectral,
    downsample,
    guide_lift,
    hsstv_operator,
    identity,
    load_response_csv,
    operator_norm_estimate,
    spectral_response_apply,
    stacked_operator,
)
from .proximal import (
    GroupLayout,
    project_l2_ball,
    prox_box,
    prox_conjugate,
    prox_group_l12,
    prox_l1,
)
from .simulate import DegradationSpec, simulate_observations
from .solver import (
    DivergenceError,
    FusionProblem,
    SolverConfig,
    pds_solve,
    select_step_sizes,
)

__all__ = [
    "UsageError",
    "SimulateResult",
    "FuseResult",
    "EvaluateResult",
    "CheckItem",
    "CheckResult",
    "run_simulate",
    "run_fuse",
    "run_evaluate",
    "run_check",
]


class UsageError(Exception):
    """Bad invocation or unreadable/inconsistent inputs (exit code 2)."""


def _load_cube_checked(path, what: str) -> HsCube:
    try:
        return load_cube(path)
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except (HscFormatError, ValueError) as exc:
        raise UsageError(f"{what}: {exc}") from None


def _load_guide_checked(path, what: str) -> GuideImage:
    try:
        return load_guide(path)
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except (HscFormatError, ValueError) as exc:
        raise UsageError(f"{what}: {exc}") from None


def _build_response(cfg: ExperimentConfig, hs_bands: int) -> SpectralResponse:
    if cfg.resp_kind == "pan-average":
        hi = cfg.pan_band_hi if cfg.pan_band_hi > 0 else None
        try:
            return SpectralResponse.pan_average(hs_bands, cfg.pan_band_lo, hi)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if cfg.resp_kind == "weights-file":
        if not cfg.weights_file:
            raise UsageError("resp_kind=weights-file requires a weights_file path")
        try:
            resp = load_response_csv(cfg.weights_file)
        except OSError as exc:
            raise UsageError(f"cannot read weights file: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"bad weights file {cfg.weights_file}: {exc}") from None
        if resp.hs_bands != hs_bands:
            raise UsageError(
                f"weights file has {resp.hs_bands} columns, cube has {hs_bands} bands"
            )
        return resp
    raise UsageError(f"unknown response kind {cfg.resp_kind!r}")


def _band_range(cfg: ExperimentConfig, resp: SpectralResponse) -> tuple[int, int]:
    if cfg.band_lo > 0 and cfg.band_hi > 0:
        return cfg.band_lo, cfg.band_hi
    return resp.support_range()


@dataclass
class SimulateResult:
    v_path: str
    g_path: str
    meta_path: str
    epsilon: float
    eta: float
    nv: int
    nh: int
    bands: int
    guide_bands: int


def run_simulate(cfg: ExperimentConfig) -> SimulateResult:
    """Degrade the ground-truth cube and write v.hsc, g.hsc and the metadata."""
    if not cfg.truth:
        raise UsageError("simulate requires a ground-truth cube path (truth)")
    truth = _load_cube_checked(cfg.truth, "truth cube")
    resp = _build_response(cfg, truth.b)
    try:
        spec = DegradationSpec(
            r=cfg.r,
            sigma_v=cfg.sigma_v,
            sigma_g=cfg.sigma_g,
            response=resp,
            seed=cfg.seed,
            blur_kernel=cfg.blur,
            blur_sigma=cfg.blur_sigma,
        )
        v, g, eps, eta = simulate_observations(truth, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    os.makedirs(cfg.out_dir, exist_ok=True)
    v_path = os.path.join(cfg.out_dir, "v.hsc")
    g_path = os.path.join(cfg.out_dir, "g.hsc")
    meta_path = cfg.meta or os.path.join(cfg.out_dir, "simulate_meta.txt")
    save_cube(HsCube(v, truth.nv // cfg.r, truth.nh // cfg.r, truth.b), v_path)
    save_guide(GuideImage(g, truth.nv, truth.nh, resp.guide_bands), g_path)
    with open(meta_path, "w") as fh:
        fh.write(
            manifest_text(
                cfg,
                extra={
                    "command": "simulate",
                    "epsilon_oracle": repr(eps),
                    "eta_oracle": repr(eta),
                    "truth_nv": truth.nv,
                    "truth_nh": truth.nh,
                    "truth_bands": truth.b,
                    "guide_bands": resp.guide_bands,
                },
            )
        )
    return SimulateResult(
        v_path=v_path,
        g_path=g_path,
        meta_path=meta_path,
        epsilon=eps,
        eta=eta,
        nv=truth.nv,
        nh=truth.nh,
        bands=truth.b,
        guide_bands=resp.guide_bands,
    )


def _radii_from_meta(path) -> tuple[float, float]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
        return (
            float(parser["result"]["epsilon_oracle"]),
            float(parser["result"]["eta_oracle"]),
        )
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read oracle radii from {path}: {exc}") from None


def _resolve_radii(
    cfg: ExperimentConfig,
    problem_dims: tuple[int, int, int, int],
    v: np.ndarray,
    g: np.ndarray,
    resp: SpectralResponse,
) -> tuple[float, float, str]:
    """Pick (epsilon, eta) per the configured mode; returns mode actually used."""
    nv, nh, bands, r = problem_dims
    if cfg.epsilon is not None and cfg.eta is not None:
        return cfg.epsilon, cfg.eta, "explicit"
    if cfg.radii_mode == "oracle":
        if cfg.meta:
            eps, eta = _radii_from_meta(cfg.meta)
            return eps, eta, "oracle"
        if cfg.truth:
            truth = _load_cube_checked(cfg.truth, "truth cube")
            if (truth.nv, truth.nh, truth.b) != (nv, nh, bands):
                raise UsageError("truth dimensions do not match the observations")
            bl = blur(nv, nh, bands, r, sigma=cfg.blur_sigma, kernel=cfg.blur)
            s = downsample(nv, nh, bands, r)
            resp_op = spectral_response_apply(resp, nv, nh)
            eps = float(np.linalg.norm(s.apply(bl.apply(truth.data)) - v))
            eta = float(np.linalg.norm(resp_op.apply(truth.data) - g))
            return eps, eta, "oracle"
        raise UsageError(
            "radii_mode=oracle needs a simulate metadata file (meta) or the truth cube"
        )
    if cfg.radii_mode == "blind":
        n_lr = nv * nh * bands // (r * r)
        n_g = nv * nh * resp.guide_bands
        return (
            cfg.sigma_v * float(np.sqrt(n_lr)),
            cfg.sigma_g * float(np.sqrt(n_g)),
            "blind",
        )
    raise UsageError(f"unknown radii_mode {cfg.radii_mode!r}")


@dataclass
class FuseResult:
    u_path: str
    q_path: str
    trace_path: str
    manifest_path: str
    status: str
    iterations: int
    gamma1: float
    gamma2: float
    epsilon: float
    eta: float
    radii_mode: str
    wall_time_s: float
    final_rel_change: float | None


def run_fuse(cfg: ExperimentConfig) -> FuseResult:
    """Solve the fusion program for (v, g) and write u.hsc, q.hsc, trace.csv."""
    v_path = cfg.v or os.path.join(cfg.out_dir, "v.hsc")
    g_path = cfg.g or os.path.join(cfg.out_dir, "g.hsc")
    v_img = _load_cube_checked(v_path, "low-resolution cube")
    g_img = _load_guide_checked(g_path, "guide image")

    r = cfg.r
    nv, nh, bands = v_img.nv * r, v_img.nh * r, v_img.b
    if (g_img.nv, g_img.nh) != (nv, nh):
        raise UsageError(
            f"guide is {g_img.nv}x{g_img.nh} but v at ratio {r} implies {nv}x{nh}"
        )
    resp = _build_response(cfg, bands)
    if resp.guide_bands != g_img.bands:
        raise UsageError(
            f"response has {resp.guide_bands} guide bands, guide image has {g_img.bands}"
        )
    eps, eta, radii_mode = _resolve_radii(cfg, (nv, nh, bands, r), v_img.data, g_img.data, resp)

    try:
        problem = FusionProblem.build(
            nv=nv,
            nh=nh,
            bands=bands,
            response=resp,
            r=r,
            omega=cfg.omega,
            p=cfg.p,
            lam=cfg.lam,
            rho=cfg.rho,
            epsilon=eps,
            eta=eta,
            u_bounds=(cfg.u_lo, cfg.u_hi),
            q_bounds=(cfg.q_lo, cfg.q_hi),
            band_range=_band_range(cfg, resp),
            blur_kernel=cfg.blur,
            blur_sigma=cfg.blur_sigma,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if cfg.gamma == "auto":
        l_norm = operator_norm_estimate(
            stacked_operator(problem), iters=cfg.norm_iters, seed=cfg.norm_seed
        )
        gamma1, gamma2 = select_step_sizes(l_norm)
    else:
        try:
            parts = [float(p) for p in cfg.gamma.split(",")]
            gamma1, gamma2 = parts
        except (ValueError, TypeError):
            raise UsageError(
                f"gamma must be 'auto' or 'g1,g2', got {cfg.gamma!r}"
            ) from None

    solver_cfg = SolverConfig(
        gamma1=gamma1,
        gamma2=gamma2,
        max_iters=cfg.max_iters,
        rel_tol=cfg.rel_tol,
        trace_every=cfg.trace_every,
    )

    os.makedirs(cfg.out_dir, exist_ok=True)
    u_path = os.path.join(cfg.out_dir, "u.hsc")
    q_path = os.path.join(cfg.out_dir, "q.hsc")
    trace_path = os.path.join(cfg.out_dir, "trace.csv")
    manifest_path = os.path.join(cfg.out_dir, "fuse_manifest.txt")

    t0 = time.perf_counter()
    try:
        u, q, trace, status = pds_solve(problem, v_img.data, g_img.data, solver_cfg)
    except DivergenceError as exc:
        wall = time.perf_counter() - t0
        exc.trace.write_csv(trace_path)
        _write_fuse_manifest(
            manifest_path, cfg, "diverged", exc.iteration, gamma1, gamma2,
            eps, eta, radii_mode, wall,
        )
        return FuseResult(
            u_path="",
            q_path="",
            trace_path=trace_path,
            manifest_path=manifest_path,
            status="diverged",
            iterations=exc.iteration,
            gamma1=gamma1,
            gamma2=gamma2,
            epsilon=eps,
            eta=eta,
            radii_mode=radii_mode,
            wall_time_s=wall,
            final_rel_change=None,
        )
    wall = time.perf_counter() - t0

    save_cube(u, u_path)
    save_guide(q, q_path)
    trace.write_csv(trace_path)
    iterations = trace.final.iteration if trace.final else 0
    _write_fuse_manifest(
        manifest_path, cfg, status, iterations, gamma1, gamma2,
        eps, eta, radii_mode, wall,
    )
    return FuseResult(
        u_path=u_path,
        q_path=q_path,
        trace_path=trace_path,
        manifest_path=manifest_path,
        status=status,
        iterations=iterations,
        gamma1=gamma1,
        gamma2=gamma2,
        epsilon=eps,
        eta=eta,
        radii_mode=radii_mode,
        wall_time_s=wall,
        final_rel_change=trace.final.rel_change if trace.final else None,
    )


def _write_fuse_manifest(
    path, cfg, status, iterations, gamma1, gamma2, eps, eta, radii_mode, wall
):
    with open(path, "w") as fh:
        fh.write(
            manifest_text(
                cfg,
                extra={
                    "command": "fuse",
                    "status": status,
                    "iterations": iterations,
                    "gamma1_used": repr(gamma1),
                    "gamma2_used": repr(gamma2),
                    "epsilon_used": repr(eps),
                    "eta_used": repr(eta),
                    "radii_mode_used": radii_mode,
                    "wall_time_s": f"{wall:.3f}",
                },
            )
        )


@dataclass
class EvaluateResult:
    psnr_db: float
    sam_deg: float
    ergas: float
    csv_path: str | None
    per_band_path: str | None


def run_evaluate(
    estimate_path,
    truth_path,
    r: int,
    out_dir: str | None = None,
    per_band: bool = False,
) -> EvaluateResult:
    """Compare an estimate against ground truth; optionally write CSV outputs."""
    est = _load_cube_checked(estimate_path, "estimate cube")
    truth = _load_cube_checked(truth_path, "truth cube")
    try:
        report = metric_report(est, truth, r)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    csv_path = per_band_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "metrics.csv")
        with open(csv_path, "w", newline="") as fh:
            fh.write("psnr_db,sam_deg,ergas\n")
            fh.write(f"{report.psnr_db:.6f},{report.sam_deg:.6f},{report.ergas:.6f}\n")
        if per_band:
            per_band_path = os.path.join(out_dir, "per_band_mse.csv")
            with open(per_band_path, "w", newline="") as fh:
                fh.write("band,mse\n")
                for i, m in enumerate(report.per_band_mse, start=1):
                    fh.write(f"{i},{m:.12e}\n")
        with open(os.path.join(out_dir, "evaluate_manifest.txt"), "w") as fh:
            fh.write(
                "[result]\ncommand = evaluate\n"
                f"estimate = {estimate_path}\ntruth = {truth_path}\nr = {r}\n"
                f"per_band = {per_band}\n"
            )
    return EvaluateResult(
        psnr_db=report.psnr_db,
        sam_deg=report.sam_deg,
        ergas=report.ergas,
        csv_path=csv_path,
        per_band_path=per_band_path,
    )


@dataclass
class CheckItem:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class CheckResult:
    passed: bool
    checks: list[CheckItem] = field(default_factory=list)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _maybe_perturb(op: LinearOperator, perturb: str | None) -> LinearOperator:
    if perturb != op.name:
        return op
    orig_adjoint = op.adjoint

    def bad_adjoint(y):
        return orig_adjoint(y) + 1e-3

    return LinearOperator(op.in_dim, op.out_dim, op.apply, bad_adjoint, name=op.name)


def run_check(perturb: str | None = None) -> CheckResult:
    """Self-test battery on seeded small instances (operators, prox, solver wiring).

    ``perturb`` names an operator whose adjoint gets intentionally corrupted,
    so harness tests can confirm that failures are detected and named.
    """
    rng = np.random.default_rng(20240 + 7)
    result = CheckResult(passed=True)

    def add(name, passed, detail=""):
        result.checks.append(CheckItem(name=name, passed=bool(passed), detail=detail))
        if not passed:
            result.passed = False

    nv, nh, b = 6, 6, 4
    resp = SpectralResponse(rng.uniform(0.1, 1.0, size=(2, b)))
    ops = [
        diff_spatial(nv, nh, b),
        diff_spectral(nv, nh, b),
        hsstv_operator(nv, nh, b, 0.05),
        blur(nv, nh, b, 2),
        downsample(nv, nh, b, 2),
        spectral_response_apply(resp, nv, nh),
        band_select(nv, nh, b, 2, 3),
        guide_lift(resp, 1, b, nv, nh),
    ]
    pan = SpectralResponse.pan_average(3)
    small = FusionProblem.build(
        nv=4, nh=4, bands=3, response=pan, r=2,
        omega=0.05, p=2, lam=0.04, rho=1.0, epsilon=0.1, eta=0.1,
        blur_kernel="identity",  # a ratio-2 Gaussian kernel does not fit 4x4
    )
    ops.append(stacked_operator(small))

    # adjoint identity <Ax, y> == <x, A^T y> for every operator
    for op in ops:
        op = _maybe_perturb(op, perturb)
        x = rng.standard_normal(op.in_dim)
        y = rng.standard_normal(op.out_dim)
        lhs = float(op.apply(x) @ y)
        rhs = float(x @ op.adjoint(y))
        tol = 1e-8 * np.linalg.norm(x) * np.linalg.norm(y)
        add(
            f"adjoint:{op.name}",
            abs(lhs - rhs) <= tol,
            f"|<Ax,y> - <x,Aty>| = {abs(lhs - rhs):.3e} (tol {tol:.3e})",
        )

    # linearity and homogeneity
    for op in ops[:3]:
        x = rng.standard_normal(op.in_dim)
        y = rng.standard_normal(op.in_dim)
        lin = op.apply(2.5 * x - 1.5 * y)
        ref = 2.5 * op.apply(x) - 1.5 * op.apply(y)
        scale = max(float(np.abs(ref).max()), 1.0)
        add(
            f"linearity:{op.name}",
            float(np.abs(lin - ref).max()) <= 1e-12 * scale,
            "apply(a x + b y) == a apply(x) + b apply(y)",
        )

    # difference operators annihilate constants
    const = np.full(nv * nh * b, 0.7)
    add(
        "nullspace:diff_spatial",
        float(np.abs(diff_spatial(nv, nh, b).apply(const)).max()) == 0.0,
    )
    add(
        "nullspace:diff_spectral",
        float(np.abs(diff_spectral(nv, nh, b).apply(const)).max()) == 0.0,
    )

    # S S^T = identity on the low-resolution space
    s = downsample(nv, nh, b, 2)
    ylr = rng.standard_normal(s.out_dim)
    add(
        "downsample:SSt-identity",
        float(np.abs(s.apply(s.adjoint(ylr)) - ylr).max()) <= 1e-15,
    )

    # prox optimality against random candidates
    x = rng.standard_normal(40)
    gamma = 0.7
    p1 = prox_l1(x, gamma)
    best = float(gamma * np.abs(p1).sum() + 0.5 * np.sum((p1 - x) ** 2))
    ok = True
    for _ in range(1000):
        cand = p1 + 0.5 * rng.standard_normal(40)
        val = float(gamma * np.abs(cand).sum() + 0.5 * np.sum((cand - x) ** 2))
        if val < best - 1e-12:
            ok = False
            break
    add("prox_l1:optimality", ok, "no random candidate beats the closed form")

    lay = GroupLayout(n_groups=10, group_size=4, stride=10)
    pg = prox_group_l12(x, lay, gamma)

    def gval(z):
        gmat = z.reshape(4, 10)
        return float(
            gamma * np.sqrt((gmat**2).sum(axis=0)).sum() + 0.5 * np.sum((z - x) ** 2)
        )

    best = gval(pg)
    ok = True
    for _ in range(1000):
        cand = pg + 0.5 * rng.standard_normal(40)
        if gval(cand) < best - 1e-12:
            ok = False
            break
    add("prox_group_l12:optimality", ok)

    # Moreau identity through both code paths
    for name, prox in (
        ("l1", prox_l1),
        ("group_l12", lambda z, gm: prox_group_l12(z, lay, gm)),
        ("box", lambda z, gm: prox_box(z, -0.3, 0.8, gm)),
    ):
        z = rng.standard_normal(40)
        gm = 0.9
        # prox_{g f}(z) + g * prox_{f*/g}(z/g) == z
        moreau = float(
            np.abs(prox(z, gm) + gm * prox_conjugate(prox, z / gm, 1.0 / gm) - z).max()
        )
        add(f"moreau:{name}", moreau <= 1e-12, f"residual {moreau:.2e}")

    # nonexpansiveness
    ok = True
    for _ in range(200):
        za = rng.standard_normal(40)
        zb = rng.standard_normal(40)
        for prox in (
            lambda w: prox_l1(w, gamma),
            lambda w: prox_group_l12(w, lay, gamma),
            lambda w: prox_box(w, 0.0, 1.0),
            lambda w: project_l2_ball(w, np.zeros(40), 1.0),
        ):
            if np.linalg.norm(prox(za) - prox(zb)) > np.linalg.norm(za - zb) + 1e-12:
                ok = False
    add("prox:nonexpansive", ok)

    # dense transpose consistency on a tiny instance
    for op in (
        diff_spatial(3, 3, 2),
        diff_spectral(3, 3, 2),
        hsstv_operator(3, 3, 2, 0.05),
        band_select(3, 3, 2, 1, 1),
    ):
        op = _maybe_perturb(op, perturb)
        dense = np.column_stack([op.apply(e) for e in np.eye(op.in_dim)])
        dense_adj = np.column_stack([op.adjoint(e) for e in np.eye(op.out_dim)])
        add(
            f"dense-transpose:{op.name}",
            float(np.abs(dense.T - dense_adj).max()) <= 1e-10,
        )

    # operator norm sanity
    est = operator_norm_estimate(identity(30), iters=10, seed=1)
    add("norm:identity", abs(est - 1.0) <= 1e-10, f"estimate {est!r}")

    return result
