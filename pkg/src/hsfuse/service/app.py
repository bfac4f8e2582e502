"""FastAPI application wrapping the fusion pipeline.

Usage problems surface as HTTP 400 with a plain-text detail; solver
divergence and failed self-checks are reported in the response body
(``status`` / ``passed``) so clients can map them onto exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import ExperimentConfig, resolve_config, sweep_warnings
from ..pipeline import UsageError, run_check, run_evaluate, run_fuse, run_simulate
from .schemas import (
    CheckReportItem,
    CheckRequest,
    CheckResponse,
    EvaluateRequest,
    EvaluateResponse,
    FuseRequest,
    FuseResponse,
    HealthResponse,
    SimulateRequest,
    SimulateResponse,
)

_CONFIG_FIELDS = set(ExperimentConfig.__dataclass_fields__) - {"preset"}


def _config_from(req) -> ExperimentConfig:
    overrides = {
        name: getattr(req, name)
        for name in req.model_fields_set
        if name in _CONFIG_FIELDS and getattr(req, name) is not None
    }
    try:
        return resolve_config(preset=getattr(req, "preset", None), overrides=overrides)
    except (KeyError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None


def create_app() -> FastAPI:
    app = FastAPI(title="hsfuse", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        cfg = _config_from(req)
        try:
            res = run_simulate(cfg)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return SimulateResponse(
            v_path=res.v_path,
            g_path=res.g_path,
            meta_path=res.meta_path,
            epsilon=res.epsilon,
            eta=res.eta,
            nv=res.nv,
            nh=res.nh,
            bands=res.bands,
            guide_bands=res.guide_bands,
            warnings=sweep_warnings(cfg),
        )

    @app.post("/fuse", response_model=FuseResponse)
    def fuse(req: FuseRequest):
        cfg = _config_from(req)
        try:
            res = run_fuse(cfg)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return FuseResponse(
            u_path=res.u_path,
            q_path=res.q_path,
            trace_path=res.trace_path,
            manifest_path=res.manifest_path,
            status=res.status,
            iterations=res.iterations,
            gamma1=res.gamma1,
            gamma2=res.gamma2,
            epsilon=res.epsilon,
            eta=res.eta,
            radii_mode=res.radii_mode,
            wall_time_s=res.wall_time_s,
            final_rel_change=res.final_rel_change,
            warnings=sweep_warnings(cfg),
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest):
        try:
            res = run_evaluate(
                req.estimate, req.truth, req.r, out_dir=req.out_dir, per_band=req.per_band
            )
        except UsageError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return EvaluateResponse(
            psnr_db=res.psnr_db,
            sam_deg=res.sam_deg,
            ergas=res.ergas,
            csv_path=res.csv_path,
            per_band_path=res.per_band_path,
        )

    @app.post("/check", response_model=CheckResponse)
    def check(req: CheckRequest):
        res = run_check(perturb=req.perturb)
        return CheckResponse(
            passed=res.passed,
            checks=[
                CheckReportItem(name=c.name, passed=c.passed, detail=c.detail)
                for c in res.checks
            ],
            failures=res.failures,
        )

    return app
