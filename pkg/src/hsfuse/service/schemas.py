"""Pydantic request/response models for the fusion service.

Request fields left unset fall back to preset values (when ``preset`` is
given) and then to the library defaults, mirroring how the CLI resolves a
config file.  Paths are interpreted on the machine running the service.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class SimulateRequest(BaseModel):
    truth: str
    out_dir: str = "."
    preset: str | None = None
    meta: str | None = None
    r: int | None = None
    sigma_v: float | None = None
    sigma_g: float | None = None
    seed: int | None = None
    blur: str | None = None
    blur_sigma: float | None = None
    resp_kind: str | None = None
    pan_band_lo: int | None = None
    pan_band_hi: int | None = None
    weights_file: str | None = None


class SimulateResponse(BaseModel):
    v_path: str
    g_path: str
    meta_path: str
    epsilon: float
    eta: float
    nv: int
    nh: int
    bands: int
    guide_bands: int
    warnings: list[str] = []


class FuseRequest(BaseModel):
    v: str | None = None
    g: str | None = None
    out_dir: str = "."
    preset: str | None = None
    meta: str | None = None
    truth: str | None = None
    r: int | None = None
    sigma_v: float | None = None
    sigma_g: float | None = None
    blur: str | None = None
    blur_sigma: float | None = None
    resp_kind: str | None = None
    pan_band_lo: int | None = None
    pan_band_hi: int | None = None
    weights_file: str | None = None
    band_lo: int | None = None
    band_hi: int | None = None
    omega: float | None = None
    p: int | None = None
    lam: float | None = None
    rho: float | None = None
    radii_mode: str | None = None
    epsilon: float | None = None
    eta: float | None = None
    u_lo: float | None = None
    u_hi: float | None = None
    q_lo: float | None = None
    q_hi: float | None = None
    gamma: str | None = None
    max_iters: int | None = None
    rel_tol: float | None = None
    trace_every: int | None = None
    norm_iters: int | None = None
    norm_seed: int | None = None


class FuseResponse(BaseModel):
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
    final_rel_change: float | None = None
    warnings: list[str] = []


class EvaluateRequest(BaseModel):
    estimate: str
    truth: str
    r: int = 2
    out_dir: str | None = None
    per_band: bool = False


class EvaluateResponse(BaseModel):
    # identical cubes give an infinite PSNR sentinel; keep it as a JSON constant
    model_config = ConfigDict(ser_json_inf_nan="constants")

    psnr_db: float
    sam_deg: float
    ergas: float
    csv_path: str | None = None
    per_band_path: str | None = None


class CheckRequest(BaseModel):
    perturb: str | None = None


class CheckReportItem(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class CheckResponse(BaseModel):
    passed: bool
    checks: list[CheckReportItem]
    failures: list[str]


class HealthResponse(BaseModel):
    status: str
    version: str
