"""Experiment configuration: defaults, preset/file/override resolution, manifests.

Config files are flat ``key = value`` text with one section per concern
(INI syntax).  Resolution order is defaults < preset < file < explicit
overrides; the fully resolved configuration is echoed into every run
manifest so defaults stay auditable.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .presets import preset_values

__all__ = ["ExperimentConfig", "load_config_file", "resolve_config", "sweep_warnings"]


@dataclass
class ExperimentConfig:
    # paths
    truth: str | None = None
    v: str | None = None
    g: str | None = None
    meta: str | None = None
    out_dir: str = "."
    # degradation
    r: int = 2
    sigma_v: float = 0.1
    sigma_g: float = 0.02
    seed: int = 0
    blur: str = "gaussian"
    blur_sigma: float | None = None
    # response
    resp_kind: str = "pan-average"
    pan_band_lo: int = 1
    pan_band_hi: int = 0  # 0 = automatic: ceil(B / 2)
    weights_file: str | None = None
    band_lo: int = 0  # 0 = automatic: response support range
    band_hi: int = 0
    # problem
    omega: float = 0.01
    p: int = 2
    lam: float = 0.04
    rho: float = 1.0
    radii_mode: str = "oracle"
    epsilon: float | None = None
    eta: float | None = None
    u_lo: float = 0.0
    u_hi: float = 1.0
    q_lo: float = 0.0
    q_hi: float = 1.0
    # solver
    gamma: str = "auto"  # "auto" or "gamma1,gamma2"
    max_iters: int = 10000
    rel_tol: float = 1e-4
    trace_every: int = 10
    norm_iters: int = 50
    norm_seed: int = 0
    # bookkeeping
    preset: str | None = None


# (section, file key) -> attribute; "lambda" is spelled out in files because it
# reads naturally there, while the attribute avoids the Python keyword.
_KEY_MAP: dict[tuple[str, str], str] = {
    ("paths", "truth"): "truth",
    ("paths", "v"): "v",
    ("paths", "g"): "g",
    ("paths", "meta"): "meta",
    ("paths", "out_dir"): "out_dir",
    ("degradation", "r"): "r",
    ("degradation", "sigma_v"): "sigma_v",
    ("degradation", "sigma_g"): "sigma_g",
    ("degradation", "seed"): "seed",
    ("degradation", "blur"): "blur",
    ("degradation", "blur_sigma"): "blur_sigma",
    ("response", "kind"): "resp_kind",
    ("response", "pan_band_lo"): "pan_band_lo",
    ("response", "pan_band_hi"): "pan_band_hi",
    ("response", "weights_file"): "weights_file",
    ("response", "band_lo"): "band_lo",
    ("response", "band_hi"): "band_hi",
    ("problem", "omega"): "omega",
    ("problem", "p"): "p",
    ("problem", "lambda"): "lam",
    ("problem", "rho"): "rho",
    ("problem", "radii_mode"): "radii_mode",
    ("problem", "epsilon"): "epsilon",
    ("problem", "eta"): "eta",
    ("problem", "u_lo"): "u_lo",
    ("problem", "u_hi"): "u_hi",
    ("problem", "q_lo"): "q_lo",
    ("problem", "q_hi"): "q_hi",
    ("solver", "gamma"): "gamma",
    ("solver", "max_iters"): "max_iters",
    ("solver", "rel_tol"): "rel_tol",
    ("solver", "trace_every"): "trace_every",
    ("solver", "norm_iters"): "norm_iters",
    ("solver", "norm_seed"): "norm_seed",
}

_ATTR_TO_SECTION_KEY = {attr: sk for sk, attr in _KEY_MAP.items()}

_INT_FIELDS = {"r", "seed", "pan_band_lo", "pan_band_hi", "band_lo", "band_hi",
               "p", "max_iters", "trace_every", "norm_iters", "norm_seed"}
_FLOAT_FIELDS = {"sigma_v", "sigma_g", "blur_sigma", "omega", "lam", "rho",
                 "epsilon", "eta", "u_lo", "u_hi", "q_lo", "q_hi", "rel_tol"}


def _coerce(attr: str, raw):
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw == "":
            return None
    if attr in _INT_FIELDS:
        return int(raw)
    if attr in _FLOAT_FIELDS:
        return float(raw)
    return str(raw) if isinstance(raw, str) else raw


def load_config_file(path) -> dict:
    """Parse an INI config file into an attribute -> value dict."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    values: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            attr = _KEY_MAP.get((section, key))
            if attr is None:
                raise ValueError(f"{path}: unknown config key [{section}] {key}")
            val = _coerce(attr, raw)
            if val is not None:
                values[attr] = val
    return values


def resolve_config(
    preset: str | None = None,
    file_values: dict | None = None,
    overrides: dict | None = None,
) -> ExperimentConfig:
    """Merge defaults < preset < config file < overrides into one config."""
    cfg = ExperimentConfig()
    layers = []
    if preset:
        layers.append(preset_values(preset))
        cfg.preset = preset
    if file_values:
        layers.append(file_values)
    if overrides:
        layers.append({k: v for k, v in overrides.items() if v is not None})
    valid = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for layer in layers:
        for attr, val in layer.items():
            if attr not in valid:
                raise ValueError(f"unknown config field {attr!r}")
            setattr(cfg, attr, _coerce(attr, val))
    return cfg


def sweep_warnings(cfg: ExperimentConfig) -> list[str]:
    """Soft warnings when weights leave the documented sweep ranges."""
    out = []
    if not 0.0 <= cfg.omega <= 0.1:
        out.append(f"omega={cfg.omega} outside the swept range [0, 0.1]")
    if not 0.01 <= cfg.lam <= 0.1:
        out.append(f"lambda={cfg.lam} outside the swept range [0.01, 0.1]")
    if not 0.5 <= cfg.rho <= 1.5:
        out.append(f"rho={cfg.rho} outside the swept range [0.5, 1.5]")
    return out


def manifest_text(cfg: ExperimentConfig, extra: dict | None = None) -> str:
    """Render the resolved config (plus result entries) as INI text."""
    parser = configparser.ConfigParser()
    if cfg.preset:
        parser["run"] = {"preset": cfg.preset}
    for attr, (section, key) in sorted(
        _ATTR_TO_SECTION_KEY.items(), key=lambda kv: kv[1]
    ):
        val = getattr(cfg, attr)
        if val is None:
            continue
        if not parser.has_section(section):
            parser[section] = {}
        parser[section][key] = str(val)
    if extra:
        parser["result"] = {k: str(v) for k, v in extra.items()}
    import io

    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
