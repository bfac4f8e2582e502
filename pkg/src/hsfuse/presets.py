"""Named parameter presets for the two experiment families.

Each preset bundles the degradation level, regularization weights and step
sizes for one (scenario, ratio) pair at the scenario's reference guide-noise
level (0.02 for pansharpening, 0.05 for fusion with a multispectral guide).
``*-p1`` variants select the plain-l1 form of the regularizer.
"""

from __future__ import annotations

__all__ = ["PRESETS", "preset_values"]

_PAN_STEPS = {"gamma": "0.005,0.1818", "sigma_v": 0.1, "sigma_g": 0.02}
_FUSE_STEPS = {"gamma": "0.01,0.5"}

PRESETS: dict[str, dict] = {
    "pan-r2": {**_PAN_STEPS, "r": 2, "p": 2, "omega": 0.01, "lam": 0.04, "rho": 1.0},
    "pan-r4": {**_PAN_STEPS, "r": 4, "p": 2, "omega": 0.02, "lam": 0.04, "rho": 1.0},
    "pan-r8": {**_PAN_STEPS, "r": 8, "p": 2, "omega": 0.02, "lam": 0.05, "rho": 1.0},
    "pan-r16": {**_PAN_STEPS, "r": 16, "p": 2, "omega": 0.03, "lam": 0.1, "rho": 1.0},
    "pan-r2-p1": {**_PAN_STEPS, "r": 2, "p": 1, "omega": 0.01, "lam": 0.04, "rho": 1.0},
    "pan-r4-p1": {**_PAN_STEPS, "r": 4, "p": 1, "omega": 0.01, "lam": 0.07, "rho": 1.0},
    "pan-r8-p1": {**_PAN_STEPS, "r": 8, "p": 1, "omega": 0.02, "lam": 0.05, "rho": 1.0},
    "pan-r16-p1": {**_PAN_STEPS, "r": 16, "p": 1, "omega": 0.02, "lam": 0.06, "rho": 1.0},
    "fuse-r2": {**_FUSE_STEPS, "r": 2, "sigma_v": 0.2, "sigma_g": 0.05, "p": 2, "omega": 0.0, "lam": 0.03, "rho": 1.0},
    "fuse-r4": {**_FUSE_STEPS, "r": 4, "sigma_v": 0.2, "sigma_g": 0.05, "p": 2, "omega": 0.0, "lam": 0.07, "rho": 1.0},
    "fuse-r8": {**_FUSE_STEPS, "r": 8, "sigma_v": 0.1, "sigma_g": 0.05, "p": 2, "omega": 0.0, "lam": 0.07, "rho": 1.0},
    "fuse-r16": {**_FUSE_STEPS, "r": 16, "sigma_v": 0.1, "sigma_g": 0.05, "p": 2, "omega": 0.03, "lam": 0.09, "rho": 1.0},
    "fuse-r2-p1": {**_FUSE_STEPS, "r": 2, "sigma_v": 0.2, "sigma_g": 0.05, "p": 1, "omega": 0.0, "lam": 0.03, "rho": 1.0},
    "fuse-r4-p1": {**_FUSE_STEPS, "r": 4, "sigma_v": 0.2, "sigma_g": 0.05, "p": 1, "omega": 0.0, "lam": 0.08, "rho": 1.0},
    "fuse-r8-p1": {**_FUSE_STEPS, "r": 8, "sigma_v": 0.1, "sigma_g": 0.05, "p": 1, "omega": 0.0, "lam": 0.08, "rho": 1.0},
    "fuse-r16-p1": {**_FUSE_STEPS, "r": 16, "sigma_v": 0.1, "sigma_g": 0.05, "p": 1, "omega": 0.01, "lam": 0.1, "rho": 1.0},
}


def preset_values(name: str) -> dict:
    try:
        return dict(PRESETS[name])
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; known presets: {known}") from None
