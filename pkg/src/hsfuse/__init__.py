"""hsfuse: hyperspectral image fusion with simultaneous guide denoising.

Core pieces: the cube data model and ``.hsc`` I/O (:mod:`hsfuse.cube`),
linear operators with exact adjoints (:mod:`hsfuse.operators`), proximity
operators (:mod:`hsfuse.proximal`), the primal-dual solver
(:mod:`hsfuse.solver`), the observation simulator (:mod:`hsfuse.simulate`)
and quality metrics (:mod:`hsfuse.metrics`).  A FastAPI service
(:mod:`hsfuse.service`) wraps the pipeline; the ``hsfuse`` CLI is a thin
client of that service.
"""

__version__ = "0.1.0"

from .cube import GuideImage, HsCube, flatten_index, load_cube, rgb_composite, save_cube
from .metrics import MetricReport, ergas, metric_report, psnr, sam
from .operators import LinearOperator, SpectralResponse, operator_norm_estimate
from .simulate import DegradationSpec, make_test_cube, simulate_observations
from .solver import (
    ConvergenceTrace,
    FusionProblem,
    SolverConfig,
    SolverState,
    objective_value,
    pds_solve,
    select_step_sizes,
)

__all__ = [
    "__version__",
    "HsCube",
    "GuideImage",
    "flatten_index",
    "load_cube",
    "save_cube",
    "rgb_composite",
    "LinearOperator",
    "SpectralResponse",
    "operator_norm_estimate",
    "FusionProblem",
    "SolverConfig",
    "SolverState",
    "ConvergenceTrace",
    "pds_solve",
    "objective_value",
    "select_step_sizes",
    "DegradationSpec",
    "simulate_observations",
    "make_test_cube",
    "MetricReport",
    "psnr",
    "sam",
    "ergas",
    "metric_report",
]
