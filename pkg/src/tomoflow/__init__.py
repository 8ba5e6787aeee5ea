"""Gated tomographic reconstruction with joint motion estimation.

The package reconstructs a single template image together with the
time-dependent velocity field whose flow deforms it into every gate of a
gated parallel-beam acquisition.  Building blocks: `grid` (sampling and
interpolation), `radon` (projector pair), `deform` (flow recursions),
`kernel` (Gaussian smoothing), `regtv` (smoothed total variation),
`solver` (alternating descent), `sim` (phantoms and noise), `metrics`
(SSIM/PSNR), `cli` (batch pipeline).
"""

from .grid import (
    Grid2,
    Image,
    TimeGrid,
    VectorField2,
    VelocityFieldSeries,
    image_inner,
    image_norm,
)
from .radon import (
    GatedGeometry,
    ParallelBeamGeometry,
    Sinogram,
    radon_adjoint,
    radon_forward,
)
from .deform import (
    EtaTable,
    WarpState,
    integrate_flow_map,
    pull_back_eta,
    push_forward_template,
)
from .kernel import GaussianKernel, apply_K
from .regtv import tv_gradient, tv_value
from .sim import NoiseSpec, PhantomSpec, add_noise, make_phantom, simulate_data
from .solver import (
    JointState,
    RunConfig,
    SolverAbort,
    alternate,
    objective_joint,
    static_tv_reconstruct,
)
from .metrics import psnr, ssim

__version__ = "0.1.0"

__all__ = [
    "Grid2",
    "Image",
    "TimeGrid",
    "VectorField2",
    "VelocityFieldSeries",
    "image_inner",
    "image_norm",
    "GatedGeometry",
    "ParallelBeamGeometry",
    "Sinogram",
    "radon_adjoint",
    "radon_forward",
    "EtaTable",
    "WarpState",
    "integrate_flow_map",
    "pull_back_eta",
    "push_forward_template",
    "GaussianKernel",
    "apply_K",
    "tv_gradient",
    "tv_value",
    "NoiseSpec",
    "PhantomSpec",
    "add_noise",
    "make_phantom",
    "simulate_data",
    "JointState",
    "RunConfig",
    "SolverAbort",
    "alternate",
    "objective_joint",
    "static_tv_reconstruct",
    "psnr",
    "ssim",
    "__version__",
]
