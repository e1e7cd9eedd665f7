"""Omnidirectional (360-degree) image super-resolution toolkit.

Core ideas: equirectangular rasters are alternately represented as a stack
of gnomonic tangent-plane images for denoising and as a single panorama for
data-consistency correction against a known linear downsampling operator.
"""

__version__ = "0.1.0"

from .correct import GammaConfig, gd_correct, reanchor
from .degrade import LinearDegradation, apply_degradation, apply_pinv, build_degradation
from .denoise import Denoiser, IdentityDenoiser, TvDenoiser, make_denoiser
from .geometry import ErpGrid, SphereCoord, TangentLayout, TangentPlaneSpec, octadecaplex_layout
from .metrics import psnr, ssim, ws_psnr, ws_ssim
from .pipeline import PipelineConfig, RunReport, run_pipeline
from .resample import ResampleConfig, TangentStack, erp_to_tp, round_trip, tp_to_erp

__all__ = [
    "GammaConfig",
    "gd_correct",
    "reanchor",
    "LinearDegradation",
    "apply_degradation",
    "apply_pinv",
    "build_degradation",
    "Denoiser",
    "IdentityDenoiser",
    "TvDenoiser",
    "make_denoiser",
    "ErpGrid",
    "SphereCoord",
    "TangentLayout",
    "TangentPlaneSpec",
    "octadecaplex_layout",
    "psnr",
    "ssim",
    "ws_psnr",
    "ws_ssim",
    "PipelineConfig",
    "RunReport",
    "run_pipeline",
    "ResampleConfig",
    "TangentStack",
    "erp_to_tp",
    "round_trip",
    "tp_to_erp",
]
