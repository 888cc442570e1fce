"""Odd-dimensional hyperbolic heat kernels, log-convexity checks and sphere-flow monotonicity."""

from .alpha_engine import AlphaPoly, build_alpha, structure_check
from .kernel import (
    KernelEval,
    heat_residual,
    log_kernel,
    margin_rho_form,
    normalization,
    proof_intermediates,
    semigroup_check,
    superconvexity_margin,
)
from .monotonicity import monotonicity_scan, sphere_radius, weighted_volume_centered, weighted_volume_offset
from .radial_basis import build_fl_table, default_table, eval_fl, log_fl
from .report import VerificationReport

__version__ = "0.1.0"

__all__ = [
    "AlphaPoly",
    "KernelEval",
    "VerificationReport",
    "build_alpha",
    "build_fl_table",
    "default_table",
    "eval_fl",
    "heat_residual",
    "log_fl",
    "log_kernel",
    "margin_rho_form",
    "monotonicity_scan",
    "normalization",
    "proof_intermediates",
    "semigroup_check",
    "sphere_radius",
    "structure_check",
    "superconvexity_margin",
    "weighted_volume_centered",
    "weighted_volume_offset",
]
