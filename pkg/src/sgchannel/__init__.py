"""Pseudospectral simulator for the second-grade fluid family on a
periodic channel, with diagnostics for the joint alpha, nu -> 0 limit."""

from .spectral import ChannelGrid, SpectralScalarField, transform_forward, transform_inverse
from .fields import NormReport, StripSpec, VelocityField, velocity_from_stream
from .dynamics import (
    BranchKind,
    FlowState,
    ModelBranch,
    StepControl,
    Trajectory,
    branch_from_params,
    run,
)
from .diagnostics import CorrectorSpec, DiagnosticsRecord, StripRule
from .experiments import RegimeRegion, SweepPlan, SweepRow, classify_regime, run_sweep

__all__ = [
    "ChannelGrid",
    "SpectralScalarField",
    "transform_forward",
    "transform_inverse",
    "NormReport",
    "StripSpec",
    "VelocityField",
    "velocity_from_stream",
    "BranchKind",
    "FlowState",
    "ModelBranch",
    "StepControl",
    "Trajectory",
    "branch_from_params",
    "run",
    "CorrectorSpec",
    "DiagnosticsRecord",
    "StripRule",
    "RegimeRegion",
    "SweepPlan",
    "SweepRow",
    "classify_regime",
    "run_sweep",
]

__version__ = "0.1.0"
