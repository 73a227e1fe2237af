"""Driven squeezed SSH chains as quantum sensors: numerics and closed forms."""

from .errors import (
    ConfigError,
    ConvergenceError,
    InstabilityError,
    NHSenseError,
    NoBreakdown,
    NoEnhancement,
    NotTabulated,
    PoleEncountered,
    SingularMatrixError,
)
from .lattice import (
    Block,
    ChainSpec,
    DynamicalMatrix,
    IndexMap,
    Parity,
    SqueezingParams,
    StabilityReason,
    StabilityReport,
    build_quadrature_block,
    build_tilde_h,
    build_unperturbed,
    check_stability,
    squeezing_params,
    squeezing_transform,
)
from .perturbation import AssembledSystem, Frame, PertKind, PerturbationSpec, assemble_full, perturbation_block
from .response import DriveSpec, ResponseReport, compute_report, steady_state_moments, time_domain_oracle

__version__ = "0.1.0"
