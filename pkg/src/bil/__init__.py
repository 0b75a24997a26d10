"""Periodic spectral toolkit: grids, Littlewood-Paley blocks, Besov norms,
the Leray-projected bilinear operator and a multi-scale force construction."""

from .besov import BesovParams, besov_norm, besov_norm_vector, restricted_besov_norm, scaling_transform
from .construction import (
    ConstructionSchedule,
    build_bn,
    build_cn,
    build_gn,
    certify_schedule,
    desk_scale,
    asymptotic_schedule,
)
from .errors import (
    BilError,
    ConfigurationError,
    DivergenceDetected,
    FieldFormatError,
    InfeasibleSchedule,
    NonConvergence,
    RangeError,
    SmallnessViolated,
    SolverError,
    SupportError,
)
from .grid import Grid, SpectralScalar, SpectralVector, evaluate, from_samples, make_grid, synthesize
from .leray import SolverConfig, SolverReport, bilinear_B, leray_project, picard_solve
from .littlewood_paley import DyadicPartition, build_partition, dyadic_block

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
