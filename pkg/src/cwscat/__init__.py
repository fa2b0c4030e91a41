"""Recovery of dielectric constant and conductivity from multi-source
backscattering sweeps: forward simulation, one-way data continuation,
log-lift with a source-direction basis expansion, weighted-residual
convex minimization, and coefficient extraction."""

from .basis import BasisSet, build_basis, exp_poly_moments
from .config import ConfigError, PipelineConfig, load_config
from .convexify import (
    CarlemanWeight,
    DescentSchedule,
    InversionSystem,
    MinimizeResult,
    build_system,
    cost_and_gradient,
    h2_norm,
    minimize,
    project_ball,
)
from .extract import (
    ReconstructionResult,
    classify_conductive,
    export_volume,
    extract_coefficients,
    postprocess,
    read_volume,
    reconstruct,
)
from .forward import (
    ForwardSolution,
    add_noise,
    evaluate_scattered,
    incident_field,
    prepare_kernel,
    solve_lippmann_schwinger,
    synthesize_sweep,
)
from .geometry import (
    DEFAULT_CONSTANTS,
    DomainBox,
    Grid3,
    MeasurementPlane,
    MediumModel,
    PhysicalConstants,
    SourceLine,
    add_box_inclusion,
    homogeneous_medium,
    load_medium,
    make_grid,
    save_medium,
    wavenumber_from_frequency,
)
from .lift import (
    CauchyData,
    LiftedField,
    cauchy_data,
    log_ratio,
    project_fourier,
    read_lifted,
    starting_point,
    tail_vectors,
    write_lifted,
)
from .preprocess import (
    PropagationSpec,
    preprocess_sweep,
    propagate_derivative,
    propagate_plane,
    smooth_and_retrieve,
    truncate_field,
)
from .sweepio import SourceSweepData, export_sweep_csv, read_sweep, write_sweep

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "build_basis",
    "exp_poly_moments",
    "ConfigError",
    "PipelineConfig",
    "load_config",
    "CarlemanWeight",
    "DescentSchedule",
    "InversionSystem",
    "MinimizeResult",
    "build_system",
    "cost_and_gradient",
    "h2_norm",
    "minimize",
    "project_ball",
    "ReconstructionResult",
    "classify_conductive",
    "export_volume",
    "extract_coefficients",
    "postprocess",
    "read_volume",
    "reconstruct",
    "ForwardSolution",
    "add_noise",
    "evaluate_scattered",
    "incident_field",
    "prepare_kernel",
    "solve_lippmann_schwinger",
    "synthesize_sweep",
    "DEFAULT_CONSTANTS",
    "DomainBox",
    "Grid3",
    "MeasurementPlane",
    "MediumModel",
    "PhysicalConstants",
    "SourceLine",
    "add_box_inclusion",
    "homogeneous_medium",
    "load_medium",
    "make_grid",
    "save_medium",
    "wavenumber_from_frequency",
    "CauchyData",
    "LiftedField",
    "cauchy_data",
    "log_ratio",
    "project_fourier",
    "read_lifted",
    "starting_point",
    "tail_vectors",
    "write_lifted",
    "PropagationSpec",
    "preprocess_sweep",
    "propagate_derivative",
    "propagate_plane",
    "smooth_and_retrieve",
    "truncate_field",
    "SourceSweepData",
    "export_sweep_csv",
    "read_sweep",
    "write_sweep",
]
