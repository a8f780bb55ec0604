"""Impulse potential design and verification toolkit."""

from .errors import (
    ImpulseKitError,
    ConfigError,
    GridMismatchError,
    TailClippingError,
    DegenerateDensityError,
    ConvexityError,
    NumericalGuardError,
    ConvergenceError,
    StabilityError,
    MassLeakError,
    SupportEscapeError,
    ResourceGuardError,
)
from .geometry import (
    Grid,
    make_grid,
    Wavefunction,
    DensityField,
    gaussian_packet,
    density_and_phase,
    fidelity,
    overlap,
)
from .schedule import Schedule, make_schedule, balance_integral
from .transportmap import (
    MapSpec,
    ConvexityCertificate,
    builtin_map,
    tabulated_map_1d,
    certify_gradient_of_convex,
    pushforward_density,
    monotone_rearrangement_1d,
    wasserstein2_cost,
)
from .schedule import make_unbalanced_schedule
from .designer import (
    ImpulseDesign,
    PhasePaint,
    OrdinaryImpulse,
    HybridImpulse,
    LocalDesign,
    make_envelope,
    build_global_design,
    design_ordinary,
    design_hybrid,
    design_local_1d,
)
from .quantumsim import (
    ExplicitImpulse,
    PropagationSpec,
    PropagationResult,
    DeviationReport,
    propagate,
    auto_nsteps,
    predicted_deformation,
    apply_phase_paint,
    compare,
)
from .classicalsim import (
    PhasePoint,
    FlowReport,
    LiouvilleReport,
    WavevectorReport,
    integrate_rescaled,
    integrate_ensemble,
    trajectory_samples,
    phase_space_map,
    sample_from_density,
    liouville_check,
    wkb_wavevector_check,
)
from .analysis import (
    ScanCase,
    ScanRow,
    ConvergenceTable,
    run_epsilon_scan,
    l1_density_error,
    fit_slope,
)
from .scenarios import (
    ScenarioConfig,
    ScenarioResult,
    CATALOG_ORDER,
    catalog,
    default_config,
    config_from_mapping,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "ImpulseKitError",
    "ConfigError",
    "GridMismatchError",
    "TailClippingError",
    "DegenerateDensityError",
    "ConvexityError",
    "NumericalGuardError",
    "ConvergenceError",
    "StabilityError",
    "MassLeakError",
    "SupportEscapeError",
    "ResourceGuardError",
    "Grid",
    "make_grid",
    "Wavefunction",
    "DensityField",
    "gaussian_packet",
    "density_and_phase",
    "fidelity",
    "overlap",
    "Schedule",
    "make_schedule",
    "balance_integral",
    "MapSpec",
    "ConvexityCertificate",
    "builtin_map",
    "tabulated_map_1d",
    "certify_gradient_of_convex",
    "pushforward_density",
    "monotone_rearrangement_1d",
    "wasserstein2_cost",
    "make_unbalanced_schedule",
    "ImpulseDesign",
    "PhasePaint",
    "OrdinaryImpulse",
    "HybridImpulse",
    "LocalDesign",
    "make_envelope",
    "build_global_design",
    "design_ordinary",
    "design_hybrid",
    "design_local_1d",
    "ExplicitImpulse",
    "PropagationSpec",
    "PropagationResult",
    "DeviationReport",
    "propagate",
    "auto_nsteps",
    "predicted_deformation",
    "apply_phase_paint",
    "compare",
    "PhasePoint",
    "FlowReport",
    "LiouvilleReport",
    "WavevectorReport",
    "integrate_rescaled",
    "integrate_ensemble",
    "trajectory_samples",
    "phase_space_map",
    "sample_from_density",
    "liouville_check",
    "wkb_wavevector_check",
    "ScanCase",
    "ScanRow",
    "ConvergenceTable",
    "run_epsilon_scan",
    "l1_density_error",
    "fit_slope",
    "ScenarioConfig",
    "ScenarioResult",
    "CATALOG_ORDER",
    "catalog",
    "default_config",
    "config_from_mapping",
    "run_scenario",
    "__version__",
]
