"""Two-strain SIS epidemics on patch networks.

Library layout:
  model       domain types, validation, Laplacian assembly, vector field
  spectral    reproduction/invasion numbers, risk sets, spectral thresholds
  equilibria  steady states, Newton solvers, linear stability
  dynamics    adaptive integration, outcome classification, monitors, sweeps
  scenarios   JSON configs and the built-in scenario catalog
  reports     CSV / SVG / JSON emitters
  cli         `patchepi` command-line entry point

The ODE kernel is compiled when the extension is built and falls back to
NumPy otherwise; `patchepi.backend.active_backend()` reports which one is
in use.
"""

from .backend import active_backend, available_backends, use_backend
from .dynamics import (
    IntegrationOptions,
    Outcome,
    Trajectory,
    Verdict,
    classify_outcome,
    integrate,
    sweep_dispersal,
)
from .equilibria import (
    Equilibrium,
    EquilibriumKind,
    StabilityVerdict,
    coexistence_search,
    dfe,
    single_strain_ee,
    single_strain_ee_uniform,
    stability,
)
from .model import (
    Laplacian,
    ModelSpec,
    PatchGraph,
    State,
    StrainParams,
    build_laplacian,
    mean_center,
    rhs,
    total_mass,
    validate,
)
from .scenarios import ScenarioConfig, builtin_scenario, load_config
from .spectral import (
    SpectralReport,
    laplacian_spectrum,
    local_reproduction,
    r0,
    r0_strain,
    risk_sets,
    spectral_report,
)

__version__ = "0.1.0"

__all__ = [
    "IntegrationOptions",
    "Outcome",
    "Trajectory",
    "Verdict",
    "classify_outcome",
    "integrate",
    "sweep_dispersal",
    "Equilibrium",
    "EquilibriumKind",
    "StabilityVerdict",
    "coexistence_search",
    "dfe",
    "single_strain_ee",
    "single_strain_ee_uniform",
    "stability",
    "Laplacian",
    "ModelSpec",
    "PatchGraph",
    "State",
    "StrainParams",
    "build_laplacian",
    "mean_center",
    "rhs",
    "total_mass",
    "validate",
    "ScenarioConfig",
    "builtin_scenario",
    "load_config",
    "SpectralReport",
    "laplacian_spectrum",
    "local_reproduction",
    "r0",
    "r0_strain",
    "risk_sets",
    "spectral_report",
    "active_backend",
    "available_backends",
    "use_backend",
    "__version__",
]
