"""Classical, Gaussian semiclassical and exact dynamics of the two-level Lipkin model."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DomainError,
    MeanPoint,
    ModelParams,
    SemiState,
    WidthPoint,
    complete_on_section,
    h_classical,
    h_semiclassical,
    make_params,
    observables,
)
from .dynamics import (  # noqa: E402
    IntegrationError,
    IntegratorConfig,
    conservation_report,
    integrate,
    section_crossings,
)
from .quantum import build_hamiltonian, diagonalize, evolve_exact, spin_coherent  # noqa: E402
from .analysis import (  # noqa: E402
    confinement_stats,
    convergence_sweep,
    breakdown_sweep,
    delta_approx,
    breakdown_time,
    poincare_portrait,
)

__all__ = [
    "DomainError", "MeanPoint", "ModelParams", "SemiState", "WidthPoint",
    "complete_on_section", "h_classical", "h_semiclassical", "make_params", "observables",
    "IntegrationError", "IntegratorConfig", "conservation_report", "integrate",
    "section_crossings",
    "build_hamiltonian", "diagonalize", "evolve_exact", "spin_coherent",
    "confinement_stats", "convergence_sweep", "breakdown_sweep", "delta_approx",
    "breakdown_time", "poincare_portrait",
]
