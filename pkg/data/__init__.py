"""
Data layer for halfspace-kernels.

This package contains the value types shared by every numeric module, the
run-configuration and envelope managers, and CSV/JSON persistence.
"""

from data.config_manager import ConfigManager, EnvelopeRegistry
from data.models import (
    # Enums
    KernelMethod,
    Construction,
    CubeFamily,
    AtomFlavor,
    Verdict,
    EnvelopeKind,
    Provenance,

    # Grids and fields
    BoundaryGrid,
    BoundaryField,
    HalfSpaceField,
    KernelMatrix,

    # Systems and kernels
    EllipticSystem,
    EllipticityReport,
    FundamentalSolution,
    PoissonConstruction,
    DirichletProblem,

    # Maximal operators and spaces
    ConeSpec,
    Weight,
    ApReport,
    YoungFunction,
    Lebesgue,
    WeightedLebesgue,
    Lorentz,
    Orlicz,
    Zygmund,
    VariableExponent,
    WeightedRI,
    Rearrangement,
    Atom,

    # Experiments and configuration
    Envelope,
    ExperimentReport,
    ExperimentConfig,
    RunConfig,
)

__all__ = [
    # Managers
    "ConfigManager",
    "EnvelopeRegistry",

    # Enums
    "KernelMethod",
    "Construction",
    "CubeFamily",
    "AtomFlavor",
    "Verdict",
    "EnvelopeKind",
    "Provenance",

    # Grids and fields
    "BoundaryGrid",
    "BoundaryField",
    "HalfSpaceField",
    "KernelMatrix",

    # Systems and kernels
    "EllipticSystem",
    "EllipticityReport",
    "FundamentalSolution",
    "PoissonConstruction",
    "DirichletProblem",

    # Maximal operators and spaces
    "ConeSpec",
    "Weight",
    "ApReport",
    "YoungFunction",
    "Lebesgue",
    "WeightedLebesgue",
    "Lorentz",
    "Orlicz",
    "Zygmund",
    "VariableExponent",
    "WeightedRI",
    "Rearrangement",
    "Atom",

    # Experiments and configuration
    "Envelope",
    "ExperimentReport",
    "ExperimentConfig",
    "RunConfig",
]
