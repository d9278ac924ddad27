"""2D electrostatic participation-ratio solver for CPW cross-sections."""

from .geometry import CpwGeometry, Material, MaterialTable, REGIONS
from .solver import (
    FieldSolution,
    MeshStats,
    ParticipationResult,
    SolverError,
    q_tls_from_participation,
    solve_cross_section,
)
from .analysis import (
    sweep_metal_thickness,
    sweep_sm_thickness,
    thin_layer_participation,
)

__all__ = [
    "CpwGeometry",
    "Material",
    "MaterialTable",
    "REGIONS",
    "FieldSolution",
    "MeshStats",
    "ParticipationResult",
    "SolverError",
    "q_tls_from_participation",
    "solve_cross_section",
    "sweep_metal_thickness",
    "sweep_sm_thickness",
    "thin_layer_participation",
]
