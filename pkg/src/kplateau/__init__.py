"""Closed elastic rods spanned by soap films.

Subpackages
-----------
rod        strain densities, frame reconstruction, tube geometry, energies
topology   polylines, linking numbers, radii of curvature, spanning tests
film       minimal graphs, disc-type and mesh-based least-area films
kp         the coupled rod and film optimizer
"""
from .film import SolverError, SolverParams, film_infimum
from .kp import (
    InfeasibleStartError,
    KPProblem,
    MultiRodProblem,
    dimensional_reduction_suite,
    elastica_plateau,
    minimize_kp,
    minimize_linked,
    quasistatic_run,
    total_energy,
)
from .mesh import SurfaceMesh
from .rod import ClampFrame, CrossSection, DensityField, FramedCurve, MaterialLaw, RodConfig, reconstruct_frame
from .topology import Polyline, SpanningClassSpec

__version__ = "0.1.0"

__all__ = [
    "ClampFrame", "CrossSection", "DensityField", "FramedCurve", "InfeasibleStartError", "KPProblem",
    "MaterialLaw", "MultiRodProblem", "Polyline", "RodConfig", "SolverError", "SolverParams",
    "SpanningClassSpec", "SurfaceMesh", "dimensional_reduction_suite", "elastica_plateau", "film_infimum",
    "minimize_kp", "minimize_linked", "quasistatic_run", "reconstruct_frame", "total_energy",
]
