"""Coupled rod and film minimisation."""
from .api import (
    DimRedRow,
    KPResult,
    LinkedResult,
    QuasistaticTrace,
    dimensional_reduction_suite,
    elastica_plateau,
    minimize_kp,
    minimize_linked,
    quasistatic_run,
    total_energy,
)
from .engine import InfeasibleStartError
from .problem import (
    TRACE_COLUMNS,
    EnergyBreakdown,
    KPProblem,
    MultiRodProblem,
    OptTrace,
    PenaltyWeights,
    Repulsion,
    TraceRow,
    circle_rod,
)
from .terms import repulsive_energy

__all__ = [
    "DimRedRow", "EnergyBreakdown", "InfeasibleStartError", "KPProblem", "KPResult", "LinkedResult",
    "MultiRodProblem", "OptTrace", "PenaltyWeights", "QuasistaticTrace", "Repulsion", "TRACE_COLUMNS",
    "TraceRow", "circle_rod", "dimensional_reduction_suite", "elastica_plateau", "minimize_kp",
    "minimize_linked", "quasistatic_run", "repulsive_energy", "total_energy",
]
