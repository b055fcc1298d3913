"""Area-minimising films: minimal graphs, disc-type Dirichlet minimisation
and triangle-mesh area descent."""
from ..mesh import SurfaceMesh, area, film_energy
from .curves import ArcCurve
from .disc import (
    DiscParam,
    DiscPlateauResult,
    conformal_defect,
    dirichlet_energy,
    disc_triangulation,
    identity_param,
    map_area,
    solve_disc_plateau,
)
from .graph import GraphDivergence, GraphSolution, solve_minimal_graph
from .infimum import FilmResult, SpanningReport, film_infimum, initial_film, verify_spanning
from .params import SolverError, SolverParams
from .remesh import remesh
from .surface import (
    MeshPlateauResult,
    annulus_mesh,
    area_gradient,
    cone_mesh,
    cotan_laplacian,
    neck_radius,
    solve_mesh_plateau,
    transplant,
)

__all__ = [
    "ArcCurve", "DiscParam", "DiscPlateauResult", "FilmResult", "GraphDivergence", "GraphSolution",
    "MeshPlateauResult", "SolverError", "SolverParams", "SpanningReport", "SurfaceMesh",
    "annulus_mesh", "area", "area_gradient", "cone_mesh", "conformal_defect", "cotan_laplacian",
    "dirichlet_energy", "disc_triangulation", "film_energy", "film_infimum", "identity_param",
    "initial_film", "map_area", "neck_radius", "remesh", "solve_disc_plateau", "solve_mesh_plateau",
    "solve_minimal_graph", "transplant", "verify_spanning",
]
