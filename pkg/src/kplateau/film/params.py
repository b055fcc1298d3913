from __future__ import annotations

from dataclasses import dataclass, replace


class SolverError(RuntimeError):
    """A film or graph solver failed to produce an admissible result."""


@dataclass(frozen=True)
class SolverParams:
    """Knobs shared by the film solvers and the rod optimizers.

    Parameters
    ----------
    max_iters : int
    gradient_tolerance : float
        Stopping threshold on the scaled gradient norm (mesh descent) or on
        the relative objective decrease (disc solver).
    shrink : float
        Backtracking factor of the line search, in (0, 1).
    edge_min_factor, edge_max_factor : float
        Remeshing thresholds relative to the target edge length.
    remesh_every : int
        Accepted iterations between remeshing passes (0 disables remeshing).
    collapse_ratio : float
        Neck radius, relative to the boundary scale, below which a two-loop
        film counts as collapsing.
    collapse_patience : int
        Consecutive accepted steps below ``collapse_ratio`` that trigger the
        collapse flag.
    slide_boundary : bool
        Let each boundary loop slide along its curve by a common phase.
    seed : int
    max_backtracks : int
    area_tolerance : float
        The mesh solver also stops once the relative area decrease over the
        last ``stagnation_window`` accepted steps falls below this value.
    """

    max_iters: int = 400
    gradient_tolerance: float = 1e-7
    shrink: float = 0.5
    edge_min_factor: float = 0.5
    edge_max_factor: float = 2.0
    remesh_every: int = 25
    collapse_ratio: float = 0.05
    collapse_patience: int = 10
    slide_boundary: bool = False
    seed: int = 0
    max_backtracks: int = 30
    area_tolerance: float = 1e-10
    stagnation_window: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.area_tolerance > 0 or self.stagnation_window < 1:
            raise ValueError("area_tolerance and stagnation_window must be positive")
        if not 0 < self.edge_min_factor < 1 < self.edge_max_factor:
            raise ValueError("need edge_min_factor < 1 < edge_max_factor")

    def replace(self, **kw) -> "SolverParams":
        return replace(self, **kw)
