"""Problem descriptions, energy breakdowns and optimisation traces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..rod import ClampFrame, CrossSection, DensityField, MaterialLaw, RodConfig
from ..topology import SpanningClassSpec


@dataclass(frozen=True)
class PenaltyWeights:
    """Weights of the smooth merit terms.

    ``closure`` and ``angle`` weight the constraint residuals in the merit
    reported alongside the trace; the optimizer restores these constraints
    to ``restore_tol`` after every step.  ``cn`` scales the self-contact
    barrier and ``delta`` the reciprocal barrier keeping the global radius
    of curvature above its lower bound.
    """

    closure: float = 1e3
    angle: float = 1e3
    cn: float = 1.0
    delta: float = 1e-3

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"penalty weight {f.name} must be nonnegative")


@dataclass(frozen=True)
class KPProblem:
    """Single closed rod with an optional spanning film.

    Parameters
    ----------
    rod : RodConfig
        Initial guess; its clamp is fixed.
    section : CrossSection
    material : MaterialLaw
    sigma : float
        Surface tension; the film energy is ``2 sigma area``.
    target_z : int
        Required framing link of the midline with its ``d`` offset.
    target_angle : float
        Required signed angle of ``d(L)`` about ``t(0)`` relative to ``d(0)``.
    knot_thickness : float
        Clearance kept by the knot-class guard; 0 picks half the smaller of
        the section radius and ``delta0``.
    delta0 : float
        Lower bound for the global radius of curvature.
    film_boundary : str
        ``'midline'`` or ``'inner'`` (the film wets the tube surface on the
        side of the midline centroid).
    """

    rod: RodConfig
    section: CrossSection
    material: MaterialLaw = field(default_factory=MaterialLaw)
    sigma: float = 0.0
    target_z: int = 0
    target_angle: float = 0.0
    clamp_fixed: bool = True
    knot_thickness: float = 0.0
    delta0: float = 1e-3
    penalty_weights: PenaltyWeights = field(default_factory=PenaltyWeights)
    restore_tol: float = 1e-10
    n_steps: Optional[int] = None
    film_boundary: str = "midline"
    film_points: int = 64
    spanning: SpanningClassSpec = field(default_factory=SpanningClassSpec)
    check_every: int = 25

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not self.delta0 > 0:
            raise ValueError("delta0 must be positive")
        if self.knot_thickness < 0:
            raise ValueError("knot_thickness must be nonnegative")
        if self.film_boundary not in ("midline", "inner"):
            raise ValueError("film_boundary must be 'midline' or 'inner'")
        if not self.restore_tol > 0:
            raise ValueError("restore_tol must be positive")

    @property
    def length(self) -> float:
        return self.rod.length

    @property
    def n_samples(self) -> int:
        return self.rod.densities.n_samples

    @property
    def steps(self) -> int:
        if self.n_steps is not None:
            return int(self.n_steps)
        return 8 * (self.n_samples - 1)

    @property
    def thickness(self) -> float:
        if self.knot_thickness > 0:
            return self.knot_thickness
        return 0.5 * min(self.section.extent, self.delta0)

    def replace(self, **kw) -> "KPProblem":
        return replace(self, **kw)


@dataclass(frozen=True)
class Repulsion:
    """Repulsive interaction ``h(r) = slope * max(r - epsilon, 0)``."""

    h_epsilon: float
    h_slope: float

    def __post_init__(self):
        if not (self.h_epsilon > 0 and self.h_slope > 0):
            raise ValueError("repulsion needs h_epsilon > 0 and h_slope > 0")


@dataclass(frozen=True)
class MultiRodProblem:
    """Two linked rods; the second rod's clamp (position and frame) is free.

    ``pull`` adds ``pull * |c1 - c2|^2`` between the midline centroids, a
    load that drives the rods into each other (used to probe the overlap
    barrier).
    """

    rods: tuple
    target_eta: int = 0
    repulsion: Optional[Repulsion] = None
    sigma: float = 0.0
    pull: float = 0.0
    overlap_weight: float = 1.0
    spanning: Optional[SpanningClassSpec] = None

    def __post_init__(self):
        if len(self.rods) != 2 or not all(isinstance(r, KPProblem) for r in self.rods):
            raise ValueError("MultiRodProblem needs exactly two KPProblem cores")
        if self.sigma < 0 or self.pull < 0:
            raise ValueError("sigma and pull must be nonnegative")


@dataclass
class EnergyBreakdown:
    e_sh: float = 0.0
    e_g: float = 0.0
    e_ni_flag: bool = True
    e_repulsion: float = 0.0
    film_area: float = math.nan
    e_film: float = 0.0
    closure_pos: float = 0.0
    closure_tan: float = 0.0
    angle: float = 0.0
    link: Optional[int] = None
    link_defect: int = 0
    cn: float = math.nan
    delta_margin: float = math.inf
    knot_ok: bool = True
    extra: float = 0.0
    total: float = 0.0

    @property
    def hard_ok(self) -> bool:
        return self.e_ni_flag and self.link_defect == 0 and self.delta_margin >= 0 and self.knot_ok

    def finalize(self) -> "EnergyBreakdown":
        if self.hard_ok:
            self.total = self.e_sh + self.e_g + self.e_film + self.e_repulsion + self.extra
        else:
            self.total = math.inf
        return self


TRACE_COLUMNS = (
    "iter", "total", "e_sh", "e_g", "e_film", "e_rep", "closure_pos", "closure_tan",
    "angle", "link", "cn", "delta_margin", "step", "accepted",
)


@dataclass
class TraceRow:
    iteration: int
    energy: EnergyBreakdown
    step: float
    accepted: bool
    checks: dict = field(default_factory=dict)


@dataclass
class OptTrace:
    rows: list = field(default_factory=list)
    status: str = "running"

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    @property
    def accepted(self) -> list:
        return [r for r in self.rows if r.accepted]

    def totals(self, accepted_only: bool = True) -> np.ndarray:
        rows = self.accepted if accepted_only else self.rows
        return np.array([r.energy.total for r in rows])

    def is_monotone(self) -> bool:
        t = self.totals()
        return bool(np.all(np.diff(t) <= 0))

    def to_csv(self, path) -> None:
        lines = [",".join(TRACE_COLUMNS)]
        for r in self.rows:
            e = r.energy
            vals = [
                str(r.iteration), _fmt(e.total), _fmt(e.e_sh), _fmt(e.e_g), _fmt(e.e_film),
                _fmt(e.e_repulsion), _fmt(e.closure_pos), _fmt(e.closure_tan), _fmt(e.angle),
                "" if e.link is None else str(e.link), _fmt(e.cn), _fmt(e.delta_margin),
                _fmt(r.step), "1" if r.accepted else "0",
            ]
            lines.append(",".join(vals))
        Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def circle_rod(length: float = 1.0, n_samples: int = 64, clamp: ClampFrame | None = None) -> RodConfig:
    """Planar circle of the given length in the clamp's ``(t, d)`` plane."""
    dens = DensityField.constant(length, n_samples, kappa1=2 * np.pi / length)
    return RodConfig(dens, clamp or ClampFrame())
