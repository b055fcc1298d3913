"""Relax a wobbly closed rod to the circle, then switch on a weak soap film."""
import numpy as np

from kplateau.kp import KPProblem, minimize_kp
from kplateau.rod import CrossSection, DensityField, MaterialLaw, RodConfig

L, n = 1.0, 64
s = np.linspace(0, L, n)
start = RodConfig(DensityField(L, 2 * np.pi / L + 0.8 * np.cos(4 * np.pi * s), 0.6 * np.sin(6 * np.pi * s), 0 * s))
bending = MaterialLaw(density=lambda k, s: 0.5 * (k[..., 0] ** 2 + k[..., 1] ** 2))

problem = KPProblem(start, CrossSection.disc(0.02), bending)
res = minimize_kp(problem)
print(f"rod only: {res.energy.total:.6f} (circle {2 * np.pi ** 2 / L:.6f}), {len(res.trace.accepted)} accepted steps")

res_film = minimize_kp(problem.replace(rod=res.rod, sigma=1e-2))
print(f"with film: {res_film.energy.total:.6f}, film area {res_film.energy.film_area:.6f}")
print(res_film.checks)
