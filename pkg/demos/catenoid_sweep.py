"""Pull two coaxial unit rings apart and watch the soap band follow the catenoid until it pinches."""
import math

import numpy as np

from kplateau.kp import quasistatic_run
from kplateau.topology import Polyline, SpanningClassSpec


def catenoid_area(h):
    # neck a solves a cosh(h / 2a) = 1 on the stable (larger a) branch
    lo, hi = 0.5522, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if mid * math.cosh(h / (2 * mid)) > 1 else (mid, hi)
    a = 0.5 * (lo + hi)
    return math.pi * a * (h + a * math.sinh(h / a))


def rings(h):
    return [Polyline.circle(1.0, 128), Polyline.circle(1.0, 128, center=(0, 0, h))]


times = np.round(np.concatenate([np.arange(1.0, 1.3, 0.05), np.arange(1.3, 1.36, 0.005)]), 4)
run = quasistatic_run(rings, times, spec=SpanningClassSpec("multi", targets=(1, 1)), n_boundary=48)
for h, area in zip(run.times, run.areas):
    print(f"h = {h:.3f}  area {area:.5f}  closed form {catenoid_area(h):.5f}")
if run.collapse:
    print(f"band collapsed at h = {run.collapse_time:g}")
