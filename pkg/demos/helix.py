"""Reconstruct a helix from constant strain and report frame and midline quality."""
import numpy as np

from kplateau.rod import DensityField, RodConfig, closure_residual, frame_orthogonality, reconstruct_frame

L, k1, w = 10.0, 1.0, 0.5
rod = RodConfig(DensityField.constant(L, 11, k1, 0.0, w))
curve = reconstruct_frame(rod, n_steps=2000)

# helix of curvature k1 and torsion w: radius k1/(k1^2+w^2), pitch 2 pi w/(k1^2+w^2)
c = k1 ** 2 + w ** 2
print(f"radius {k1 / c:.6f}  pitch {2 * np.pi * w / c:.6f}")
print(f"orthogonality error {frame_orthogonality(curve):.2e}")
pos, tan = closure_residual(curve)
print(f"end-to-start gap {pos:.4f}, tangent gap {tan:.4f}")
