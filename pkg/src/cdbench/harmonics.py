"""Real spherical harmonics evaluated at unit-sphere points.

Basis is orthonormal with respect to the (unnormalized) surface measure,
ordered degree-major: (l, m) with l = 0..l_max and m = -l..l, so column k
has Laplacian eigenvalue l_k (l_k + 1).
"""
from __future__ import annotations

import numpy as np

try:  # scipy >= 1.15
    from scipy.special import sph_harm_y

    def _complex_y(m: int, l: int, polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
        return sph_harm_y(l, m, polar, azimuth)

except ImportError:  # pragma: no cover - older scipy
    from scipy.special import sph_harm

    def _complex_y(m: int, l: int, polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
        return sph_harm(m, l, azimuth, polar)


def real_basis(points: np.ndarray, l_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (basis (N, (l_max+1)^2), degrees ((l_max+1)^2,)) at unit points."""
    pts = np.asarray(points, dtype=float)
    x, y, z = pts.T
    polar = np.arccos(np.clip(z, -1.0, 1.0))
    azimuth = np.arctan2(y, x)
    cols = []
    degrees = []
    root2 = np.sqrt(2.0)
    for l in range(l_max + 1):
        for m in range(-l, l + 1):
            if m == 0:
                col = np.real(_complex_y(0, l, polar, azimuth))
            elif m > 0:
                col = root2 * (-1.0) ** m * np.real(_complex_y(m, l, polar, azimuth))
            else:
                col = root2 * (-1.0) ** m * np.imag(_complex_y(-m, l, polar, azimuth))
            cols.append(col)
            degrees.append(l)
    return np.array(cols, dtype=float).T.copy(), np.array(degrees, dtype=int)
