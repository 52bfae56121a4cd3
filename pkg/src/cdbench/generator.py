"""Weighted diffusion generators L = Laplacian + drift on model spaces.

The operator is assembled in divergence form from symmetric edge
conductances ``c_ij`` and node weights ``w_i``::

    (L f)_i = (1/w_i) * sum_j c_ij (f_j - f_i)

which is exactly symmetric in L^2(mu) for the discrete measure ``mu({i}) =
w_i`` and conservative (L 1 = 0) by construction.  On 1D grids the
conductances are second-order central-difference face weights with the
geometric mean of the node densities ``exp(V)`` at the faces; on the sphere
they are cotangent weights of the icosphere mesh.

The square field operators use the algebraic definitions

    Gamma(f, g)  = (L(fg) - f Lg - g Lf) / 2
    Gamma2(f)    = (L Gamma(f, f)) / 2 - Gamma(f, Lf)

so that all chain-rule identities used by the semigroup checks hold exactly
for the discrete operator, not just up to discretization error.

A ``spectral`` backend is available on the flat circle and the round
sphere (zero potential).  On the circle it applies the exact continuum
symbol -k^2 per Fourier mode.  On the sphere it expands through real
spherical harmonics up to ``l_max``: analysis solves the weighted
least-squares system with the discrete Gram matrix, so any function that
is exactly a combination of resolved harmonics at the nodes is
differentiated without grid error, independent of quadrature accuracy.
The price is that the sphere spectral operator is self-adjoint only up to
the Gram quadrature defect; use the default ``fd`` backend when exact
discrete symmetry matters more than pointwise accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import linalg, sparse

from . import harmonics, sphere_mesh
from .model_space import ModelSpace

_BACKENDS = ("fd", "spectral")


@dataclass(frozen=True)
class CurvaturePair:
    """Admissible curvature-dimension parameters.

    ``K`` is the constant in the pointwise bound
    ``Gamma2(f) >= -K * Gamma(f, f) + (L f)**2 / n`` (so negative ``K``
    means a positive curvature lower bound ``-K``), and ``n`` is the
    effective dimension, an extended real in ``[d, inf]``.
    """

    K: float
    n: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.K):
            raise ValueError("curvature constant K must be finite")
        if not self.n >= 1.0:
            raise ValueError(f"effective dimension n must be >= 1, got {self.n}")


class Generator:
    """Divergence-form generator over a :class:`ModelSpace`."""

    def __init__(
        self,
        space: ModelSpace,
        backend: str,
        conduct: Optional[sparse.csr_matrix],
        l_max: Optional[int] = None,
    ):
        self.space = space
        self.backend = backend
        self.conduct = conduct
        self.weights = space.weights
        self.l_max = l_max
        if conduct is not None:
            self._degree = np.asarray(conduct.sum(axis=1)).ravel()
        elif space.kind == "circle":
            n = space.n_nodes
            k = np.arange(n // 2 + 1, dtype=float)
            self._symbol = -(k**2)
        else:  # sphere harmonic projection
            phi, degrees = harmonics.real_basis(space.points, l_max)
            self._phi = phi
            self._eigs = degrees * (degrees + 1.0)
            gram = phi.T @ (space.weights[:, None] * phi)
            self._gram_cho = linalg.cho_factor(gram)
        self._zero_drift = bool(np.all(space.potential == 0.0))

    # -- core operators ----------------------------------------------------

    def analyze(self, f: np.ndarray) -> np.ndarray:
        """Harmonic coefficients of f (sphere spectral backend only).

        Weighted least squares against the node values; exact whenever f is
        a combination of the resolved harmonics.
        """
        f = np.asarray(f, dtype=float)
        w = self.weights if f.ndim == 1 else self.weights[:, None]
        return linalg.cho_solve(self._gram_cho, self._phi.T @ (w * f))

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Evaluate L f (vectorized over trailing columns)."""
        f = np.asarray(f, dtype=float)
        if self.backend == "spectral":
            if self.space.kind == "circle":
                coef = np.fft.rfft(f, axis=0)
                if f.ndim == 1:
                    coef *= self._symbol
                else:
                    coef *= self._symbol[:, None]
                return np.fft.irfft(coef, n=f.shape[0], axis=0)
            coef = self.analyze(f)
            eigs = self._eigs if f.ndim == 1 else self._eigs[:, None]
            return self._phi @ (-eigs * coef)
        w = self.weights if f.ndim == 1 else self.weights[:, None]
        deg = self._degree if f.ndim == 1 else self._degree[:, None]
        return (self.conduct @ f - deg * f) / w

    def gamma(self, f: np.ndarray, g: Optional[np.ndarray] = None) -> np.ndarray:
        """Carre du champ Gamma(f, g) = (L(fg) - f Lg - g Lf) / 2."""
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        if self.backend == "spectral":
            return 0.5 * (self.apply(f * g) - f * self.apply(g) - g * self.apply(f))
        # expanded conductance form: (1/2w_i) sum_j c_ij (f_j - f_i)(g_j - g_i)
        w = self.weights if f.ndim == 1 else self.weights[:, None]
        deg = self._degree if f.ndim == 1 else self._degree[:, None]
        cf = self.conduct @ f
        cg = self.conduct @ g
        cfg = self.conduct @ (f * g)
        return 0.5 * (cfg - f * cg - g * cf + f * g * deg) / w

    def gamma2(self, f: np.ndarray) -> np.ndarray:
        """Iterated square field Gamma2(f) = L Gamma(f,f)/2 - Gamma(f, Lf)."""
        lf = self.apply(f)
        return 0.5 * self.apply(self.gamma(f)) - self.gamma(f, lf)

    def drift_gamma(self, f: np.ndarray) -> np.ndarray:
        """Drift pairing <Z, grad f> = Gamma(V, f) for the drift Z = grad V."""
        if self._zero_drift:
            return np.zeros_like(np.asarray(f, dtype=float))
        v = self.space.potential
        f = np.asarray(f, dtype=float)
        if f.ndim == 2:
            v = np.repeat(v[:, None], f.shape[1], axis=1)
        return self.gamma(v, f)

    @property
    def has_drift(self) -> bool:
        return not self._zero_drift


def assemble_generator(
    space: ModelSpace, backend: str = "fd", l_max: Optional[int] = None
) -> Generator:
    """Build the generator for a space.

    ``backend='spectral'`` is available on the flat circle and the round
    sphere (zero potential); elsewhere use the default divergence-form
    stencil.  ``l_max`` caps the harmonic degree of the sphere spectral
    basis (default 12); it must be at least twice the working band so that
    pointwise products stay resolved.
    """
    if backend not in _BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {_BACKENDS}")
    if backend == "spectral":
        if space.kind == "interval" or np.any(space.potential != 0.0):
            raise ValueError(
                "spectral backend requires the flat circle or round sphere "
                "(zero potential)"
            )
        if space.kind == "circle":
            return Generator(space, "spectral", None)
        l_max = 12 if l_max is None else int(l_max)
        if not 1 <= l_max <= 40:
            raise ValueError(f"l_max must be in [1, 40], got {l_max}")
        if (l_max + 1) ** 2 > space.n_nodes:
            raise ValueError(
                f"l_max={l_max} needs {(l_max + 1) ** 2} basis functions but the "
                f"mesh has only {space.n_nodes} nodes"
            )
        return Generator(space, "spectral", None, l_max=l_max)

    n = space.n_nodes
    v = space.potential
    if space.kind == "circle":
        h = space.h
        face = np.exp(0.5 * (v + np.roll(v, -1))) / h  # face i -> i+1 (wraps)
        rows = np.arange(n)
        cols = (rows + 1) % n
        half = sparse.coo_matrix((face, (rows, cols)), shape=(n, n))
        conduct = (half + half.T).tocsr()
    elif space.kind == "interval":
        h = space.h
        face = np.exp(0.5 * (v[:-1] + v[1:])) / h  # interior faces only
        rows = np.arange(n - 1)
        half = sparse.coo_matrix((face, (rows, rows + 1)), shape=(n, n))
        conduct = (half + half.T).tocsr()
    else:
        cot = sphere_mesh.cotangent_weights(space.points, space.faces)
        if np.any(v != 0.0):
            scale = np.exp(0.5 * v)
            conduct = sparse.csr_matrix(cot.multiply(np.outer(scale, scale)))
        else:
            conduct = cot
    # Dirichlet form scales with the measure; keeps L unchanged when the
    # weights are normalized to total mass one.
    if space.measure_scale != 1.0:
        conduct = sparse.csr_matrix(conduct * space.measure_scale)
    return Generator(space, "fd", conduct)


# -- curvature ------------------------------------------------------------


def cd_margin(
    gen: Generator, f: np.ndarray, K: float, n: float
) -> tuple[np.ndarray, float]:
    """Pointwise curvature-dimension margin field and its masked minimum.

    margin_i = Gamma2(f)_i + K * Gamma(f,f)_i - (L f)_i**2 / n

    Nonnegative (within discretization tolerance) iff the generator
    satisfies the (K, n) condition on the sampled function.
    """
    CurvaturePair(K, n)
    g2 = gen.gamma2(f)
    g1 = gen.gamma(f)
    lf = gen.apply(f)
    field = g2 + K * g1
    if math.isfinite(n):
        field = field - lf**2 / n
    masked = field[gen.space.margin_mask]
    return field, float(masked.min())


def analytic_K(space: ModelSpace, n: float) -> float:
    """Optimal curvature constant of the continuum operator, when available.

    For 1D weighted spaces this is ``sup_x [V'' + V'^2 / (n - 1)]``; for the
    round 2-sphere it is ``-(d - 1) = -1``.  Tabulated potentials carry no
    analytic formula and raise.
    """
    pot = space.spec.potential
    if space.kind == "sphere2":
        if pot.family != "zero":
            raise ValueError("analytic_K on the sphere requires zero potential")
        if n < 2.0:
            raise ValueError("sphere2 requires effective dimension n >= 2")
        return -1.0
    if pot.family == "table":
        raise ValueError("analytic_K is unavailable for tabulated potentials")
    if n < 1.0:
        raise ValueError("effective dimension n must be >= 1")
    if pot.family == "zero":
        return 0.0
    # quadratic: V = c x^2 on [a, b]; V'' = 2c, V' = 2cx
    c = pot.coefficient
    if n == 1.0:
        if c != 0.0:
            raise ValueError("n = 1 requires zero drift (V' == 0)")
        return 0.0
    a, b = space.spec.bounds
    xmax = max(abs(a), abs(b))
    if math.isinf(n):
        return 2.0 * c
    return 2.0 * c + (2.0 * c * xmax) ** 2 / (n - 1.0)


def estimate_K(
    gen: Generator,
    samples: Iterable[np.ndarray],
    n: float,
    floor: Optional[float] = None,
) -> float:
    """Empirical curvature constant from sampled functions.

    Maximizes ``((L f)^2 / n - Gamma2(f)) / Gamma(f, f)`` over samples and
    nodes with ``Gamma > floor`` (default ``1e-8 * max Gamma``), restricted
    to the space's margin mask.  Monotone nonincreasing in ``n`` by
    construction.
    """
    CurvaturePair(0.0, n)
    samples = [np.asarray(f, dtype=float) for f in samples]
    if not samples:
        raise ValueError("estimate_K needs at least one sample function")
    gammas = [gen.gamma(f) for f in samples]
    if floor is None:
        floor = 1e-8 * max(float(g.max()) for g in gammas)
    mask = gen.space.margin_mask
    best = -math.inf
    for f, g1 in zip(samples, gammas):
        g2 = gen.gamma2(f)
        lf = gen.apply(f)
        target = -g2
        if math.isfinite(n):
            target = target + lf**2 / n
        sel = mask & (g1 > floor)
        if np.any(sel):
            best = max(best, float((target[sel] / g1[sel]).max()))
    if not math.isfinite(best):
        raise ValueError("no node exceeded the Gamma floor; samples too flat")
    return best
