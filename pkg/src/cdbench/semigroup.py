"""Heat semigroups e^{tL} via dense spectral decomposition.

The generator is symmetrized as S = W^{1/2} L W^{-1/2} (W = diag of node
weights), diagonalized once with ``scipy.linalg.eigh``, and cached.  The
semigroup then acts by damping spectral coefficients::

    P_t f = Phi exp(-lambda t) Phi^T W f

with mu-orthonormal columns Phi (Phi^T W Phi = I).  Heat-kernel densities
p_t(x_i, .) with respect to mu come from the same data and integrate to one
exactly in exact arithmetic; tiny negative kernel values from roundoff are
clamped to zero and counted.

On the flat circle with the spectral backend the eigenpairs are written
down analytically (sampled trigonometric modes with eigenvalues k^2), which
are exactly orthonormal under the uniform grid measure, so no numerical
diagonalization error enters at all.  On the round sphere with the spectral
backend the basis columns are harmonics with exact eigenvalues l(l+1), and
analysis goes through the Gram least-squares solve stored as an explicit
``dual`` operator; the semigroup is then exact on resolved harmonics but
truncated (it annihilates nothing beyond the basis span, so P_0 is the
projection, not the identity).

For the round sphere an independent closed form is provided:
``sphere_kernel_series`` sums the Legendre expansion of the kernel with an
explicit tail bound, giving an oracle that never touches the mesh.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg

from .generator import Generator

logger = logging.getLogger(__name__)

_CACHE_VERSION = 1
_EIGENVALUE_FLOOR = 1e-10


@dataclass
class SemigroupCache:
    """Spectral data of -L: ascending eigenvalues and basis columns.

    For orthonormal bases (``dual is None``) coefficient analysis is the
    mu-adjoint ``basis.T @ (w * f)``.  Truncated harmonic bases carry an
    explicit ``dual`` analysis operator (Gram least squares) instead.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    weights: np.ndarray
    backend: str
    fingerprint: str
    clamped: int = 0
    dual: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return self.basis.shape[0]

    def analyze(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.dual is not None:
            return self.dual @ f
        w = self.weights if f.ndim == 1 else self.weights[:, None]
        return self.basis.T @ (w * f)


@dataclass
class KernelRow:
    """One heat-kernel row as a density against mu, with clamp diagnostics."""

    density: np.ndarray
    clamped: int
    min_raw: float
    degraded: bool = False

    @property
    def mass(self) -> float:
        return float(self.density @ np.asarray(self._weights))

    _weights: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def space_fingerprint(gen: Generator) -> str:
    """Stable hash of the space geometry, potential, and backend."""
    spec = gen.space.spec
    h = hashlib.sha256()
    h.update(
        repr(
            (
                _CACHE_VERSION,
                spec.kind,
                spec.nodes,
                spec.bounds,
                spec.level,
                spec.potential.family,
                spec.potential.coefficient,
                spec.normalize_measure,
                gen.backend,
                gen.l_max,
            )
        ).encode()
    )
    if spec.potential.values is not None:
        h.update(np.asarray(spec.potential.values, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _circle_analytic_modes(gen: Generator) -> tuple[np.ndarray, np.ndarray]:
    """Exact eigenpairs of the flat-circle spectral operator on the grid."""
    n = gen.space.n_nodes
    theta = gen.space.points
    total = float(gen.weights.sum())
    cols = [np.full(n, 1.0 / math.sqrt(total))]
    lams = [0.0]
    half_norm = math.sqrt(total / 2.0)
    for k in range(1, n // 2):
        cols.append(np.cos(k * theta) / half_norm)
        cols.append(np.sin(k * theta) / half_norm)
        lams.extend([float(k**2), float(k**2)])
    # Nyquist mode cos(N/2 * theta) = (-1)^m has full norm; its sine vanishes.
    cols.append(np.cos((n // 2) * theta) / math.sqrt(total))
    lams.append(float((n // 2) ** 2))
    return np.array(lams), np.column_stack(cols)


def spectral_decompose(gen: Generator) -> SemigroupCache:
    """Diagonalize the generator once; reusable for all times t."""
    fp = space_fingerprint(gen)
    if gen.backend == "spectral":
        if gen.space.kind == "circle":
            lam, basis = _circle_analytic_modes(gen)
            return SemigroupCache(lam, basis, gen.weights, gen.backend, fp)
        # sphere: exact eigenvalues l(l+1); analysis via the Gram solve
        dual = linalg.cho_solve(gen._gram_cho, gen._phi.T * gen.weights)
        return SemigroupCache(
            gen._eigs.copy(), gen._phi, gen.weights, gen.backend, fp, dual=dual
        )

    w = gen.weights
    sqrt_w = np.sqrt(w)
    dense = gen.conduct.toarray() / np.outer(sqrt_w, sqrt_w)
    np.fill_diagonal(dense, -gen._degree / w)
    logger.info("dense eigh on %d nodes", dense.shape[0])
    vals, vecs = linalg.eigh(dense)
    lam = -vals[::-1]  # heat eigenvalues, ascending from ~0
    basis = vecs[:, ::-1] / sqrt_w[:, None]

    floor = max(_EIGENVALUE_FLOOR, 1e-14 * float(np.abs(lam).max()))
    clamped = int(np.count_nonzero((lam < 0.0) & (lam >= -floor)))
    if np.any(lam < -floor):
        worst = float(lam.min())
        raise ValueError(
            f"generator has an expanding mode (eigenvalue {worst:.3e} < -{floor:.1e}); "
            "check conductance signs"
        )
    lam = np.maximum(lam, 0.0)
    return SemigroupCache(lam, basis, w, gen.backend, fp, clamped)


def apply_semigroup(cache: SemigroupCache, f: np.ndarray, t: float) -> np.ndarray:
    """Evaluate P_t f = e^{tL} f.  Accepts (N,) or (N, m) arrays."""
    if t < 0.0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    f = np.asarray(f, dtype=float)
    coef = cache.analyze(f)
    damp = np.exp(-cache.eigenvalues * t)
    coef = coef * (damp if f.ndim == 1 else damp[:, None])
    return cache.basis @ coef


def heat_kernel(cache: SemigroupCache, t: float, index: int) -> KernelRow:
    """Density p_t(x_index, .) against mu; clamps roundoff negatives to 0.

    Values in [-1e-10, 0) are zeroed silently (counted); anything more
    negative is also zeroed but marks the row ``degraded`` — expected for
    coarse meshes at small t, where the spectral sum is not yet positive.
    """
    if t <= 0.0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    damp = np.exp(-cache.eigenvalues * t)
    if cache.dual is not None:
        row = (damp * cache.basis[index]) @ cache.dual / cache.weights
    else:
        row = cache.basis @ (damp * cache.basis[index])
    min_raw = float(row.min())
    neg = row < 0.0
    clamped = int(np.count_nonzero(neg))
    degraded = min_raw < -_EIGENVALUE_FLOOR
    if degraded:
        logger.debug("kernel row %d at t=%g dips to %.3e", index, t, min_raw)
    row = np.where(neg, 0.0, row)
    return KernelRow(row, clamped, min_raw, degraded, _weights=cache.weights)


def heat_kernel_matrix(cache: SemigroupCache, t: float) -> tuple[np.ndarray, int]:
    """All kernel rows at once: P[i, j] = p_t(x_i, x_j).  Symmetric."""
    if t <= 0.0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    damp = np.exp(-cache.eigenvalues * t)
    if cache.dual is not None:
        mat = (cache.basis * damp) @ cache.dual / cache.weights[None, :]
    else:
        mat = (cache.basis * damp) @ cache.basis.T
    clamped = int(np.count_nonzero(mat < 0.0))
    return np.maximum(mat, 0.0), clamped


def spectral_gap(cache: SemigroupCache) -> float:
    """Smallest strictly positive eigenvalue of -L.

    The zero mode of a dense eigensolve lands at roundoff scaled by the
    largest eigenvalue (which grows like 1/h^2), so the cutoff separating
    "numerically zero" from the gap has to be relative.
    """
    lam = cache.eigenvalues
    cutoff = max(1e-12, float(lam.max()) * 1e-10)
    positive = lam[lam > cutoff]
    if positive.size == 0:
        raise ValueError("no positive eigenvalue found")
    return float(positive.min())


def sphere_kernel_series(
    t: float, cos_angle: np.ndarray, l_max: Optional[int] = None, tail: float = 1e-12
) -> np.ndarray:
    """Closed-form round-sphere heat kernel via its Legendre expansion.

    Density with respect to the *normalized* uniform measure:

    p_t(x, y) = sum_l (2l+1) e^{-l(l+1)t} P_l(<x, y>),

    truncated once the crude tail majorant (2L+3)^2 e^{-L(L+1)t} drops
    below ``tail``.  Independent of any mesh; used as an oracle.
    """
    if t <= 0.0:
        raise ValueError(f"series kernel needs t > 0, got {t}")
    if l_max is None:
        l_max = None
        for l in range(1, 501):
            if (2 * l + 3) ** 2 * math.exp(-l * (l + 1) * t) < tail:
                l_max = l
                break
        if l_max is None:
            raise ValueError(f"series does not converge by l=500 at t={t}; use larger t")
    ell = np.arange(l_max + 1, dtype=float)
    coef = (2.0 * ell + 1.0) * np.exp(-ell * (ell + 1.0) * t)
    x = np.clip(np.asarray(cos_angle, dtype=float), -1.0, 1.0)
    return legendre.legval(x, coef)


def save_cache(path: str, cache: SemigroupCache) -> None:
    payload = dict(
        version=_CACHE_VERSION,
        eigenvalues=cache.eigenvalues,
        basis=cache.basis,
        weights=cache.weights,
        backend=np.array(cache.backend),
        fingerprint=np.array(cache.fingerprint),
        clamped=cache.clamped,
    )
    if cache.dual is not None:
        payload["dual"] = cache.dual
    np.savez_compressed(path, **payload)


def load_cache(path: str, expected_fingerprint: Optional[str] = None) -> SemigroupCache:
    with np.load(path, allow_pickle=False) as data:
        if int(data["version"]) != _CACHE_VERSION:
            raise ValueError(f"cache version {int(data['version'])} unsupported")
        cache = SemigroupCache(
            data["eigenvalues"],
            data["basis"],
            data["weights"],
            str(data["backend"]),
            str(data["fingerprint"]),
            int(data["clamped"]),
            dual=data["dual"] if "dual" in data.files else None,
        )
    if expected_fingerprint is not None and cache.fingerprint != expected_fingerprint:
        raise ValueError("cache fingerprint mismatch; space or backend changed")
    return cache
