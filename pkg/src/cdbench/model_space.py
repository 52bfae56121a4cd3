"""Model geometries for the diffusion bench.

Three families are supported:

* ``circle``   -- uniform grid on the unit circle with a weighted measure
  ``exp(V) dtheta``,
* ``interval`` -- cell-centered grid on ``[a, b]`` with reflecting (Neumann)
  ends and measure ``exp(V) dx``,
* ``sphere2``  -- icosphere discretization of the unit 2-sphere with
  spherical dual-area weights.

A built :class:`ModelSpace` carries node coordinates, the discrete measure
(one nonnegative weight per node), tabulated potential values and geodesic
distances.  Operators over the space live in :mod:`cdbench.generator`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import sphere_mesh

log = logging.getLogger(__name__)

MAX_NODES_1D = 8192
MAX_SPHERE_LEVEL = 5

_KINDS = ("circle", "interval", "sphere2")


@dataclass(frozen=True)
class PotentialSpec:
    """Weight potential V so the node measure is ``exp(V) * (volume element)``.

    ``family`` is one of ``zero``, ``quadratic`` (``V(x) = coefficient * x**2``,
    interval only) or ``table`` (explicit node values).
    """

    family: str = "zero"
    coefficient: float = 0.0
    values: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.family not in ("zero", "quadratic", "table"):
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "table" and self.values is None:
            raise ValueError("table potential requires explicit values")


@dataclass(frozen=True)
class SpaceSpec:
    """Declarative description of a model space.

    Parameters
    ----------
    kind : str
        One of ``circle``, ``interval``, ``sphere2``.
    nodes : int, optional
        Node count for circle/interval grids (<= 8192).
    bounds : tuple, optional
        Interval endpoints ``(a, b)``; defaults to ``(-1.0, 1.0)``.
    level : int, optional
        Icosphere subdivision level for ``sphere2`` (<= 5), giving
        ``10 * 4**level + 2`` nodes.
    potential : PotentialSpec
    normalize_measure : bool
        If true, weights are rescaled to total mass one.
    """

    kind: str
    nodes: int = 0
    bounds: tuple[float, float] = (-1.0, 1.0)
    level: int = 0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    normalize_measure: bool = False

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind in ("circle", "interval"):
            if not (3 <= self.nodes <= MAX_NODES_1D):
                raise ValueError(
                    f"{self.kind} needs 3 <= nodes <= {MAX_NODES_1D}, got {self.nodes}"
                )
            if self.kind == "interval" and not self.bounds[1] > self.bounds[0]:
                raise ValueError(f"empty interval bounds {self.bounds}")
            if self.kind == "circle" and self.potential.family == "quadratic":
                raise ValueError(
                    "quadratic potential is discontinuous across the circle seam; "
                    "supply a table instead"
                )
        else:
            if not (0 <= self.level <= MAX_SPHERE_LEVEL):
                raise ValueError(
                    f"sphere2 needs 0 <= level <= {MAX_SPHERE_LEVEL}, got {self.level}"
                )
            if self.potential.family == "quadratic":
                raise ValueError("quadratic potential is undefined on sphere2; use a table")


@dataclass
class ModelSpace:
    """A built model geometry.

    Attributes
    ----------
    spec : SpaceSpec
    points : ndarray
        Node coordinates: angles for the circle, positions for the interval,
        unit vectors of shape (N, 3) for the sphere.
    weights : ndarray
        Discrete measure, one positive weight per node.
    potential : ndarray
        Tabulated V at the nodes.
    dim : int
        Topological dimension d (1 or 2).
    h : float
        Mesh scale (grid spacing, or mean edge length on the sphere).
    measure_total : float
        Total mass before any normalization.
    margin_mask : ndarray of bool
        Nodes included in pointwise min-margin reductions.  On the interval
        the two outermost cells are excluded (the reflecting ghost closure
        degrades second-order accuracy of iterated forms there); they are
        still computed and reported.
    faces : ndarray or None
        Triangles of the sphere mesh (None for 1D spaces).
    """

    spec: SpaceSpec
    points: np.ndarray
    weights: np.ndarray
    potential: np.ndarray
    dim: int
    h: float
    measure_total: float
    margin_mask: np.ndarray
    faces: Optional[np.ndarray] = None

    @property
    def measure_scale(self) -> float:
        """Factor applied to the raw weights (1/total when normalized).

        Dirichlet-form coefficients must be scaled by the same factor so
        the generator is invariant under measure normalization.
        """
        return 1.0 / self.measure_total if self.spec.normalize_measure else 1.0

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @property
    def diameter(self) -> float:
        if self.kind == "interval":
            return float(self.spec.bounds[1] - self.spec.bounds[0])
        return float(np.pi)

    def distance(self, i: int, j) -> np.ndarray | float:
        """Geodesic distance from node ``i`` to node(s) ``j``."""
        j_arr = np.atleast_1d(np.asarray(j, dtype=np.int64))
        if self.kind == "circle":
            delta = np.abs(self.points[j_arr] - self.points[i])
            out = np.minimum(delta, 2.0 * np.pi - delta)
        elif self.kind == "interval":
            out = np.abs(self.points[j_arr] - self.points[i])
        else:
            dots = np.clip(self.points[j_arr] @ self.points[i], -1.0, 1.0)
            out = np.arccos(dots)
        return out if np.ndim(j) else float(out[0])

    def pairwise_distance(self, idx_a: Sequence[int], idx_b: Sequence[int]) -> np.ndarray:
        """Geodesic distance matrix between two node index sets."""
        ia = np.asarray(idx_a, dtype=np.int64)
        ib = np.asarray(idx_b, dtype=np.int64)
        if self.kind == "circle":
            delta = np.abs(self.points[ia][:, None] - self.points[ib][None, :])
            return np.minimum(delta, 2.0 * np.pi - delta)
        if self.kind == "interval":
            return np.abs(self.points[ia][:, None] - self.points[ib][None, :])
        dots = np.clip(self.points[ia] @ self.points[ib].T, -1.0, 1.0)
        return np.arccos(dots)

    def nearest_node(self, target) -> int:
        """Index of the node closest to a coordinate (angle, position, or
        3-vector for the sphere)."""
        if self.kind in ("circle", "interval"):
            value = float(np.asarray(target, dtype=float).reshape(-1)[0])
            if self.kind == "circle":
                delta = np.abs(self.points - value % (2.0 * np.pi))
                return int(np.argmin(np.minimum(delta, 2.0 * np.pi - delta)))
            return int(np.argmin(np.abs(self.points - value)))
        v = np.asarray(target, dtype=float)
        v = v / np.linalg.norm(v)
        return int(np.argmax(self.points @ v))


def _potential_values(spec: SpaceSpec, coords: np.ndarray) -> np.ndarray:
    pot = spec.potential
    n = len(coords)
    if pot.family == "zero":
        return np.zeros(n)
    if pot.family == "quadratic":
        return pot.coefficient * np.asarray(coords, dtype=float) ** 2
    values = np.asarray(pot.values, dtype=float)
    if values.shape != (n,):
        raise ValueError(f"potential table has {values.shape} values, expected ({n},)")
    return values


def build_model_space(spec: SpaceSpec) -> ModelSpace:
    """Construct the geometry, measure and potential for ``spec``.

    Raises
    ------
    ValueError
        For unknown kinds, node counts beyond the caps, or potential tables
        of the wrong length (checked before any heavy work).
    """
    if spec.kind == "circle":
        n = spec.nodes
        h = 2.0 * np.pi / n
        theta = h * np.arange(n)
        v = _potential_values(spec, theta)
        weights = h * np.exp(v)
        points = theta
        dim = 1
        faces = None
        mask = np.ones(n, dtype=bool)
    elif spec.kind == "interval":
        n = spec.nodes
        a, b = spec.bounds
        h = (b - a) / n
        x = a + (np.arange(n) + 0.5) * h
        v = _potential_values(spec, x)
        weights = h * np.exp(v)
        points = x
        dim = 1
        mask = np.ones(n, dtype=bool)
        mask[0] = mask[-1] = False
        faces = None
    else:
        verts, faces = sphere_mesh.icosphere(spec.level)
        areas = sphere_mesh.dual_areas(verts, faces)
        v = _potential_values(spec, np.zeros(len(verts)))
        if spec.potential.family == "table":
            v = np.asarray(spec.potential.values, dtype=float)
            if v.shape != (len(verts),):
                raise ValueError(
                    f"potential table has {v.shape} values, expected ({len(verts)},)"
                )
        weights = areas * np.exp(v)
        points = verts
        dim = 2
        # mean edge arc length as the mesh scale
        e0 = verts[faces[:, 0]]
        e1 = verts[faces[:, 1]]
        h = float(np.mean(np.arccos(np.clip(np.einsum("ij,ij->i", e0, e1), -1, 1))))
        n = len(verts)
        mask = np.ones(n, dtype=bool)

    total = float(weights.sum())
    if spec.normalize_measure:
        weights = weights / total
    log.debug("built %s space: %d nodes, h=%.3g, mass=%.6g", spec.kind, n, h, total)
    return ModelSpace(
        spec=spec,
        points=points,
        weights=weights,
        potential=v,
        dim=dim,
        h=h,
        measure_total=total,
        margin_mask=mask,
        faces=faces,
    )
