"""Icosphere meshes on the unit 2-sphere with spherical dual areas and
cotangent edge weights."""
from __future__ import annotations

import numpy as np
from scipy import sparse

# regular icosahedron: 12 vertices, 20 faces
_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def _normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Subdivide the icosahedron ``level`` times and project to the unit sphere.

    Returns ``(verts, faces)`` with ``10 * 4**level + 2`` vertices and
    ``20 * 4**level`` faces.
    """
    if level < 0:
        raise ValueError("subdivision level must be >= 0")
    verts = [v for v in _normalized(_ICO_VERTS)]
    faces = _ICO_FACES.copy()
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                p = _normalized(0.5 * (verts[i] + verts[j]))
                midpoint[key] = len(verts)
                verts.append(p)
            return midpoint[key]

        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for k, (a, b, c) in enumerate(faces):
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces[4 * k + 0] = (a, ab, ca)
            new_faces[4 * k + 1] = (b, bc, ab)
            new_faces[4 * k + 2] = (c, ca, bc)
            new_faces[4 * k + 3] = (ab, bc, ca)
        faces = new_faces
    return np.array(verts), faces


def spherical_face_areas(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Geodesic triangle areas (spherical excess, L'Huilier), summing to 4*pi."""
    p0, p1, p2 = (verts[faces[:, k]] for k in range(3))
    # arc side lengths
    a = np.arccos(np.clip(np.einsum("ij,ij->i", p1, p2), -1.0, 1.0))
    b = np.arccos(np.clip(np.einsum("ij,ij->i", p0, p2), -1.0, 1.0))
    c = np.arccos(np.clip(np.einsum("ij,ij->i", p0, p1), -1.0, 1.0))
    s = 0.5 * (a + b + c)
    t = (
        np.tan(0.5 * s)
        * np.tan(0.5 * (s - a))
        * np.tan(0.5 * (s - b))
        * np.tan(0.5 * (s - c))
    )
    return 4.0 * np.arctan(np.sqrt(np.maximum(t, 0.0)))


def dual_areas(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Barycentric dual area per vertex: one third of each adjacent spherical
    triangle.  Total equals the sphere area 4*pi up to roundoff."""
    area = spherical_face_areas(verts, faces)
    w = np.zeros(len(verts))
    for k in range(3):
        np.add.at(w, faces[:, k], area / 3.0)
    return w


def cotangent_weights(verts: np.ndarray, faces: np.ndarray) -> sparse.csr_matrix:
    """Symmetric cotangent edge weights c_ij = (cot a + cot b) / 2 of the
    embedded triangle mesh (off-diagonal only)."""
    n = len(verts)
    rows, cols, vals = [], [], []
    for k in range(3):
        # edge (i, j) is opposite vertex o in each face
        i = faces[:, (k + 1) % 3]
        j = faces[:, (k + 2) % 3]
        o = faces[:, k]
        u = verts[i] - verts[o]
        v = verts[j] - verts[o]
        cot = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        rows.append(i)
        cols.append(j)
        vals.append(0.5 * cot)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    half = sparse.coo_matrix((v, (r, c)), shape=(n, n))
    return (half + half.T).tocsr()
