"""Model-space construction: meshes, measures, distances, validation."""
import math

import numpy as np
import pytest

from cdbench.model_space import (
    ModelSpace,
    PotentialSpec,
    SpaceSpec,
    build_model_space,
)


def test_circle_nodes_and_measure():
    space = build_model_space(SpaceSpec(kind="circle", nodes=128))
    assert space.kind == "circle"
    assert space.n_nodes == 128
    assert space.points[0] == 0.0
    np.testing.assert_allclose(np.diff(space.points), 2.0 * math.pi / 128)
    assert space.measure_total == pytest.approx(2.0 * math.pi)
    np.testing.assert_allclose(space.weights, space.weights[0])


def test_interval_cell_centers():
    space = build_model_space(SpaceSpec(kind="interval", nodes=10, bounds=(0.0, 1.0)))
    np.testing.assert_allclose(space.points, (np.arange(10) + 0.5) * 0.1)
    assert space.diameter == pytest.approx(1.0)


def test_interval_weighted_measure_normalization():
    spec = SpaceSpec(
        kind="interval",
        nodes=200,
        bounds=(-1.0, 1.0),
        potential=PotentialSpec(family="quadratic", coefficient=-0.5),
        normalize_measure=True,
    )
    space = build_model_space(spec)
    assert float(space.weights.sum()) == pytest.approx(1.0, abs=1e-12)
    # density e^{-x^2/2} is largest at the center
    assert space.weights[100] > space.weights[0]


def test_interval_margin_mask_excludes_end_cells():
    space = build_model_space(SpaceSpec(kind="interval", nodes=50))
    assert not space.margin_mask[0]
    assert not space.margin_mask[-1]
    assert space.margin_mask[1:-1].all()


def test_circle_distance_wraps():
    space = build_model_space(SpaceSpec(kind="circle", nodes=8))
    # neighbors across the seam are one step apart, not seven
    assert space.distance(0, 7) == pytest.approx(2.0 * math.pi / 8)
    assert space.distance(0, 4) == pytest.approx(math.pi)


def test_circle_rejects_quadratic_potential():
    # the seam makes x^2 discontinuous, so SpaceSpec refuses it at construction
    with pytest.raises(ValueError):
        SpaceSpec(
            kind="circle",
            nodes=32,
            potential=PotentialSpec(family="quadratic", coefficient=1.0),
        )


def test_sphere_geometry():
    space = build_model_space(SpaceSpec(kind="sphere2", level=2))
    assert space.dim == 2
    norms = np.linalg.norm(space.points, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    assert space.measure_total == pytest.approx(4.0 * math.pi, rel=1e-2)
    assert space.diameter == pytest.approx(math.pi)


def test_sphere_distance_is_angle():
    space = build_model_space(SpaceSpec(kind="sphere2", level=2))
    i = space.nearest_node(np.array([0.0, 0.0, 1.0]))
    j = space.nearest_node(np.array([0.0, 0.0, -1.0]))
    assert space.distance(i, j) == pytest.approx(math.pi, abs=1e-6)


def test_pairwise_distance_consistency():
    space = build_model_space(SpaceSpec(kind="sphere2", level=2))
    idx = np.array([0, 5, 17])
    mat = space.pairwise_distance(idx, idx)
    assert mat.shape == (3, 3)
    # arccos of a unit dot product carries sqrt(eps)-level roundoff
    np.testing.assert_allclose(np.diag(mat), 0.0, atol=1e-7)
    np.testing.assert_allclose(mat, mat.T, atol=1e-12)
    assert mat[0, 1] == pytest.approx(space.distance(0, 5))


def test_nearest_node_roundtrip():
    space = build_model_space(SpaceSpec(kind="interval", nodes=64))
    for i in (0, 13, 63):
        assert space.nearest_node(np.atleast_1d(space.points[i])) == i


def test_size_limits_enforced():
    with pytest.raises(ValueError):
        build_model_space(SpaceSpec(kind="interval", nodes=9000))
    with pytest.raises(ValueError):
        build_model_space(SpaceSpec(kind="sphere2", level=6))
    with pytest.raises(ValueError):
        build_model_space(SpaceSpec(kind="mobius", nodes=16))


def test_measure_scale_tracks_normalization():
    raw = build_model_space(SpaceSpec(kind="interval", nodes=100))
    norm = build_model_space(SpaceSpec(kind="interval", nodes=100, normalize_measure=True))
    assert norm.measure_scale == pytest.approx(raw.measure_scale / raw.measure_total)
