"""Semigroup machinery: spectral caches, heat kernels, persistence."""
import numpy as np
import pytest

from cdbench.harness import sample_functions
from cdbench.semigroup import (
    apply_semigroup,
    heat_kernel,
    heat_kernel_matrix,
    load_cache,
    save_cache,
    space_fingerprint,
    spectral_gap,
    sphere_kernel_series,
)


def test_semigroup_composition(ou_ctx, rng):
    f = rng.standard_normal(ou_ctx.space.n_nodes)
    direct = apply_semigroup(ou_ctx.cache, f, 0.3)
    composed = apply_semigroup(ou_ctx.cache, apply_semigroup(ou_ctx.cache, f, 0.1), 0.2)
    np.testing.assert_allclose(composed, direct, atol=1e-11)


def test_mass_conservation(ou_ctx, rng):
    f = rng.standard_normal(ou_ctx.space.n_nodes)
    w = ou_ctx.space.weights
    before = float(w @ f)
    after = float(w @ apply_semigroup(ou_ctx.cache, f, 0.7))
    assert after == pytest.approx(before, abs=1e-10)


def test_constants_are_fixed_points(circle_ctx):
    ones = np.ones(circle_ctx.space.n_nodes)
    np.testing.assert_allclose(apply_semigroup(circle_ctx.cache, ones, 1.3), ones, atol=1e-12)


def test_batched_apply_matches_columnwise(circle_ctx):
    fs = sample_functions(circle_ctx.space, circle_ctx.cache, seed=5, count=3, band=6)
    batch = apply_semigroup(circle_ctx.cache, np.column_stack(fs), 0.2)
    for j, f in enumerate(fs):
        np.testing.assert_allclose(batch[:, j], apply_semigroup(circle_ctx.cache, f, 0.2))


def test_negative_time_rejected(circle_ctx):
    with pytest.raises(ValueError):
        apply_semigroup(circle_ctx.cache, np.ones(circle_ctx.space.n_nodes), -0.1)
    with pytest.raises(ValueError):
        heat_kernel(circle_ctx.cache, 0.0, 0)
    with pytest.raises(ValueError):
        sphere_kernel_series(0.0, np.array([1.0]))


def test_kernel_row_mass_and_consistency(ou_ctx, rng):
    row = heat_kernel(ou_ctx.cache, 0.1, 200)
    assert row.mass == pytest.approx(1.0, abs=1e-12)
    assert not row.degraded
    # averaging f against the row reproduces the semigroup at that node
    f = rng.standard_normal(ou_ctx.space.n_nodes)
    smoothed = apply_semigroup(ou_ctx.cache, f, 0.1)
    avg = float((row.density * ou_ctx.space.weights) @ f)
    assert avg == pytest.approx(float(smoothed[200]), abs=1e-9)


def test_kernel_matrix_symmetric_and_matches_rows(ou_ctx):
    mat, clamped = heat_kernel_matrix(ou_ctx.cache, 0.2)
    assert clamped >= 0
    np.testing.assert_allclose(mat, mat.T, atol=1e-10)
    row = heat_kernel(ou_ctx.cache, 0.2, 57)
    np.testing.assert_allclose(mat[57], row.density, atol=1e-12)


def test_spectral_gap_circle_exact(circle_ctx):
    assert spectral_gap(circle_ctx.cache) == pytest.approx(1.0, abs=1e-12)


def test_spectral_gap_ou_anchor(ou_ctx):
    # resolution-limited value on the 400-cell mesh; continuum limit is 3
    assert spectral_gap(ou_ctx.cache) == pytest.approx(2.999970334, abs=1e-6)


def test_spectral_gap_sphere_fd_anchor(sphere3_ctx):
    # continuum gap is 2; the level-3 cotangent mesh sits ~0.5% low
    gap = spectral_gap(sphere3_ctx.cache)
    assert gap == pytest.approx(1.990461888, abs=1e-6)
    assert abs(gap - 2.0) < 0.04


def test_spectral_gap_sphere_harmonics_exact(sphere3_spectral_ctx):
    assert spectral_gap(sphere3_spectral_ctx.cache) == pytest.approx(2.0, abs=1e-12)


def test_sphere_series_matches_mesh_kernel(sphere3_ctx):
    """Two routes to the round-sphere kernel: Legendre series vs mesh eigensolve."""
    cosang = np.clip(sphere3_ctx.space.points @ sphere3_ctx.space.points.T, -1.0, 1.0)
    series = sphere_kernel_series(0.5, cosang)
    mat, _ = heat_kernel_matrix(sphere3_ctx.cache, 0.5)
    assert np.abs(mat - series).max() < 3e-2
    # the series is a probability density; vertex weights integrate it to 1
    assert float(series[0] @ sphere3_ctx.space.weights) == pytest.approx(1.0, abs=1e-6)


def test_sphere_series_tail_control():
    val_auto = sphere_kernel_series(0.3, np.array([0.2]))
    val_long = sphere_kernel_series(0.3, np.array([0.2]), l_max=120)
    assert val_auto[0] == pytest.approx(val_long[0], abs=1e-10)
    with pytest.raises(ValueError):
        sphere_kernel_series(1e-9, np.array([0.0]))


def test_cache_round_trip(tmp_path, ou_ctx):
    path = str(tmp_path / "ou_cache.npz")
    save_cache(path, ou_ctx.cache)
    loaded = load_cache(path, expected_fingerprint=space_fingerprint(ou_ctx.gen))
    np.testing.assert_array_equal(loaded.eigenvalues, ou_ctx.cache.eigenvalues)
    np.testing.assert_array_equal(loaded.basis, ou_ctx.cache.basis)
    assert loaded.backend == ou_ctx.cache.backend
    f = np.cos(np.pi * ou_ctx.space.points)
    np.testing.assert_allclose(
        apply_semigroup(loaded, f, 0.4), apply_semigroup(ou_ctx.cache, f, 0.4)
    )


def test_cache_fingerprint_mismatch(tmp_path, ou_ctx):
    path = str(tmp_path / "ou_cache.npz")
    save_cache(path, ou_ctx.cache)
    with pytest.raises(ValueError, match="fingerprint"):
        load_cache(path, expected_fingerprint="deadbeefdeadbeef")


def test_fingerprint_distinguishes_backends(ou_space):
    from cdbench.generator import assemble_generator

    fd = assemble_generator(ou_space, "fd")
    assert space_fingerprint(fd) == space_fingerprint(fd)
    # same space, different discretization => different cache identity
    from cdbench.model_space import SpaceSpec, build_model_space

    other = build_model_space(SpaceSpec(kind="circle", nodes=256))
    sp = assemble_generator(other, "spectral")
    assert space_fingerprint(fd) != space_fingerprint(sp)
