"""Generator assembly: carre du champ identities, backend agreement,
curvature constants and their empirical estimation."""
import math

import numpy as np
import pytest

from cdbench.generator import analytic_K, assemble_generator, cd_margin, estimate_K
from cdbench.harness import boundary_probe_functions, sample_functions
from cdbench.model_space import PotentialSpec, SpaceSpec, build_model_space


def test_gamma_product_rule(ou_ctx, rng):
    # Gamma(f, f) from the generator satisfies 2 Gamma(f) = L(f^2) - 2 f Lf
    gen = ou_ctx.gen
    f = rng.standard_normal(ou_ctx.space.n_nodes)
    lhs = 2.0 * gen.gamma(f)
    rhs = gen.apply(f * f) - 2.0 * f * gen.apply(f)
    mask = ou_ctx.space.margin_mask
    np.testing.assert_allclose(lhs[mask], rhs[mask], atol=1e-8)


def test_gamma_nonnegative(circle_ctx, ou_ctx, rng):
    # fd gamma is a sum of nonnegative conductance terms: any input works
    f = rng.standard_normal(ou_ctx.space.n_nodes)
    assert ou_ctx.gen.gamma(f).min() >= -1e-12
    # spectral gamma is only meaningful on resolved inputs (f**2 must fit
    # in band), so draw a band-limited sample instead of white noise
    g = sample_functions(circle_ctx.space, circle_ctx.cache, seed=7, count=1, band=40)[0]
    assert circle_ctx.gen.gamma(g).min() >= -1e-10 * circle_ctx.gen.gamma(g).max()


def test_circle_backends_agree_on_trig(circle_space):
    fd = assemble_generator(circle_space, "fd")
    sp = assemble_generator(circle_space, "spectral")
    x = circle_space.points
    f = np.sin(3.0 * x) + 0.5 * np.cos(x)
    # L f = -9 sin(3x) - 0.5 cos(x); fd is second order, spectral exact
    exact = -9.0 * np.sin(3.0 * x) - 0.5 * np.cos(x)
    np.testing.assert_allclose(sp.apply(f), exact, atol=1e-10)
    np.testing.assert_allclose(fd.apply(f), exact, atol=5e-3)
    # Gamma(f) = (f')^2; fd carries an O(h^2 |f' f'''|) error (~2e-2 here)
    gamma_exact = (3.0 * np.cos(3.0 * x) - 0.5 * np.sin(x)) ** 2
    np.testing.assert_allclose(sp.gamma(f), gamma_exact, atol=1e-9)
    np.testing.assert_allclose(fd.gamma(f), gamma_exact, atol=3e-2)


def test_spectral_sphere_eigenvalues_exact(sphere3_spectral_ctx):
    ev = sphere3_spectral_ctx.cache.eigenvalues
    # the first few distinct magnitudes are l(l+1)
    distinct = np.unique(np.round(ev, 6))
    for l in range(4):
        assert l * (l + 1.0) in distinct


def test_analytic_K_values():
    circle = SpaceSpec(kind="circle", nodes=64)
    assert analytic_K(build_model_space(circle), 1.0) == 0.0
    ou = SpaceSpec(
        kind="interval",
        nodes=64,
        bounds=(-1.0, 1.0),
        potential=PotentialSpec(family="quadratic", coefficient=-0.5),
    )
    assert analytic_K(build_model_space(ou), 3.0) == pytest.approx(-0.5)
    assert analytic_K(build_model_space(ou), math.inf) == pytest.approx(-1.0)
    sphere = SpaceSpec(kind="sphere2", level=2)
    assert analytic_K(build_model_space(sphere), 2.0) == pytest.approx(-1.0)


def test_analytic_K_refuses_unknown_families():
    sphere = build_model_space(SpaceSpec(kind="sphere2", level=2))
    with pytest.raises(ValueError):
        analytic_K(sphere, 1.5)  # below the geometric dimension


def test_cd_margin_sign_flips_with_K(ou_ctx):
    space, gen = ou_ctx.space, ou_ctx.gen
    probes = [f for _, f in boundary_probe_functions(space, 3.0, (0.06,), 4.0)]
    f = probes[0]
    honest_field, honest_min = cd_margin(gen, f, -0.5, 3.0)
    falsified_field, falsified_min = cd_margin(gen, f, -0.7, 3.0)
    mask = space.margin_mask
    assert honest_min == pytest.approx(float(honest_field[mask].min()))
    assert honest_min >= -1e-6
    assert falsified_min < -1e-3
    # the falsified field differs by exactly -0.2 * Gamma(f)
    np.testing.assert_allclose(
        honest_field - falsified_field, 0.2 * gen.gamma(f), atol=1e-10
    )


def test_estimate_K_ou_regression(ou_ctx):
    """Resolution-limited empirical constant; anchored, not analytic."""
    probes = [
        f for _, f in boundary_probe_functions(ou_ctx.space, 3.0, (0.06, 0.12), 4.0)
    ]
    khat = estimate_K(ou_ctx.gen, probes, 3.0)
    assert khat == pytest.approx(-0.569865178, abs=1e-3)


def test_estimate_K_sphere_regression(sphere3_spectral_ctx):
    ctx = sphere3_spectral_ctx
    bank = sample_functions(ctx.space, ctx.cache, seed=314, count=4, band=8)
    khat = estimate_K(ctx.gen, bank, 2.0)
    assert khat == pytest.approx(-1.001356796, abs=2e-3)


def test_spectral_backend_rejects_weighted_spaces():
    ou = build_model_space(
        SpaceSpec(
            kind="interval",
            nodes=64,
            potential=PotentialSpec(family="quadratic", coefficient=-0.5),
        )
    )
    with pytest.raises(ValueError):
        assemble_generator(ou, "spectral")
