"""Inequality evaluators: internal consistency, cross-routes, guard rails."""
import math

import numpy as np
import pytest

from cdbench.coefficients import local_logsob_grad
from cdbench.harness import sample_functions
from cdbench.inequalities import (
    PhiSchedule,
    adaptive_quadrature,
    evaluate_contraction,
    evaluate_explicit_H1,
    evaluate_field_statement,
    evaluate_hw0,
    evaluate_hwi,
    evaluate_kernel_KL,
    evaluate_kernel_lower_series,
    evaluate_lichnerowicz,
    evaluate_log_harnack6,
    evolve_measure,
    hw0_bound,
    local_logsob_fields,
    quadratic_schedule,
    ramp_schedule,
)
from cdbench.semigroup import heat_kernel


def band_sample(ctx, seed, transform="raw", band=6):
    return sample_functions(
        ctx.space, ctx.cache, seed=seed, count=1, band=band, transform=transform
    )[0]


# -- field checks ----------------------------------------------------------

def test_gradient_family_ordering(ou_ctx):
    """The integral-form bound is sharper, so its margin cannot exceed the
    closed-form one."""
    f = band_sample(ou_ctx, 21)
    r1 = evaluate_field_statement(ou_ctx, "gradient1", f, 0.2)
    r2 = evaluate_field_statement(ou_ctx, "gradient2", f, 0.2)
    assert r1.passed and r2.passed
    assert r1.margin <= r2.margin + 1e-8
    assert r1.flags["quad_nodes"] > 0


def test_variance_bounds_sandwich(ou_ctx):
    f = band_sample(ou_ctx, 24)
    upper = evaluate_field_statement(ou_ctx, "variance3", f, 0.3)
    lower = evaluate_field_statement(ou_ctx, "variance4", f, 0.3)
    assert upper.passed and lower.passed
    assert upper.witness["node"] >= 0


def test_drift_gradient_eps_stability(ou_ctx):
    f = band_sample(ou_ctx, 25)
    rep = evaluate_field_statement(ou_ctx, "drift_gradient5", f, 0.2)
    assert rep.passed
    # the margin should be insensitive to the gradient regularization
    assert abs(rep.flags["eps_shift"]) < 1e-7


def test_field_check_guards(ou_ctx):
    f = band_sample(ou_ctx, 26)
    with pytest.raises(KeyError, match="unknown field statement"):
        evaluate_field_statement(ou_ctx, "gradient9", f, 0.1)
    with pytest.raises(ValueError, match="t > 0"):
        evaluate_field_statement(ou_ctx, "gradient1", f, 0.0)


def test_local_logsob_constant_is_tight(ou_ctx):
    """Two routes to the gradient weight: the checker's constant passes,
    while half of it (the tempting wrong factor) fails at short times."""
    pos = band_sample(ou_ctx, 22, transform="positive_exp")
    t = 0.002
    rep = evaluate_field_statement(ou_ctx, "local_logsob", pos, t)
    assert rep.passed
    g = pos * pos + ou_ctx.eps_grad
    ptg = ou_ctx.semigroup(g, t)
    gap = ou_ctx.semigroup(g * np.log(g), t) - ptg * np.log(ptg)
    ptgam = ou_ctx.semigroup(ou_ctx.gen.gamma(pos), t)
    mask = ou_ctx.space.margin_mask
    full = local_logsob_grad(ou_ctx.K, t)
    assert float((full * ptgam - gap)[mask].min()) >= -ou_ctx.tol
    halved = 0.5 * full
    assert float((halved * ptgam - gap)[mask].min()) < -1e-6
    # the bound saturates as t -> 0: most of the weight is genuinely needed
    assert float((gap[mask] / ptgam[mask]).max()) > 0.9 * full


def test_local_logsob_matches_field_helper(ou_ctx):
    pos = band_sample(ou_ctx, 27, transform="positive_exp")
    lhs, rhs, flags = local_logsob_fields(ou_ctx, pos, 0.1)
    rep = evaluate_field_statement(ou_ctx, "local_logsob", pos, 0.1)
    mask = ou_ctx.space.margin_mask
    assert rep.margin == pytest.approx(float((rhs - lhs)[mask].min()))
    assert flags["clamped"] == 0


# -- log-Harnack schedules -------------------------------------------------

def test_log_harnack_schedules(ou_ctx):
    pos = band_sample(ou_ctx, 30, transform="positive_exp")
    pairs = (np.array([40]), np.array([360]))
    ident = evaluate_log_harnack6(ou_ctx, pos, 0.4, pairs)
    assert ident.passed
    assert ident.params["schedule"] == "identity"
    assert ident.flags["schedule_mass"] > 0.4  # e^{-2Ks} > 1 for K < 0
    ramp = evaluate_log_harnack6(ou_ctx, pos, 0.4, pairs, ramp_schedule(0.4, 0.1))
    assert ramp.passed
    quad = evaluate_log_harnack6(ou_ctx, pos, 0.4, pairs, quadratic_schedule(0.1))
    assert quad.passed
    assert quad.params["schedule"] == "quadratic(0.1)"


def test_log_harnack_rejects_bad_schedules(ou_ctx):
    pos = band_sample(ou_ctx, 31, transform="positive_exp")
    pairs = (np.array([40]), np.array([360]))
    offset = PhiSchedule(lambda s: s + 0.1, lambda s: 1.0, (), "offset")
    with pytest.raises(ValueError, match="start at 0"):
        evaluate_log_harnack6(ou_ctx, pos, 0.4, pairs, offset)
    steep = PhiSchedule(lambda s: 2.0 * s, lambda s: 2.0, (), "steep")
    with pytest.raises(ValueError, match="unit initial slope"):
        evaluate_log_harnack6(ou_ctx, pos, 0.4, pairs, steep)
    with pytest.raises(ValueError, match="not increasing"):
        evaluate_log_harnack6(ou_ctx, pos, 1.0, pairs, quadratic_schedule(-0.6))


def test_log_harnack_needs_positive_samples(ou_ctx):
    f = band_sample(ou_ctx, 32)  # raw samples change sign
    with pytest.raises(ValueError, match="strictly positive"):
        evaluate_log_harnack6(ou_ctx, f, 0.3, (np.array([40]), np.array([360])))


# -- kernel KL vs the explicit pairwise bound ------------------------------

def test_kernel_kl_equals_explicit_H1_at_ratio_function(sphere3_ctx):
    """The density ratio (capped) makes the two routes coincide: plugging
    f = p_{t+s}(y,.)/p_t(x,.) into the pairwise bound turns its left side
    into exactly the relative entropy between the kernel rows."""
    ctx = sphere3_ctx
    ix = ctx.space.nearest_node(np.array([0.0, 0.0, 1.0]))
    iy = ctx.space.nearest_node(
        np.array([math.sin(math.pi / 3.0), 0.0, math.cos(math.pi / 3.0)])
    )
    t, s = 0.5, 0.25
    pden = heat_kernel(ctx.cache, t, ix).density
    pnum = heat_kernel(ctx.cache, t + s, iy).density
    fstar = np.minimum(pnum / pden, 1e6) + 1e-9
    pairs = (np.array([ix]), np.array([iy]))
    via_f = evaluate_explicit_H1(ctx, fstar, t, s, pairs)
    via_kl = evaluate_kernel_KL(ctx, "H1p", t, s, pairs)
    assert via_f.passed and via_kl.passed
    assert via_f.margin == pytest.approx(via_kl.margin, abs=1e-6)


def test_kernel_kl_guards(sphere3_ctx, circle_ctx):
    pairs = (np.array([0]), np.array([5]))
    with pytest.raises(ValueError, match="H1p or H2p"):
        evaluate_kernel_KL(sphere3_ctx, "H3p", 0.1, 0.1, pairs)
    # the circle fixture measure has total 2*pi, not 1
    with pytest.raises(ValueError, match="probability measure"):
        evaluate_kernel_KL(circle_ctx, "H1p", 0.1, 0.1, pairs)


# -- series kernel lower bound ---------------------------------------------

def test_series_kernel_bound_margins():
    grid = np.linspace(0.0, math.pi, 15)
    rep = evaluate_kernel_lower_series(-1.0, [0.3, 1.0, 3.0], grid, tol=1e-8)
    assert rep.passed and rep.margin >= 0.0
    assert set(rep.witness) == {"t", "angle"}
    assert rep.flags["grid"] == [3, 15]
    # both sides approach the uniform density, so the gap closes at large t
    late = evaluate_kernel_lower_series(-1.0, [10.0], grid, tol=1e-8)
    assert 0.0 <= late.margin < 1e-7


def test_series_kernel_bound_guards():
    with pytest.raises(ValueError, match="t > 0"):
        evaluate_kernel_lower_series(-1.0, [0.0], [0.1], tol=1e-8)
    with pytest.raises(ValueError, match="nonempty"):
        evaluate_kernel_lower_series(-1.0, [], [0.1], tol=1e-8)


# -- spectral gap ----------------------------------------------------------

def test_lichnerowicz_requires_curved_space(circle_ctx, ou_ctx):
    with pytest.raises(ValueError, match="K < 0"):
        evaluate_lichnerowicz(circle_ctx)
    rep = evaluate_lichnerowicz(ou_ctx)
    assert rep.passed
    assert rep.lhs == pytest.approx(0.75)  # n(-K)/(n-1) = 3 * 0.5 / 2
    assert rep.flags["spectral_gap"] == pytest.approx(2.999970334, abs=1e-6)


# -- entropy-transport -----------------------------------------------------

def test_hwi_identity_with_radius_form(ou_ctx):
    """The closed-form bound equals the radius-parametrized bound at its
    self-tuned radius; both dominate the entropy."""
    for seed in (23, 28):
        dens = band_sample(ou_ctx, seed, transform="normalized_density", band=5)
        hwi = evaluate_hwi(ou_ctx, dens)
        hw0 = evaluate_hw0(ou_ctx, dens)
        assert hwi.passed and hw0.passed
        assert hwi.flags["identity_gap"] <= 1e-9
        assert hw0.margin == pytest.approx(hwi.margin, abs=1e-9)
        assert hw0.flags["fisher"] >= 0.0


def test_hw0_radius_domain(ou_ctx):
    dens = band_sample(ou_ctx, 29, transform="normalized_density", band=5)
    # K = -0.5 caps the radius at 2 / K^- = 4
    with pytest.raises(ValueError, match="r must lie"):
        evaluate_hw0(ou_ctx, dens, r=4.5)
    with pytest.raises(ValueError, match="r must lie"):
        hw0_bound(-0.5, 3.0, 0.0, 1.0, 1.0)
    explicit = evaluate_hw0(ou_ctx, dens, r=1.0)
    assert explicit.params["r"] == 1.0
    assert "r_auto" not in explicit.flags


# -- contraction -----------------------------------------------------------

def test_contraction_identical_measures(ou_ctx):
    m = ou_ctx.space.weights.copy()
    rep = evaluate_contraction(ou_ctx, m, m, 0.1)
    assert rep.passed
    assert rep.flags["w0"] == 0.0 and rep.flags["wt"] == 0.0


def test_contraction_presmoothed_diracs(ou_ctx):
    d1 = np.zeros(ou_ctx.space.n_nodes)
    d2 = np.zeros(ou_ctx.space.n_nodes)
    d1[100] = 1.0
    d2[300] = 1.0
    d1 = evolve_measure(ou_ctx, d1, 0.02)
    d2 = evolve_measure(ou_ctx, d2, 0.02)
    plain = evaluate_contraction(ou_ctx, d1, d2, 0.2)
    sharp = evaluate_contraction(ou_ctx, d1, d2, 0.2, sharp=True, slack=0.02)
    assert plain.passed and sharp.passed
    # the sharp rate is strictly smaller for K < 0
    assert sharp.flags["rate"] < plain.flags["rate"]
    assert plain.flags["w0"] == pytest.approx(sharp.flags["w0"])


def test_contraction_guards(ou_ctx):
    m = ou_ctx.space.weights.copy()
    with pytest.raises(ValueError, match="t > 0"):
        evaluate_contraction(ou_ctx, m, m, 0.0)
    with pytest.raises(ValueError, match="p = 1"):
        evaluate_contraction(ou_ctx, m, m, 0.1, p=2.0, sharp=True)


def test_evolve_measure_needs_symmetric_backend(sphere3_spectral_ctx):
    m = np.zeros(sphere3_spectral_ctx.space.n_nodes)
    m[0] = 1.0
    with pytest.raises(ValueError, match="symmetric"):
        evolve_measure(sphere3_spectral_ctx, m, 0.1)


# -- quadrature ------------------------------------------------------------

def test_adaptive_quadrature_polynomial_exact():
    value, err, nodes = adaptive_quadrature(lambda s: s**3, 0.0, 1.0, tol=1e-12)
    assert value == pytest.approx(0.25, abs=1e-14)
    assert err <= 1e-12 and nodes > 0


def test_adaptive_quadrature_vector_and_breakpoints():
    def f(s):
        return np.array([math.sin(s), abs(s - 0.5)])

    value, err, _ = adaptive_quadrature(f, 0.0, 1.0, tol=1e-12, breakpoints=(0.5,))
    assert value[0] == pytest.approx(1.0 - math.cos(1.0), abs=1e-12)
    assert value[1] == pytest.approx(0.25, abs=1e-13)
