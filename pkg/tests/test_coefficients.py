"""Coefficient formulas: closed-form values, limits, and K -> 0 continuity."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdbench import coefficients as co


def test_coeff_F_closed_form():
    assert co.coeff_F(1.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-15)
    assert co.coeff_F(-2.0, 0.5) == pytest.approx((math.exp(-1.0) - 1.0) / -2.0, rel=1e-15)
    assert co.coeff_F(0.0, 0.7) == pytest.approx(0.7, rel=1e-15)


def test_coeff_G_closed_form():
    a, t = 1.5, 0.8
    assert co.coeff_G(a, t) == pytest.approx(
        (math.exp(a * t) - 1.0 - a * t) / a**2, rel=1e-14
    )
    assert co.coeff_G(0.0, 0.4) == pytest.approx(0.08, rel=1e-15)


@given(
    a=st.floats(-5.0, 5.0),
    t=st.floats(1e-3, 5.0),
)
@settings(max_examples=300)
def test_coeff_F_positive_and_increasing_in_t(a, t):
    v1 = co.coeff_F(a, t)
    v2 = co.coeff_F(a, t * 1.01)
    assert v1 > 0.0
    assert v2 >= v1  # integrand e^{as} > 0


@given(a=st.floats(-5.0, 5.0), t=st.floats(1e-3, 5.0))
@settings(max_examples=300)
def test_coeff_G_nonnegative(a, t):
    assert co.coeff_G(a, t) >= 0.0


def test_degeneracy_full_inventory():
    """Each named constant is continuous through K = 0 to 1e-8 relative."""
    for name, (fn, grid) in co.CONSTANT_INVENTORY.items():
        for params in grid:
            base = fn(0.0, **params)
            for K in (1e-9, -1e-9):
                near = fn(K, **params)
                assert near == pytest.approx(base, rel=1e-8), (
                    f"{name}{params} jumps at K={K}: {near} vs {base}"
                )


def test_degeneracy_taylor_switch_is_smooth():
    # values straddling the series/expm1 switch agree to near machine precision
    for a in (9.9e-9, 1.01e-8):
        assert co.coeff_F(a, 1.0) == pytest.approx(1.0 + a / 2.0, rel=1e-12)


def test_variance_weights_consistency():
    # upper and lower gradient weights swap the sign of K
    K, t = -0.7, 0.9
    assert co.variance_upper_grad(K, t) == pytest.approx(
        co.variance_lower_grad(-K, t), rel=1e-14
    )


def test_explicit_H1_reduces_at_s_zero():
    # with s = 0 the dimension cost vanishes and the distance weight is the
    # plain kernel exponent coefficient
    K, t = -0.5, 0.4
    assert co.explicit_H1_dim(K, 3.0, t, 0.0) == 0.0
    assert co.explicit_H1_dist(K, t, 0.0) == pytest.approx(
        1.0 / (4.0 * co.coeff_F(-2.0 * K, t)), rel=1e-14
    )


def test_heat_lower_exponent_scale():
    K, t = -1.0, 0.3
    got = co.heat_lower_exponent(K, t, 2.0)
    assert got == pytest.approx(-4.0 / (2.0 * co.coeff_F(1.0, t)), rel=1e-14)
    assert got < 0.0


def test_local_logsob_weight_doubles_plain_form():
    # the working weight is twice (e^{2Kt}-1)/K in every regime
    for K in (-1.0, 0.0, 0.8):
        for t in (0.05, 0.5):
            assert co.local_logsob_grad(K, t) == pytest.approx(
                4.0 * co.coeff_F(2.0 * K, t), rel=1e-15
            )


@given(
    K=st.floats(-3.0, -1e-3),
    n=st.floats(1.5, 10.0),
    t=st.floats(1e-3, 3.0),
)
@settings(max_examples=300)
def test_sharp_rate_beats_plain_rate_for_negative_K(K, n, t):
    sharp = co.contraction_rate(K, n, t, sharp=True)
    plain = co.contraction_rate(K, n, t, sharp=False)
    assert sharp <= plain  # n/(n-1) > 1 amplifies a negative exponent


def test_sharp_rate_requires_negative_K():
    with pytest.raises(ValueError):
        co.contraction_rate(0.0, 2.0, 1.0, sharp=True)


@given(
    K=st.floats(-2.0, 2.0),
    n=st.floats(1.5, 8.0),
    r=st.floats(0.0, 1.5),
)
@settings(max_examples=400)
def test_rho_tilde_orders_against_distance(K, n, r):
    val = co.rho_tilde_scalar(K, n, r)
    assert val >= 0.0
    if K < 0.0:
        assert val <= r + 1e-12  # sin compression
    elif K > 0.0:
        assert val >= r - 1e-12  # sinh stretch
    else:
        assert val == r


def test_rho_tilde_matches_closed_form():
    K, n, r = -1.0, 2.0, 1.2
    assert co.rho_tilde_scalar(K, n, r) == pytest.approx(
        2.0 * math.sin(0.6), rel=1e-14
    )


def test_rho_tilde_domain_errors():
    with pytest.raises(ValueError):
        co.rho_tilde_scalar(-1.0, 2.0, math.pi + 0.1)  # beyond the diameter bound
    with pytest.raises(ValueError):
        co.rho_tilde_scalar(-1.0, 1.0, 0.5)  # needs n > 1
    with pytest.raises(ValueError):
        co.rho_tilde_scalar(-1.0, 2.0, -0.1)


def test_rho_tilde_taylor_branch_is_continuous():
    n = 3.0
    r = 1e-5
    for K in (1e-4, -1e-4):
        exact = co.rho_tilde_scalar(K, n, 1.0)  # exercises the closed form
        assert np.isfinite(exact)
        tiny = co.rho_tilde_scalar(K, n, r)
        assert tiny == pytest.approx(r, rel=1e-10)
