"""Curvature-dependent coefficients with stable K -> 0 degeneration.

Every bound in the suite is assembled from two primitives::

    F(a, t) = (e^{at} - 1) / a          -> t        as a -> 0
    G(a, t) = (e^{at} - 1 - at) / a^2   -> t^2 / 2  as a -> 0

evaluated through ``expm1`` for moderate arguments and three-term Taylor
expansions once |a t| < 1e-8, so the flat case K = 0 and its neighborhood
K = +-1e-9 produce identical digits.  The named constants below are the
full inventory used by the checks; ``CONSTANT_INVENTORY`` drives the
degeneracy-continuity property test (each entry evaluated near K = 0 must
match its K = 0 branch to 1e-8 relative).
"""
from __future__ import annotations

import math
from typing import Callable

# below the switch, three-term series (truncation ~ x^3/24, < 1e-19);
# above it, expm1 cancellation costs at most ~2 eps / x < 1e-9 relative
_TAYLOR_SWITCH = 1e-6


def coeff_F(a: float, t: float) -> float:
    """(e^{at} - 1)/a, continuous through a = 0."""
    x = a * t
    if abs(x) < _TAYLOR_SWITCH:
        return t * (1.0 + x / 2.0 + x * x / 6.0)
    return math.expm1(x) / a


def coeff_G(a: float, t: float) -> float:
    """(e^{at} - 1 - at)/a^2, continuous through a = 0."""
    x = a * t
    if abs(x) < _TAYLOR_SWITCH:
        return 0.5 * t * t * (1.0 + x / 3.0 + x * x / 12.0)
    return (math.expm1(x) - x) / (a * a)


# -- named constants, phrased exactly as they appear in the bounds --------


def grad_closed_dim(K: float, n: float, t: float) -> float:
    """(e^{2Kt} - 1)/(Kn): weight of (P_t L f)^2 in the closed gradient bound."""
    if math.isinf(n):
        return 0.0
    return 2.0 * coeff_F(2.0 * K, t) / n


def variance_upper_grad(K: float, t: float) -> float:
    """(e^{2Kt} - 1)/K: weight of P_t Gamma(f) in the variance upper bound."""
    return 2.0 * coeff_F(2.0 * K, t)


def variance_upper_dim(K: float, n: float, t: float) -> float:
    """(e^{2Kt} - 1 - 2Kt)/(K^2 n): dimension deduction in the upper bound."""
    if math.isinf(n):
        return 0.0
    return 4.0 * coeff_G(2.0 * K, t) / n


def variance_lower_grad(K: float, t: float) -> float:
    """(1 - e^{-2Kt})/K: weight of Gamma(P_t f) in the variance lower bound."""
    return 2.0 * coeff_F(-2.0 * K, t)


def variance_lower_dim(K: float, n: float, t: float) -> float:
    """(e^{-2Kt} - 1 + 2Kt)/(K^2 n): dimension addition in the lower bound."""
    if math.isinf(n):
        return 0.0
    return 4.0 * coeff_G(-2.0 * K, t) / n


def harnack_phi_weight(K: float, phi_s: float) -> float:
    """K/(1 - e^{-2K phi}): schedule penalty density in the log-Harnack bound.

    Diverges like 1/(2 phi) as phi -> 0; callers multiply by (phi'-1)^2
    which vanishes there.
    """
    return 1.0 / (2.0 * coeff_F(-2.0 * K, phi_s))


def explicit_H1_dist(K: float, t: float, s: float) -> float:
    """K(t+2s)/(2t(1-e^{-2K(t+s)})): distance-squared weight in (H1)."""
    return (t + 2.0 * s) / (4.0 * t * coeff_F(-2.0 * K, t + s))


def explicit_H1_dim(K: float, n: float, t: float, s: float) -> float:
    """nKs^2/(2t(1-e^{-Kt})): additive dimension cost in (H1)."""
    return n * s * s / (2.0 * t * coeff_F(-K, t))


def explicit_H2_dist(K: float, t: float, s: float) -> float:
    """K/(2(1-e^{-2Kt}) + 4Ks e^{-2Kt}): distance-squared weight in (H2)."""
    return 1.0 / (4.0 * coeff_F(-2.0 * K, t) + 4.0 * s * math.exp(-2.0 * K * t))


def explicit_H2_dim(K: float, n: float, t: float, s: float) -> float:
    """Kns/(4(1-e^{-2Kt})): additive dimension cost in (H2)."""
    return n * s / (8.0 * coeff_F(-2.0 * K, t))


def heat_lower_exponent(K: float, t: float, rho: float) -> float:
    """-K rho^2/(2(1-e^{-Kt})): exponent of the heat-kernel lower bound."""
    return -rho * rho / (2.0 * coeff_F(-K, t))


def local_logsob_grad(K: float, t: float) -> float:
    """2(e^{2Kt}-1)/K: weight of P_t Gamma(f) in the local log-Sobolev bound.

    Sharp for exponential f in flat space (the smaller weight (e^{2Kt}-1)/K
    fails already there by a factor of two, while the substitution
    r = 2(e^{2Kt}-1)/K turns this bound into the tight entropy-transport
    estimate with Dirichlet weight r, fixing the constant).
    """
    return 4.0 * coeff_F(2.0 * K, t)


def contraction_rate(K: float, n: float, t: float, sharp: bool) -> float:
    """e^{Kt}, or the W_1 rate e^{nKt/(n-1)} when ``sharp`` (requires K<0)."""
    if sharp:
        if not K < 0.0:
            raise ValueError("the sharp contraction rate requires K < 0")
        return math.exp(n * K * t / (n - 1.0))
    return math.exp(K * t)


def rho_tilde_scalar(K: float, n: float, r: float) -> float:
    """Modified distance: sin-compressed for K<0, sinh-stretched for K>0.

    Taylor branch r(1 + Kr^2/(24(n-1)) + (Kr^2/(n-1))^2/1920) is used when
    |K| r^2 < 1e-8, covering both signs at once.
    """
    if not n > 1.0:
        raise ValueError(f"rho_tilde needs n > 1, got {n}")
    if r < 0.0:
        raise ValueError(f"distance must be nonnegative, got {r}")
    if abs(K) * r * r < _TAYLOR_SWITCH:
        u = K * r * r / (n - 1.0)
        return r * (1.0 + u / 24.0 + u * u / 1920.0)
    alpha = math.sqrt(abs(K) / (n - 1.0))
    half = 0.5 * r * alpha
    if K < 0.0:
        if half > 0.5 * math.pi + 1e-9:
            raise ValueError(
                f"distance {r} exceeds the diameter bound pi/sqrt(-K/(n-1)) "
                "implied by the curvature assumption"
            )
        return 2.0 * math.sin(half) / alpha
    return 2.0 * math.sinh(half) / alpha


# -- inventory for the degeneracy-continuity sweep ------------------------

# name -> (callable taking (K, **params), list of parameter dicts)
CONSTANT_INVENTORY: dict[str, tuple[Callable[..., float], list[dict]]] = {
    "grad_closed_dim": (
        grad_closed_dim,
        [{"n": n, "t": t} for n in (1.0, 3.0) for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "variance_upper_grad": (
        variance_upper_grad,
        [{"t": t} for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "variance_upper_dim": (
        variance_upper_dim,
        [{"n": n, "t": t} for n in (2.0, 3.0) for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "variance_lower_grad": (
        variance_lower_grad,
        [{"t": t} for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "variance_lower_dim": (
        variance_lower_dim,
        [{"n": n, "t": t} for n in (2.0, 3.0) for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "local_logsob_grad": (
        local_logsob_grad,
        [{"t": t} for t in (0.01, 0.1, 1.0, 5.0)],
    ),
    "harnack_phi_weight": (
        harnack_phi_weight,
        [{"phi_s": p} for p in (0.001, 0.05, 0.5, 2.0)],
    ),
    "explicit_H1_dist": (
        explicit_H1_dist,
        [{"t": t, "s": s} for t in (0.1, 0.5, 1.0) for s in (0.0, 0.25, 1.0)],
    ),
    "explicit_H1_dim": (
        explicit_H1_dim,
        [{"n": 3.0, "t": t, "s": s} for t in (0.1, 0.5, 1.0) for s in (0.0, 0.25)],
    ),
    "explicit_H2_dist": (
        explicit_H2_dist,
        [{"t": t, "s": s} for t in (0.1, 0.5, 1.0) for s in (0.0, 0.25, 1.0)],
    ),
    "explicit_H2_dim": (
        explicit_H2_dim,
        [{"n": 3.0, "t": t, "s": s} for t in (0.1, 0.5, 1.0) for s in (0.0, 0.25)],
    ),
    "heat_lower_exponent": (
        heat_lower_exponent,
        [{"t": t, "rho": r} for t in (0.05, 0.5, 2.0) for r in (0.5, 1.5, 3.0)],
    ),
    "rho_tilde": (
        rho_tilde_scalar,
        [{"n": n, "r": r} for n in (2.0, 3.0) for r in (0.1, 1.0, 2.0)],
    ),
}
