"""Signed-margin checks for the semigroup consequences of a curvature bound.

Every inequality is normalized to the form lhs <= rhs and reported as
margin = rhs - lhs, so healthy configurations produce nonnegative margins
and anything below -tol is a violation.  Field checks minimize the margin
over the masked nodes of the space; pair checks minimize over a grid of
(x, y) node pairs.  Each check returns a CheckReport carrying the witness
(arg-min location) and any numerical caveats in ``flags``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_legendre

from . import transport
from .coefficients import (
    coeff_F,
    contraction_rate,
    explicit_H1_dim,
    explicit_H1_dist,
    explicit_H2_dim,
    explicit_H2_dist,
    grad_closed_dim,
    harnack_phi_weight,
    heat_lower_exponent,
    local_logsob_grad,
    variance_lower_dim,
    variance_lower_grad,
    variance_upper_dim,
    variance_upper_grad,
)
from .generator import Generator
from .model_space import ModelSpace
from .semigroup import (
    SemigroupCache,
    apply_semigroup,
    heat_kernel,
    spectral_gap,
    sphere_kernel_series,
)

logger = logging.getLogger(__name__)

GRAD_EPS = 1e-12
_KERNEL_FLOOR = 1e-300
_LEGENDRE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


@dataclass
class CheckReport:
    """Outcome of one inequality check at one parameter point."""

    statement: str
    params: dict
    lhs: float
    rhs: float
    margin: float
    tol: float
    passed: bool
    witness: dict
    flags: dict = field(default_factory=dict)


@dataclass
class EvalContext:
    """Bundle of the objects every checker needs."""

    space: ModelSpace
    gen: Generator
    cache: SemigroupCache
    K: float
    n: float
    tol: float
    quad_tol: float = 1e-10
    eps_grad: float = GRAD_EPS

    def semigroup(self, f: np.ndarray, t: float) -> np.ndarray:
        return apply_semigroup(self.cache, f, t)


# -- quadrature -----------------------------------------------------------

def _legendre(k: int) -> tuple[np.ndarray, np.ndarray]:
    if k not in _LEGENDRE_CACHE:
        _LEGENDRE_CACHE[k] = roots_legendre(k)
    return _LEGENDRE_CACHE[k]


def adaptive_quadrature(
    fn: Callable[[float], np.ndarray | float],
    a: float,
    b: float,
    breakpoints: Sequence[float] = (),
    tol: float = 1e-10,
    max_per_segment: int = 256,
) -> tuple[np.ndarray | float, float, int]:
    """Composite Gauss-Legendre integral of fn over [a, b].

    The rule doubles its node count until two consecutive levels agree to
    ``tol`` in sup norm.  Returns (value, error_estimate, nodes_used).
    Segment boundaries in ``breakpoints`` let piecewise-smooth integrands
    (like ramp schedules) keep spectral convergence.
    """
    if b <= a:
        return 0.0, 0.0, 0
    edges = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    prev = None
    k = 16
    while True:
        total: Optional[np.ndarray] = None
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs, ws = _legendre(k)
            mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            contrib = None
            for xq, wq in zip(xs, ws):
                term = wq * np.asarray(fn(mid + half * xq), dtype=float)
                contrib = term if contrib is None else contrib + term
            contrib = contrib * half
            total = contrib if total is None else total + contrib
        if prev is not None:
            err = float(np.max(np.abs(total - prev)))
            # stop on the integrand's own scale: demanding absolute accuracy
            # from an O(100) integral just chases roundoff
            goal = tol * max(1.0, float(np.max(np.abs(total))))
            if err <= goal or k >= max_per_segment:
                if err > goal:
                    # missing the requested tol by a little is routine for
                    # kernel-weighted integrands and is recorded in the
                    # report flags; only a material miss deserves a warning
                    level = logging.WARNING if err > 1e5 * goal else logging.DEBUG
                    logger.log(
                        level, "quadrature stalled at %d nodes/segment (err %.2e)", k, err
                    )
                return total, err, k * (len(edges) - 1)
        prev = total
        k *= 2


# -- time schedules for the log-Harnack check -----------------------------

@dataclass(frozen=True)
class PhiSchedule:
    """Increasing C^1-in-pieces time change with phi(0) = 0, phi'(0) = 1."""

    fn: Callable[[float], float]
    dfn: Callable[[float], float]
    breakpoints: tuple[float, ...] = ()
    label: str = "identity"


def identity_schedule() -> PhiSchedule:
    return PhiSchedule(lambda s: s, lambda s: 1.0)


def quadratic_schedule(c: float) -> PhiSchedule:
    """phi(s) = s + c s^2; increasing on [0, t] as long as 1 + 2ct > 0."""
    return PhiSchedule(
        lambda s: s + c * s * s, lambda s: 1.0 + 2.0 * c * s, (), f"quadratic({c:g})"
    )


def ramp_schedule(t: float, s_extra: float) -> PhiSchedule:
    """Unit slope until t/2, then constant slope reaching t + s_extra at t."""
    if t <= 0.0 or s_extra < 0.0:
        raise ValueError("ramp schedule needs t > 0 and s_extra >= 0")
    rate = (t + 2.0 * s_extra) / t

    def fn(s: float) -> float:
        return s if s <= t / 2.0 else t / 2.0 + rate * (s - t / 2.0)

    def dfn(s: float) -> float:
        return 1.0 if s <= t / 2.0 else rate

    return PhiSchedule(fn, dfn, (t / 2.0,), f"ramp({t:g},{s_extra:g})")


def _validate_schedule(schedule: PhiSchedule, t: float) -> None:
    if abs(schedule.fn(0.0)) > 1e-12:
        raise ValueError(f"schedule {schedule.label} must start at 0")
    if abs(schedule.dfn(0.0) - 1.0) > 1e-9:
        raise ValueError(f"schedule {schedule.label} must have unit initial slope")
    grid = np.linspace(0.0, t, 65)[1:]
    vals = np.array([schedule.fn(s) for s in grid])
    if np.any(np.diff(np.concatenate([[0.0], vals])) <= 0.0):
        raise ValueError(f"schedule {schedule.label} is not increasing on [0, {t}]")


# -- report assembly ------------------------------------------------------

def _node_witness(space: ModelSpace, i: int) -> dict:
    coord = np.atleast_1d(np.asarray(space.points[i], dtype=float))
    return {"node": int(i), "coord": [float(c) for c in coord]}


def _pair_witness(space: ModelSpace, ix: int, iy: int) -> dict:
    wx = _node_witness(space, ix)
    wy = _node_witness(space, iy)
    return {
        "x_node": wx["node"],
        "x_coord": wx["coord"],
        "y_node": wy["node"],
        "y_coord": wy["coord"],
    }


def _field_report(
    ctx: EvalContext,
    statement: str,
    params: dict,
    lhs_field: np.ndarray,
    rhs_field: np.ndarray,
    flags: Optional[dict] = None,
) -> CheckReport:
    margin_field = rhs_field - lhs_field
    masked = np.where(ctx.space.margin_mask, margin_field, np.inf)
    i = int(np.argmin(masked))
    margin = float(masked[i])
    return CheckReport(
        statement=statement,
        params=params,
        lhs=float(lhs_field[i]),
        rhs=float(rhs_field[i]),
        margin=margin,
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness=_node_witness(ctx.space, i),
        flags=flags or {},
    )


def _pair_report(
    ctx: EvalContext,
    statement: str,
    params: dict,
    lhs_mat: np.ndarray,
    rhs_mat: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    flags: Optional[dict] = None,
) -> CheckReport:
    margin_mat = rhs_mat - lhs_mat
    flat = int(np.argmin(margin_mat))
    a, b = np.unravel_index(flat, margin_mat.shape)
    margin = float(margin_mat[a, b])
    return CheckReport(
        statement=statement,
        params=params,
        lhs=float(lhs_mat[a, b]),
        rhs=float(rhs_mat[a, b]),
        margin=margin,
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness=_pair_witness(ctx.space, int(xs[a]), int(ys[b])),
        flags=flags or {},
    )


def _require_positive(f: np.ndarray, statement: str) -> None:
    fmin = float(np.min(f))
    if not fmin > 0.0:
        raise ValueError(f"{statement} needs a strictly positive sample (min {fmin})")


def _safe_log(arr: np.ndarray) -> tuple[np.ndarray, int]:
    clamped = int(np.count_nonzero(arr < _KERNEL_FLOOR))
    return np.log(np.maximum(arr, _KERNEL_FLOOR)), clamped


# -- gradient and variance comparison fields ------------------------------

def gradient1_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Integral-form gradient bound: the sharpest of the family."""
    gen, K, n = ctx.gen, ctx.K, ctx.n
    ptf = ctx.semigroup(f, t)
    lhs = gen.gamma(ptf)
    rhs = math.exp(2.0 * K * t) * ctx.semigroup(gen.gamma(f), t)
    flags: dict = {"quad_err": 0.0, "quad_nodes": 0}
    if np.isfinite(n):
        lf = gen.apply(f)

        def integrand(s: float) -> np.ndarray:
            inner = ctx.semigroup(lf, t - s)
            return math.exp(2.0 * K * s) * ctx.semigroup(inner * inner, s)

        integral, qerr, qn = adaptive_quadrature(integrand, 0.0, t, tol=ctx.quad_tol)
        rhs = rhs - (2.0 / n) * integral
        flags = {"quad_err": qerr, "quad_nodes": qn}
    return lhs, rhs, flags


def gradient2_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Closed-form gradient bound with the dimension deduction."""
    gen, K, n = ctx.gen, ctx.K, ctx.n
    ptf = ctx.semigroup(f, t)
    lhs = gen.gamma(ptf)
    ptlf = ctx.semigroup(gen.apply(f), t)
    rhs = (
        math.exp(2.0 * K * t) * ctx.semigroup(gen.gamma(f), t)
        - grad_closed_dim(K, n, t) * ptlf * ptlf
    )
    return lhs, rhs, {}


def variance3_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Local variance upper bound."""
    gen, K, n = ctx.gen, ctx.K, ctx.n
    ptf = ctx.semigroup(f, t)
    lhs = ctx.semigroup(f * f, t) - ptf * ptf
    ptlf = ctx.semigroup(gen.apply(f), t)
    rhs = (
        variance_upper_grad(K, t) * ctx.semigroup(gen.gamma(f), t)
        - variance_upper_dim(K, n, t) * ptlf * ptlf
    )
    return lhs, rhs, {}


def variance4_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Local variance lower bound (margin is variance minus the bound)."""
    gen, K, n = ctx.gen, ctx.K, ctx.n
    ptf = ctx.semigroup(f, t)
    variance = ctx.semigroup(f * f, t) - ptf * ptf
    ptlf = ctx.semigroup(gen.apply(f), t)
    lhs = (
        variance_lower_grad(K, t) * gen.gamma(ptf)
        + variance_lower_dim(K, n, t) * ptlf * ptlf
    )
    return lhs, variance, {}


def drift_gradient5_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Square-root gradient commutation with the drift-interaction term.

    Gradient norms are regularized as sqrt(Gamma + eps); the flags record
    how far the minimal margin moves when eps shrinks tenfold, which keeps
    an eye on regularization sensitivity near critical points.
    """
    gen, K, n = ctx.gen, ctx.K, ctx.n
    d = float(ctx.space.dim)
    has_drift = ctx.space.spec.potential is not None
    if has_drift and np.isfinite(n) and not n > d:
        raise ValueError(f"drift gradient bound needs n > d, got n={n}, d={d}")

    def margin_fields(eps: float) -> tuple[np.ndarray, np.ndarray, float, int]:
        ptf = ctx.semigroup(f, t)
        rhs = math.exp(K * t) * ctx.semigroup(np.sqrt(gen.gamma(f) + eps), t)
        lhs = np.sqrt(gen.gamma(ptf) + eps)
        qerr, qn = 0.0, 0
        if has_drift and np.isfinite(n):

            def integrand(s: float) -> np.ndarray:
                g = ctx.semigroup(f, t - s)
                dg = gen.drift_gamma(g)
                ratio = dg * dg / np.sqrt(gen.gamma(g) + eps)
                return math.exp(K * s) * ctx.semigroup(ratio, s)

            integral, qerr, qn = adaptive_quadrature(
                integrand, 0.0, t, tol=ctx.quad_tol
            )
            lhs = lhs + integral / (n - d)
        return lhs, rhs, qerr, qn

    lhs, rhs, qerr, qn = margin_fields(ctx.eps_grad)
    lhs10, rhs10, _, _ = margin_fields(ctx.eps_grad / 10.0)
    mask = ctx.space.margin_mask
    shift = float(
        np.min((rhs10 - lhs10)[mask]) - np.min((rhs - lhs)[mask])
    )
    flags = {"quad_err": qerr, "quad_nodes": qn, "eps_shift": shift}
    return lhs, rhs, flags


def local_logsob_fields(
    ctx: EvalContext, f: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Semigroup log-Sobolev bound on P_t(f^2 log f^2)."""
    gen, K = ctx.gen, ctx.K
    g = f * f + ctx.eps_grad
    ptg = ctx.semigroup(g, t)
    log_ptg, clamped = _safe_log(ptg)
    lhs = ctx.semigroup(g * np.log(g), t)
    rhs = ptg * log_ptg + local_logsob_grad(K, t) * ctx.semigroup(gen.gamma(f), t)
    return lhs, rhs, {"clamped": clamped}


_FIELD_CHECKS: dict[str, Callable[..., tuple[np.ndarray, np.ndarray, dict]]] = {
    "gradient1": gradient1_fields,
    "gradient2": gradient2_fields,
    "variance3": variance3_fields,
    "variance4": variance4_fields,
    "drift_gradient5": drift_gradient5_fields,
    "local_logsob": local_logsob_fields,
}


def evaluate_field_statement(
    ctx: EvalContext,
    statement: str,
    f: np.ndarray,
    t: float,
    sample: Optional[str] = None,
) -> CheckReport:
    """Run one node-field check and reduce it to its worst-node report."""
    if t <= 0.0:
        raise ValueError(f"field checks need t > 0, got {t}")
    try:
        fields = _FIELD_CHECKS[statement]
    except KeyError:
        raise KeyError(
            f"unknown field statement {statement!r}; have {sorted(_FIELD_CHECKS)}"
        ) from None
    lhs, rhs, flags = fields(ctx, np.asarray(f, dtype=float), t)
    params = {"t": t}
    if sample is not None:
        params["sample"] = sample
    return _field_report(ctx, statement, params, lhs, rhs, flags)


# -- log-Harnack with a time schedule (statement 6) -----------------------

def evaluate_log_harnack6(
    ctx: EvalContext,
    f: np.ndarray,
    t: float,
    pairs: tuple[np.ndarray, np.ndarray],
    schedule: Optional[PhiSchedule] = None,
    sample: Optional[str] = None,
) -> CheckReport:
    """Schedule-weighted log-Harnack estimate between node pairs."""
    if t <= 0.0:
        raise ValueError(f"log-Harnack needs t > 0, got {t}")
    schedule = schedule or identity_schedule()
    _validate_schedule(schedule, t)
    f = np.asarray(f, dtype=float)
    _require_positive(f, "log_harnack6")
    K, n = ctx.K, ctx.n

    phi_t = float(schedule.fn(t))
    plog = ctx.semigroup(np.log(f), phi_t)
    ptf = ctx.semigroup(f, t)
    log_ptf, clamped = _safe_log(ptf)

    denom, qerr1, qn1 = adaptive_quadrature(
        lambda s: math.exp(-2.0 * K * schedule.fn(s)),
        0.0,
        t,
        breakpoints=schedule.breakpoints,
        tol=ctx.quad_tol,
    )

    identity_like = not schedule.breakpoints and schedule.label == "identity"
    if identity_like:
        penalty, qerr2, qn2 = 0.0, 0.0, 0
    else:
        if not np.isfinite(n):
            raise ValueError("schedule penalties need a finite dimension")

        def pen_integrand(s: float) -> float:
            slope = schedule.dfn(s) - 1.0
            if slope == 0.0:
                return 0.0
            return (n / 4.0) * slope * slope * harnack_phi_weight(K, schedule.fn(s))

        penalty, qerr2, qn2 = adaptive_quadrature(
            pen_integrand, 0.0, t, breakpoints=schedule.breakpoints, tol=ctx.quad_tol
        )

    xs, ys = (np.asarray(pairs[0], dtype=int), np.asarray(pairs[1], dtype=int))
    rho = ctx.space.pairwise_distance(xs, ys)
    rhs = log_ptf[xs][:, None] + rho * rho / (4.0 * denom) + float(penalty)
    lhs = np.broadcast_to(plog[ys][None, :], rhs.shape)
    params = {"t": t, "schedule": schedule.label}
    if sample is not None:
        params["sample"] = sample
    flags = {
        "quad_err": max(qerr1, qerr2),
        "quad_nodes": qn1 + qn2,
        "clamped": clamped,
        "schedule_mass": float(denom),
    }
    return _pair_report(ctx, "log_harnack6", params, lhs, rhs, xs, ys, flags)


# -- explicit two-time Harnack bounds (H1), (H2) --------------------------

def evaluate_explicit_H1(
    ctx: EvalContext,
    f: np.ndarray,
    t: float,
    s: float,
    pairs: tuple[np.ndarray, np.ndarray],
    sample: Optional[str] = None,
) -> CheckReport:
    """Entropy bound on P_{t+s} log f against log P_t f across pairs."""
    if t <= 0.0 or s < 0.0:
        raise ValueError(f"explicit_H1 needs t > 0 and s >= 0, got t={t}, s={s}")
    f = np.asarray(f, dtype=float)
    _require_positive(f, "explicit_H1")
    plog = ctx.semigroup(np.log(f), t + s)
    log_ptf, clamped = _safe_log(ctx.semigroup(f, t))
    xs, ys = (np.asarray(pairs[0], dtype=int), np.asarray(pairs[1], dtype=int))
    rho = ctx.space.pairwise_distance(xs, ys)
    rhs = (
        log_ptf[xs][:, None]
        + explicit_H1_dist(ctx.K, t, s) * rho * rho
        + explicit_H1_dim(ctx.K, ctx.n, t, s)
    )
    lhs = np.broadcast_to(plog[ys][None, :], rhs.shape)
    params = {"t": t, "s": s}
    if sample is not None:
        params["sample"] = sample
    return _pair_report(
        ctx, "explicit_H1", params, lhs, rhs, xs, ys, {"clamped": clamped}
    )


def evaluate_explicit_H2(
    ctx: EvalContext,
    f: np.ndarray,
    t: float,
    s: float,
    pairs: tuple[np.ndarray, np.ndarray],
    sample: Optional[str] = None,
) -> CheckReport:
    """Entropy bound on P_t log f against log P_{t+s} f across pairs."""
    if t <= 0.0 or s < 0.0:
        raise ValueError(f"explicit_H2 needs t > 0 and s >= 0, got t={t}, s={s}")
    f = np.asarray(f, dtype=float)
    _require_positive(f, "explicit_H2")
    plog = ctx.semigroup(np.log(f), t)
    log_pts, clamped = _safe_log(ctx.semigroup(f, t + s))
    xs, ys = (np.asarray(pairs[0], dtype=int), np.asarray(pairs[1], dtype=int))
    rho = ctx.space.pairwise_distance(xs, ys)
    rhs = (
        log_pts[xs][:, None]
        + explicit_H2_dist(ctx.K, t, s) * rho * rho
        + explicit_H2_dim(ctx.K, ctx.n, t, s)
    )
    lhs = np.broadcast_to(plog[ys][None, :], rhs.shape)
    params = {"t": t, "s": s}
    if sample is not None:
        params["sample"] = sample
    return _pair_report(
        ctx, "explicit_H2", params, lhs, rhs, xs, ys, {"clamped": clamped}
    )


# -- heat-kernel checks ---------------------------------------------------

def _kernel_row(ctx: EvalContext, t: float, index: int, source: str) -> tuple[np.ndarray, int]:
    if source == "cache":
        row = heat_kernel(ctx.cache, t, index)
        return row.density, row.clamped
    if source == "series":
        if ctx.space.kind != "sphere2":
            raise ValueError("series kernel rows exist only on the sphere")
        cosang = np.clip(ctx.space.points @ ctx.space.points[index], -1.0, 1.0)
        return sphere_kernel_series(t, cosang), 0
    raise ValueError(f"unknown kernel source {source!r}")


def _require_probability(ctx: EvalContext, statement: str) -> None:
    total = float(np.sum(ctx.space.weights))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(
            f"{statement} assumes a probability measure; total mass is {total:g} "
            "(build the space with normalize_measure)"
        )


def evaluate_kernel_KL(
    ctx: EvalContext,
    variant: str,
    t: float,
    s: float,
    pairs: tuple[np.ndarray, np.ndarray],
    source: str = "cache",
) -> CheckReport:
    """Relative entropy between kernel rows against the Harnack constants.

    variant "H1p": KL(p_{t+s}(y, .) | p_t(x, .)) vs the (H1) right side.
    variant "H2p": KL(p_t(y, .) | p_{t+s}(x, .)) vs the (H2) right side.
    """
    if variant not in ("H1p", "H2p"):
        raise ValueError(f"variant must be H1p or H2p, got {variant!r}")
    if t <= 0.0 or s < 0.0:
        raise ValueError(f"kernel KL needs t > 0 and s >= 0, got t={t}, s={s}")
    _require_probability(ctx, f"kernel_KL_{variant}")
    xs, ys = (np.asarray(pairs[0], dtype=int), np.asarray(pairs[1], dtype=int))
    w = ctx.space.weights
    t_num, t_den = (t + s, t) if variant == "H1p" else (t, t + s)
    rows_num = [_kernel_row(ctx, t_num, iy, source) for iy in ys]
    rows_den = [_kernel_row(ctx, t_den, ix, source) for ix in xs]
    clamped = sum(c for _, c in rows_num) + sum(c for _, c in rows_den)
    kl = np.empty((xs.size, ys.size))
    for a, (den, _) in enumerate(rows_den):
        logden = np.log(np.maximum(den, _KERNEL_FLOOR))
        for b, (num, _) in enumerate(rows_num):
            lognum = np.log(np.maximum(num, _KERNEL_FLOOR))
            kl[a, b] = float(np.sum(w * num * (lognum - logden)))
    rho = ctx.space.pairwise_distance(xs, ys)
    if variant == "H1p":
        bound = explicit_H1_dist(ctx.K, t, s) * rho**2 + explicit_H1_dim(
            ctx.K, ctx.n, t, s
        )
    else:
        bound = explicit_H2_dist(ctx.K, t, s) * rho**2 + explicit_H2_dim(
            ctx.K, ctx.n, t, s
        )
    flags = {"clamped": clamped, "degraded": bool(not np.all(np.isfinite(kl)))}
    params = {"t": t, "s": s, "source": source}
    return _pair_report(
        ctx, f"kernel_KL_{variant}", params, kl, bound, xs, ys, flags
    )


def evaluate_kernel_lower(
    ctx: EvalContext,
    t: float,
    rows: Sequence[int],
    source: str = "cache",
) -> CheckReport:
    """Gaussian-free heat kernel lower bound over whole kernel rows."""
    if t <= 0.0:
        raise ValueError(f"kernel lower bound needs t > 0, got {t}")
    _require_probability(ctx, "kernel_lower_heat")
    rows = np.asarray(rows, dtype=int)
    worst = (np.inf, 0, 0)  # margin, x, y
    lhs_val = rhs_val = 0.0
    clamped = 0
    denom = -heat_lower_exponent(ctx.K, t, 1.0)  # rho^2 coefficient
    for ix in rows:
        density, cl = _kernel_row(ctx, t, int(ix), source)
        clamped += cl
        rho = ctx.space.pairwise_distance(np.array([ix]), np.arange(ctx.space.n_nodes))[0]
        bound = np.exp(-denom * rho * rho)
        margin_row = density - bound
        j = int(np.argmin(margin_row))
        if margin_row[j] < worst[0]:
            worst = (float(margin_row[j]), int(ix), j)
            lhs_val, rhs_val = float(bound[j]), float(density[j])
    margin, ix, iy = worst
    return CheckReport(
        statement="kernel_lower_heat",
        params={"t": t, "source": source},
        lhs=lhs_val,
        rhs=rhs_val,
        margin=margin,
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness=_pair_witness(ctx.space, ix, iy),
        flags={"clamped": clamped, "rows": int(rows.size)},
    )


def evaluate_kernel_lower_series(
    K: float,
    t_values: Sequence[float],
    theta_values: Sequence[float],
    tol: float,
) -> CheckReport:
    """Round-sphere kernel series against the lower bound on a (t, angle) grid.

    Mesh-free variant: the left side is the Legendre expansion of the round
    kernel and the right side the closed-form exponential, so nothing here
    depends on a discretization.  Reduced to the worst grid point.
    """
    ts = np.asarray(t_values, dtype=float)
    thetas = np.asarray(theta_values, dtype=float)
    if ts.size == 0 or thetas.size == 0:
        raise ValueError("need nonempty t and angle grids")
    if np.any(ts <= 0.0):
        raise ValueError("series kernel needs t > 0")
    cosang = np.cos(thetas)
    worst = (np.inf, 0, 0)
    lhs_val = rhs_val = 0.0
    for a, t in enumerate(ts):
        density = sphere_kernel_series(float(t), cosang)
        denom = -heat_lower_exponent(K, float(t), 1.0)  # rho^2 coefficient
        bound = np.exp(-denom * thetas * thetas)
        margin_row = density - bound
        j = int(np.argmin(margin_row))
        if margin_row[j] < worst[0]:
            worst = (float(margin_row[j]), a, j)
            lhs_val, rhs_val = float(bound[j]), float(density[j])
    margin, a, j = worst
    return CheckReport(
        statement="kernel_lower_heat",
        params={"source": "series"},
        lhs=lhs_val,
        rhs=rhs_val,
        margin=margin,
        tol=tol,
        passed=bool(margin >= -tol),
        witness={"t": float(ts[a]), "angle": float(thetas[j])},
        flags={"grid": [int(ts.size), int(thetas.size)]},
    )


# -- spectral gap (Lichnerowicz) ------------------------------------------

def evaluate_lichnerowicz(ctx: EvalContext) -> CheckReport:
    """Spectral gap against the dimension-improved curvature bound."""
    if not (ctx.K < 0.0 and ctx.n > 1.0):
        raise ValueError("the spectral gap bound needs K < 0 and n > 1")
    gap = spectral_gap(ctx.cache)
    bound = ctx.n * (-ctx.K) / (ctx.n - 1.0)
    margin = gap - bound
    return CheckReport(
        statement="lichnerowicz",
        params={},
        lhs=bound,
        rhs=gap,
        margin=float(margin),
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness={},
        flags={"spectral_gap": gap},
    )


# -- entropy-transport checks (HW0 / HWI) ---------------------------------

def _wasserstein2_to_mu(
    ctx: EvalContext, density: np.ndarray, cap: int = 400
) -> tuple[float, dict]:
    """W_2 between density*mu and mu under the geodesic cost."""
    masses = density * ctx.space.weights
    flags: dict = {}
    if ctx.space.kind in ("interval", "circle"):
        value = transport.wasserstein_1d(ctx.space, masses, ctx.space.weights, p=2.0)
        return value, flags
    idx1, m1, trim1 = transport.subsample_measure(masses, cap)
    idx2, m2, trim2 = transport.subsample_measure(ctx.space.weights, cap)
    rho = ctx.space.pairwise_distance(idx1, idx2)
    value, _ = transport.wasserstein_exact(rho**2, m1, m2, p=2.0)
    flags = {"trimmed_lhs": trim1, "trimmed_rhs": trim2}
    return value, flags


def _hw_quantities(ctx: EvalContext, f: np.ndarray) -> tuple[float, float, float, dict]:
    f = np.asarray(f, dtype=float)
    _require_probability(ctx, "entropy-transport checks")
    norm = float(ctx.space.weights @ (f * f))
    if abs(norm - 1.0) > 1e-8:
        f = f / math.sqrt(norm)
    g = f * f
    ent = float(np.sum(ctx.space.weights * g * np.log(np.maximum(g, _KERNEL_FLOOR))))
    info = transport.fisher_information(ctx.gen, f)
    w2, flags = _wasserstein2_to_mu(ctx, g)
    return ent, info, w2, flags


def hw0_bound(K: float, n: float, r: float, info: float, w2: float) -> float:
    """Right side of the r-parametrized entropy bound."""
    kminus = max(0.0, -K)
    if not (r > 0.0 and (kminus == 0.0 or r <= 2.0 / kminus + 1e-12)):
        raise ValueError(f"r must lie in (0, 2/K^-], got {r}")
    tr = math.sqrt(r * n) / (2.0 * math.sqrt(2.0))
    return (
        r * info
        + (K * r + 2.0) * w2 / (2.0 * r) * min(w2, tr)
        + math.sqrt(n) * (K * r + 2.0) / (4.0 * math.sqrt(2.0 * r)) * max(0.0, w2 - tr)
    )


def hwi_bound(K: float, n: float, info: float, w2: float) -> float:
    """Entropy bound at the self-tuned radius, in closed form."""
    root_i = math.sqrt(info)
    correction = 0.0
    if info > 0.0:
        gap = math.sqrt(w2) - math.sqrt(n) / (2.0 * math.sqrt(2.0) * info**0.25)
        if gap > 0.0:
            correction = 0.5 * (K * w2 + 2.0 * root_i) * gap * gap
    return 2.0 * w2 * root_i + 0.5 * K * w2 * w2 - correction


def evaluate_hw0(
    ctx: EvalContext, f: np.ndarray, r: Optional[float] = None, sample: Optional[str] = None
) -> CheckReport:
    """Entropy vs Fisher information and transport cost at radius r."""
    ent, info, w2, flags = _hw_quantities(ctx, f)
    kminus = max(0.0, -ctx.K)
    if r is None:
        if info > 0.0 and w2 > 0.0:
            r = w2 / math.sqrt(info)
            if kminus > 0.0:
                r = min(r, 2.0 / kminus - 1e-12)
        else:
            r = 1.0
        flags["r_auto"] = r
    rhs = hw0_bound(ctx.K, ctx.n, r, info, w2)
    flags.update({"fisher": info, "w2": w2})
    params = {"r": float(r)}
    if sample is not None:
        params["sample"] = sample
    margin = rhs - ent
    return CheckReport(
        statement="hwi_HW0",
        params=params,
        lhs=float(ent),
        rhs=float(rhs),
        margin=float(margin),
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness={},
        flags=flags,
    )


def evaluate_hwi(
    ctx: EvalContext, f: np.ndarray, sample: Optional[str] = None
) -> CheckReport:
    """Closed-form entropy bound; cross-checked against the radius form."""
    ent, info, w2, flags = _hw_quantities(ctx, f)
    rhs = hwi_bound(ctx.K, ctx.n, info, w2)
    kminus = max(0.0, -ctx.K)
    if info > 0.0 and w2 > 0.0:
        r_auto = w2 / math.sqrt(info)
        if kminus == 0.0 or r_auto <= 2.0 / kminus:
            flags["identity_gap"] = abs(rhs - hw0_bound(ctx.K, ctx.n, r_auto, info, w2))
    flags.update({"fisher": info, "w2": w2})
    params = {}
    if sample is not None:
        params["sample"] = sample
    margin = rhs - ent
    return CheckReport(
        statement="hwi_HWI",
        params=params,
        lhs=float(ent),
        rhs=float(rhs),
        margin=float(margin),
        tol=ctx.tol,
        passed=bool(margin >= -ctx.tol),
        witness={},
        flags=flags,
    )


# -- Wasserstein contraction ----------------------------------------------

def evolve_measure(ctx: EvalContext, masses: np.ndarray, t: float) -> np.ndarray:
    """Push a mass vector through the dual semigroup.

    Works through mu-symmetry of P_t, so it requires a backend whose cache
    is symmetric in L^2(mu) (finite differences, or the circle transform).
    """
    if ctx.cache.dual is not None:
        raise ValueError("measure evolution needs a mu-symmetric semigroup backend")
    density = np.asarray(masses, dtype=float) / ctx.space.weights
    return ctx.semigroup(density, t) * ctx.space.weights


def wasserstein_modified(
    ctx: EvalContext,
    m1: np.ndarray,
    m2: np.ndarray,
    p: float,
    cap: int = 400,
) -> tuple[float, dict]:
    """W_p under the curvature-modified distance between two mass vectors.

    Shared mass is left in place before solving, which keeps the support
    of the remainder under the solver cap.  The modified distance is a
    metric, so for p = 1 this loses nothing; for p > 1 the value is an
    upper bound whenever the measures overlap (the ``common_mass`` flag
    records how much), exact again once the supports are disjoint.
    """
    flags: dict = {}
    if ctx.space.kind in ("interval", "circle"):
        value = transport.wasserstein_1d(
            ctx.space, m1, m2, p=p, cost="rho_tilde", K=ctx.K, n=ctx.n
        )
        return value, flags
    r1, r2, common = transport.subtract_common_mass(m1, m2)
    idx1, mm1, trim1 = transport.subsample_measure(r1, cap)
    idx2, mm2, trim2 = transport.subsample_measure(r2, cap)
    rho = ctx.space.pairwise_distance(idx1, idx2)
    cost = transport.rho_tilde(ctx.K, ctx.n, rho) ** p
    value, _ = transport.wasserstein_exact(cost, mm1, mm2, p=p)
    flags = {"trimmed_lhs": trim1, "trimmed_rhs": trim2}
    if p != 1.0 and common > 1e-12:
        flags["common_mass"] = common
    return value, flags


def evaluate_contraction(
    ctx: EvalContext,
    m1: np.ndarray,
    m2: np.ndarray,
    t: float,
    p: float = 1.0,
    sharp: bool = False,
    cap: int = 400,
    slack: float = 0.0,
) -> CheckReport:
    """Contraction of the modified transport distance along the semigroup.

    sharp=False checks the any-p exponential rate; sharp=True checks the
    improved rate available for p = 1 under negative K.  ``slack`` widens
    the pass tolerance by that fraction of the right side: the sharp rate
    equals the continuum spectral decay, which a discrete operator only
    approaches, and subsampled transport adds its own relative error.
    """
    if t <= 0.0:
        raise ValueError(f"contraction needs t > 0, got {t}")
    if sharp and p != 1.0:
        raise ValueError("the sharp contraction rate applies only to p = 1")
    w0, flags0 = wasserstein_modified(ctx, m1, m2, p, cap)
    e1 = evolve_measure(ctx, m1, t)
    e2 = evolve_measure(ctx, m2, t)
    wt, flags_t = wasserstein_modified(ctx, e1, e2, p, cap)
    rate = contraction_rate(ctx.K, ctx.n, t, sharp)
    rhs = rate * w0
    margin = rhs - wt
    tol = ctx.tol + slack * max(rhs, 0.0)
    flags = {
        "w0": w0,
        "wt": wt,
        "rate": rate,
        **{f"start_{k}": v for k, v in flags0.items()},
        **{f"end_{k}": v for k, v in flags_t.items()},
    }
    if slack:
        flags["rel_slack"] = slack
    statement = "contraction_CTp" if sharp else "contraction_CTpp"
    return CheckReport(
        statement=statement,
        params={"t": t, "p": p},
        lhs=float(wt),
        rhs=float(rhs),
        margin=float(margin),
        tol=float(tol),
        passed=bool(margin >= -tol),
        witness={},
        flags=flags,
    )


FIELD_STATEMENTS = tuple(_FIELD_CHECKS)
PAIR_STATEMENTS = (
    "log_harnack6",
    "explicit_H1",
    "explicit_H2",
    "kernel_KL_H1p",
    "kernel_KL_H2p",
    "kernel_lower_heat",
)
GLOBAL_STATEMENTS = (
    "lichnerowicz",
    "hwi_HW0",
    "hwi_HWI",
    "contraction_CTpp",
    "contraction_CTp",
)
