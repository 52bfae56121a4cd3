"""Optimal transport, entropy, and Fisher information on model spaces.

Two solver tiers:

* ``wasserstein_exact`` — the transport linear program at full generality,
  solved with HiGHS through ``scipy.optimize.linprog``.  Exact but capped
  at 400 support points per side; callers that exceed the cap must
  subsample (``subsample_measure``) and account for the reported slack.
* ``wasserstein_1d`` — closed-form quantile coupling on the interval and
  cut-point search on the circle, exact for convex costs and orders of
  magnitude faster.  Concave modified-distance costs (curvature constant
  K < 0) are delegated internally to the exact solver, since monotone
  couplings are no longer optimal there.

The modified distance ``rho_tilde`` compresses (K < 0) or stretches
(K > 0) distances through sin/sinh profiles; it degenerates to the plain
distance continuously as K -> 0 via a shared Taylor branch.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize, sparse

from .generator import Generator
from .model_space import ModelSpace

log = logging.getLogger(__name__)

SUPPORT_CAP = 400
_SUPPORT_CAP = SUPPORT_CAP
_MARGINAL_TOL = 1e-9
_TAYLOR_SWITCH = 1e-8


@dataclass
class DiscreteMeasure:
    """Nonnegative masses attached to the nodes of a model space."""

    space: ModelSpace
    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        if m.shape != (self.space.n_nodes,):
            raise ValueError(
                f"masses shape {m.shape} does not match the space "
                f"({self.space.n_nodes} nodes)"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite")
        if m.min() < 0.0:
            raise ValueError(f"masses must be nonnegative, min is {m.min():.3e}")
        self.masses = m

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def normalized(self) -> "DiscreteMeasure":
        t = self.total
        if t <= 0.0:
            raise ValueError("cannot normalize a zero measure")
        return DiscreteMeasure(self.space, self.masses / t)


@dataclass
class TransportPlan:
    """Support triples of an optimal coupling, with the attained cost."""

    rows: np.ndarray
    cols: np.ndarray
    flows: np.ndarray
    cost: float


def rho_tilde(K: float, n: float, r: np.ndarray) -> np.ndarray:
    """Modified distance profile applied elementwise to distances r."""
    if not n > 1.0:
        raise ValueError(f"rho_tilde needs n > 1, got {n}")
    r = np.asarray(r, dtype=float)
    if r.size and float(r.min()) < 0.0:
        raise ValueError("distances must be nonnegative")
    if K == 0.0:
        return r.copy()
    out = np.empty_like(r)
    taylor = np.abs(K) * r * r < _TAYLOR_SWITCH
    u = K * r * r / (n - 1.0)
    out[taylor] = (r * (1.0 + u / 24.0 + u * u / 1920.0))[taylor]
    rest = ~taylor
    if np.any(rest):
        alpha = math.sqrt(abs(K) / (n - 1.0))
        half = 0.5 * alpha * r[rest]
        if K < 0.0:
            if float(half.max()) > 0.5 * math.pi + 1e-9:
                raise ValueError(
                    "distance exceeds the diameter bound pi*sqrt((n-1)/(-K)) "
                    "implied by the curvature assumption"
                )
            out[rest] = 2.0 * np.sin(half) / alpha
        else:
            out[rest] = 2.0 * np.sinh(half) / alpha
    return out


def pairwise_cost(
    space: ModelSpace,
    p: float,
    cost: str = "rho",
    K: float = 0.0,
    n: float = math.inf,
    rows: Optional[np.ndarray] = None,
    cols: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Matrix of c(x_i, y_j)^p for the space distance or its modification."""
    all_nodes = np.arange(space.n_nodes)
    d = space.pairwise_distance(
        all_nodes if rows is None else rows, all_nodes if cols is None else cols
    )
    if cost == "rho_tilde":
        d = rho_tilde(K, n, d)
    elif cost != "rho":
        raise ValueError(f"unknown cost {cost!r}; expected 'rho' or 'rho_tilde'")
    return d**p


def subsample_measure(
    masses: np.ndarray, cap: int = _SUPPORT_CAP
) -> tuple[np.ndarray, np.ndarray, float]:
    """Keep the ``cap`` heaviest atoms, renormalized to the original total.

    Returns (kept indices, renormalized kept masses, trimmed mass).  The
    trimmed mass bounds the transport error: moving it anywhere costs at
    most trimmed_mass * diameter^p.
    """
    masses = np.asarray(masses, dtype=float)
    support = np.flatnonzero(masses > 0.0)
    if support.size <= cap:
        return support, masses[support], 0.0
    order = np.argsort(masses[support], kind="stable")[::-1]
    kept = np.sort(support[order[:cap]])
    trimmed = float(masses.sum() - masses[kept].sum())
    scale = masses.sum() / masses[kept].sum()
    return kept, masses[kept] * scale, trimmed


def wasserstein_exact(
    cost_p: np.ndarray,
    m1: np.ndarray,
    m2: np.ndarray,
    p: float = 1.0,
) -> tuple[float, TransportPlan]:
    """Exact W_p from the transport linear program.

    ``cost_p`` holds c(x_i, y_j)^p for the supports of ``m1`` (rows) and
    ``m2`` (columns).  Totals must agree to 1e-9; supports are capped at
    400 per side (subsample first if necessary).
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    cost_p = np.asarray(cost_p, dtype=float)
    if cost_p.shape != (m1.size, m2.size):
        raise ValueError(f"cost shape {cost_p.shape} vs masses {m1.size}x{m2.size}")
    if abs(m1.sum() - m2.sum()) > 1e-9 * max(1.0, m1.sum()):
        raise ValueError(
            f"total masses differ: {m1.sum():.12g} vs {m2.sum():.12g}"
        )
    ri = np.flatnonzero(m1 > 0.0)
    cj = np.flatnonzero(m2 > 0.0)
    if ri.size > _SUPPORT_CAP or cj.size > _SUPPORT_CAP:
        raise ValueError(
            f"support sizes {ri.size}x{cj.size} exceed the exact-solver cap "
            f"{_SUPPORT_CAP}; subsample first"
        )
    if ri.size == 0:
        return 0.0, TransportPlan(ri, cj, np.zeros(0), 0.0)
    a = m1[ri]
    b = m2[cj]
    C = cost_p[np.ix_(ri, cj)]
    nr, nc = C.shape

    # equality constraints: row sums = a, column sums = b (drop last row
    # to keep the system full rank)
    data, rows_idx, cols_idx = [], [], []
    for i in range(nr):
        rows_idx.extend([i] * nc)
        cols_idx.extend(range(i * nc, (i + 1) * nc))
        data.extend([1.0] * nc)
    for j in range(nc - 1):
        rows_idx.extend([nr + j] * nr)
        cols_idx.extend(range(j, nr * nc, nc))
        data.extend([1.0] * nr)
    A = sparse.csr_matrix(
        (data, (rows_idx, cols_idx)), shape=(nr + nc - 1, nr * nc)
    )
    rhs = np.concatenate([a, b[:-1]])
    res = optimize.linprog(
        C.ravel(),
        A_eq=A,
        b_eq=rhs,
        bounds=(0.0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    flow = res.x.reshape(nr, nc)
    row_res = float(np.abs(flow.sum(axis=1) - a).max())
    col_res = float(np.abs(flow.sum(axis=0) - b).max())
    # large instances come back from the solver's postsolve with marginals
    # at its feasibility tolerance rather than at machine precision
    marginal_tol = _MARGINAL_TOL if nr * nc <= 40_000 else 1e-6
    if max(row_res, col_res) > marginal_tol * max(1.0, float(a.sum())):
        raise RuntimeError(
            f"transport plan marginals off by {max(row_res, col_res):.2e}"
        )
    value = float(np.sum(flow * C))
    nz = flow > 0.0
    ii, jj = np.nonzero(nz)
    plan = TransportPlan(ri[ii], cj[jj], flow[nz], value)
    return value ** (1.0 / p) if value > 0.0 else 0.0, plan


def subtract_common_mass(
    m1: np.ndarray, m2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Cancel shared mass pointwise; W_1 with a metric cost is unchanged."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    common = np.minimum(m1, m2)
    return m1 - common, m2 - common, float(common.sum())


def _quantile_segments(
    x1: np.ndarray, a: np.ndarray, x2: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Segment lengths and coupled positions of the monotone coupling."""
    c1 = np.cumsum(a)
    c2 = np.cumsum(b)
    total = min(c1[-1], c2[-1])  # equal up to roundoff
    cuts = np.union1d(c1[:-1], c2[:-1])
    cuts = cuts[cuts < total]
    edges = np.concatenate([[0.0], cuts, [total]])
    lens = np.diff(edges)
    keep = lens > 0.0
    mids = (edges[:-1] + edges[1:])[keep] / 2.0
    i1 = np.minimum(np.searchsorted(c1, mids), c1.size - 1)
    i2 = np.minimum(np.searchsorted(c2, mids), c2.size - 1)
    return lens[keep], x1[i1], x2[i2]


def _line_wasserstein(x1, a, x2, b, p, profile: Optional[Callable]) -> float:
    lens, q1, q2 = _quantile_segments(x1, a, x2, b)
    d = np.abs(q1 - q2)
    if profile is not None:
        d = profile(d)
    return float(np.sum(lens * d**p)) ** (1.0 / p)


def _circle_objective(shift, x1, a, x2, b, p, circumference, profile):
    """Line transport cost after advancing nu2's quantile function by
    ``shift`` in (-1, 1) of its mass (the cut-point parametrization).

    nu2 is unrolled periodically over three tiles (displaced by one
    circumference each way) and the mass window [s, s + total) selects the
    atoms facing nu1; cost is the line distance between quantiles, as in
    the standard reduction of circle transport to a convex shift family.
    """
    total = float(np.sum(b))
    ends = np.concatenate([np.cumsum(b) - total, np.cumsum(b), np.cumsum(b) + total])
    starts = ends - np.tile(b, 3)
    xt = np.concatenate([x2 - circumference, x2, x2 + circumference])
    lo = shift * total
    hi = lo + total
    overlap = np.minimum(ends, hi) - np.maximum(starts, lo)
    sel = overlap > 0.0
    lens, q1, q2 = _quantile_segments(x1, a, xt[sel], overlap[sel])
    d = np.abs(q1 - q2)
    if profile is not None:
        d = profile(d)
    return float(np.sum(lens * d**p))


def wasserstein_1d(
    space: ModelSpace,
    m1: np.ndarray,
    m2: np.ndarray,
    p: float = 1.0,
    cost: str = "rho",
    K: float = 0.0,
    n: float = math.inf,
) -> float:
    """W_p on the interval (quantile coupling) or circle (cut search).

    Exact for convex transport costs.  The modified distance with K < 0 is
    concave, so that combination is delegated to the exact LP solver.
    """
    if space.kind not in ("interval", "circle"):
        raise ValueError(f"wasserstein_1d needs a 1D space, got {space.kind}")
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if m1.min() < 0 or m2.min() < 0:
        raise ValueError("masses must be nonnegative")
    if abs(m1.sum() - m2.sum()) > 1e-9 * max(1.0, m1.sum()):
        raise ValueError("total masses differ")
    if cost == "rho_tilde" and K < 0.0:
        alpha = math.sqrt(-K / (n - 1.0))
        # the circle search works on an unrolled line whose distances can
        # exceed the geodesic diameter, so only the interval gets to keep
        # the quantile coupling here
        convex_power = (
            space.kind == "interval"
            and p >= 2.0
            and alpha * space.diameter <= 0.5 * math.pi + 1e-12
        )
        if not convex_power:
            # concave (or not provably convex) profile: crossing pairs can
            # beat the monotone coupling, so fall back to the exact LP
            log.debug("non-convex modified cost; delegating to the LP solver")
            if p == 1.0:
                # metric cost: shared mass never moves, and cancelling it
                # keeps the LP supports small for overlapping measures
                m1, m2, _ = subtract_common_mass(m1, m2)
                if m1.sum() <= 0.0:
                    return 0.0
            i1, a, _ = subsample_measure(m1)
            i2, b, _ = subsample_measure(m2)
            Cp = pairwise_cost(space, p, cost, K, n, i1, i2)
            value, _ = wasserstein_exact(Cp, a, b, p)
            return value
        # else: sin(alpha r / 2)^p is convex in r on this diameter, so the
        # monotone quantile coupling below stays optimal
    if cost == "rho_tilde":
        profile: Optional[Callable] = lambda d: rho_tilde(K, n, d)
    elif cost == "rho":
        profile = None
    else:
        raise ValueError(f"unknown cost {cost!r}")

    s1 = np.flatnonzero(m1 > 0.0)
    s2 = np.flatnonzero(m2 > 0.0)
    if s1.size == 0:
        return 0.0
    x1, a = space.points[s1], m1[s1]
    x2, b = space.points[s2], m2[s2]

    if space.kind == "interval":
        return _line_wasserstein(x1, a, x2, b, p, profile)

    circumference = 2.0 * math.pi
    if p == 1.0 and profile is None:
        # W_1 on the circle: weighted median of the CDF difference
        pos = np.union1d(x1, x2)
        f1 = np.cumsum(np.bincount(np.searchsorted(pos, x1), a, pos.size))
        f2 = np.cumsum(np.bincount(np.searchsorted(pos, x2), b, pos.size))
        gaps = np.diff(np.concatenate([pos, [pos[0] + circumference]]))
        diff = f1 - f2
        order = np.argsort(diff, kind="stable")
        cum = np.cumsum(gaps[order])
        level = diff[order[np.searchsorted(cum, 0.5 * circumference)]]
        return float(np.sum(gaps * np.abs(diff - level)))

    # general order / modified cost: the objective is convex in the mass
    # shift, so evaluate every nu2 atom boundary (both wrap directions) to
    # bracket the optimum, then golden-section refine
    total = a.sum()
    ends = np.cumsum(b) / total
    bounds = np.concatenate([[0.0], ends[:-1]])  # atom boundaries, one per atom
    eps = 1e-12
    candidates = np.unique(
        np.clip(
            np.concatenate([bounds - 1.0, bounds, [1.0 - eps, -1.0 + eps]]),
            -1.0 + eps,
            1.0 - eps,
        )
    )
    obj = lambda s: _circle_objective(s, x1, a, x2, b, p, circumference, profile)
    vals = [obj(s) for s in candidates]
    k = int(np.argmin(vals))
    lo = candidates[max(0, k - 1)]
    hi = candidates[min(len(candidates) - 1, k + 1)]
    res = optimize.minimize_scalar(
        obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
    )
    best = min(min(vals), float(res.fun))
    return best ** (1.0 / p)


def relative_entropy(nu: np.ndarray, mu: np.ndarray) -> float:
    """KL divergence sum nu_i log(nu_i / mu_i) with the 0 log 0 = 0 rule."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if nu.shape != mu.shape:
        raise ValueError("measure shapes differ")
    if nu.min() < 0.0 or mu.min() < 0.0:
        raise ValueError("masses must be nonnegative")
    pos = nu > 0.0
    if np.any(mu[pos] == 0.0):
        raise ValueError("first measure is not absolutely continuous w.r.t. second")
    return float(np.sum(nu[pos] * np.log(nu[pos] / mu[pos])))


def fisher_information(gen: Generator, f: np.ndarray) -> float:
    """Dirichlet energy mu(Gamma(f, f)) of f under the generator's measure."""
    return float(gen.weights @ gen.gamma(np.asarray(f, dtype=float)))
