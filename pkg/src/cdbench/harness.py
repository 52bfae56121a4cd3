"""Scenario-driven execution of the inequality suite.

A scenario is a YAML mapping that names a model space, a curvature pair
(K, n), a set of deterministic function samplers, and a list of checks
with parameter grids.  :func:`run_scenario` builds the space, generators
and semigroup caches once, expands the checks into a flat task list, and
executes it (optionally across worker threads) into a :class:`ReportSet`
whose report order is fixed by the scenario alone, never by scheduling.

Samplers draw random eigenfunction combinations from a seeded generator,
optionally pushed through a positivity transform; the ``boundary_probe``
sampler instead integrates a designed profile whose derivative follows
the weight density near the interval ends, where reflecting grids hide
curvature defects from generic eigenfunction combinations.
"""
from __future__ import annotations

import concurrent.futures
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
import yaml

from . import inequalities as ineq
from .generator import Generator, analytic_K, assemble_generator, estimate_K
from .model_space import ModelSpace, PotentialSpec, SpaceSpec, build_model_space
from .semigroup import (
    SemigroupCache,
    load_cache,
    save_cache,
    space_fingerprint,
    spectral_decompose,
)
from .transport import SUPPORT_CAP

log = logging.getLogger(__name__)

_TRANSFORMS = ("raw", "positive_exp", "positive_floor", "normalized_density")
_SAMPLER_TYPES = _TRANSFORMS + ("boundary_probe",)
_CURVATURE_MODES = ("analytic", "explicit", "estimated")
_POSITIVE_TRANSFORMS = ("positive_exp", "positive_floor")
# statements whose left side takes logs of f and therefore need f > 0
_NEEDS_POSITIVE = ("log_harnack6", "explicit_H1", "explicit_H2")
_KNOWN_STATEMENTS = (
    ineq.FIELD_STATEMENTS + ineq.PAIR_STATEMENTS + ineq.GLOBAL_STATEMENTS
)


class ScenarioError(RuntimeError):
    """Construction or validation failure, tagged with the failing stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class SamplerSpec:
    name: str
    kind: str
    seed: int = 0
    count: int = 0
    band: int = 0
    delta: float = 1e-3
    widths: tuple[float, ...] = ()
    amplitude: float = 1.0


@dataclass(frozen=True)
class CheckSpec:
    statement: str
    sampler: Optional[str] = None
    backend: Optional[str] = None
    grids: dict = field(default_factory=dict)
    pairs: Optional[dict] = None
    rows: Optional[dict] = None
    schedules: tuple[str, ...] = ("identity",)
    source: str = "cache"
    diracs: Optional[dict] = None
    cap: int = 400
    slack: float = 0.0
    tol: Optional[float] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    space: SpaceSpec
    backend: str
    l_max: Optional[int]
    curvature: dict
    samplers: dict[str, SamplerSpec]
    checks: tuple[CheckSpec, ...]
    tol_default: float
    tol_overrides: dict[str, float]
    expect_violation: bool
    output_prefix: str
    echo: dict


@dataclass
class ReportSet:
    """All reports of one scenario run plus their summary.

    ``wall_clock`` is observational metadata; the serialized forms omit it
    so that repeated runs of one scenario compare byte-for-byte.
    """

    scenario: dict
    reports: list[ineq.CheckReport]
    summary: dict
    wall_clock: float = 0.0


# -- scenario parsing ------------------------------------------------------

def _parse_grid(value: Any, allow_auto: bool = False) -> tuple:
    """A grid is a scalar, a list, or {linspace: [a, b, count]}."""
    if isinstance(value, dict):
        if set(value) != {"linspace"}:
            raise ValueError(f"grid mapping must be {{linspace: [a, b, n]}}, got {value}")
        a, b, num = value["linspace"]
        a = math.pi if a == "pi" else float(a)
        b = math.pi if b == "pi" else float(b)
        return tuple(np.linspace(a, b, int(num)).tolist())
    if not isinstance(value, (list, tuple)):
        value = [value]
    out = []
    for v in value:
        if v == "auto" and allow_auto:
            out.append("auto")
        else:
            out.append(float(v))
    return tuple(out)


def _parse_space(mapping: dict) -> SpaceSpec:
    pot = mapping.get("potential")
    potential = PotentialSpec()
    if pot is not None:
        potential = PotentialSpec(
            family=pot.get("family", "zero"),
            coefficient=float(pot.get("coefficient", 0.0)),
            values=tuple(pot["values"]) if "values" in pot else None,
        )
    return SpaceSpec(
        kind=mapping["kind"],
        nodes=int(mapping.get("nodes", 0)),
        bounds=tuple(float(v) for v in mapping.get("bounds", (-1.0, 1.0))),
        level=int(mapping.get("level", 0)),
        potential=potential,
        normalize_measure=bool(mapping.get("normalize_measure", False)),
    )


def _parse_sampler(name: str, mapping: dict) -> SamplerSpec:
    kind = mapping.get("type")
    if kind == "eigen_band":
        kind = "raw"  # alias: untransformed eigenfunction combinations
    if kind not in _SAMPLER_TYPES:
        raise ValueError(f"sampler {name!r} has unknown type {mapping.get('type')!r}")
    return SamplerSpec(
        name=name,
        kind=kind,
        seed=int(mapping.get("seed", 0)),
        count=int(mapping.get("count", 0)),
        band=int(mapping.get("band", 0)),
        delta=float(mapping.get("delta", 1e-3)),
        widths=tuple(float(w) for w in mapping.get("widths", ())),
        amplitude=float(mapping.get("amplitude", 1.0)),
    )


def _parse_check(mapping: dict) -> CheckSpec:
    statement = mapping.get("statement")
    grids = {}
    for key in ("t", "s", "p"):
        if key in mapping:
            grids[key] = _parse_grid(mapping[key])
    if "r" in mapping:
        grids["r"] = _parse_grid(mapping["r"], allow_auto=True)
    if "theta" in mapping:
        grids["theta"] = _parse_grid(mapping["theta"])
    schedules = mapping.get("schedules", ["identity"])
    return CheckSpec(
        statement=statement,
        sampler=mapping.get("sampler"),
        backend=mapping.get("backend"),
        grids=grids,
        pairs=mapping.get("pairs"),
        rows=mapping.get("rows"),
        schedules=tuple(str(s) for s in schedules),
        source=str(mapping.get("source", "cache")),
        diracs=mapping.get("diracs"),
        cap=int(mapping.get("cap", 400)),
        slack=float(mapping.get("slack", 0.0)),
        tol=float(mapping["tol"]) if "tol" in mapping else None,
    )


def build_scenario(mapping: dict, name: Optional[str] = None) -> Scenario:
    """Turn a parsed YAML mapping into a validated :class:`Scenario`."""
    try:
        space = _parse_space(mapping["space"])
        samplers = {
            str(k): _parse_sampler(str(k), v)
            for k, v in (mapping.get("samplers") or {}).items()
        }
        checks = tuple(_parse_check(c) for c in mapping.get("checks") or ())
        tol_map = mapping.get("tolerance") or {}
        curvature = dict(mapping.get("curvature") or {})
        scenario = Scenario(
            name=str(mapping.get("name", name or "scenario")),
            space=space,
            backend=str(mapping.get("backend", "fd")),
            l_max=int(mapping["l_max"]) if "l_max" in mapping else None,
            curvature=curvature,
            samplers=samplers,
            checks=checks,
            tol_default=float(tol_map.get("default", 1e-4)),
            tol_overrides={
                str(k): float(v) for k, v in (tol_map.get("overrides") or {}).items()
            },
            expect_violation=bool(mapping.get("expect_violation", False)),
            output_prefix=str(
                (mapping.get("output") or {}).get("prefix", mapping.get("name", name))
            ),
            echo=mapping,
        )
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError("load", str(exc)) from exc
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            mapping = yaml.safe_load(fh)
    except Exception as exc:
        raise ScenarioError("load", f"{path}: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ScenarioError("load", f"{path}: scenario must be a mapping")
    return build_scenario(mapping, name=os.path.splitext(os.path.basename(path))[0])


def validate_scenario(scenario: Scenario) -> None:
    """Cheap structural checks; runs before any eigensolve."""

    def bad(msg: str) -> ScenarioError:
        return ScenarioError("validate", f"scenario {scenario.name!r}: {msg}")

    cur = scenario.curvature
    mode = cur.get("mode")
    if mode not in _CURVATURE_MODES:
        raise bad(f"curvature mode must be one of {_CURVATURE_MODES}, got {mode!r}")
    if "n" not in cur:
        raise bad("curvature needs the dimension entry n")
    if mode == "explicit" and "K" not in cur:
        raise bad("explicit curvature needs K")
    if mode == "estimated" and cur.get("sampler") not in scenario.samplers:
        raise bad("estimated curvature needs an existing sampler reference")

    for spec in scenario.samplers.values():
        if spec.kind == "boundary_probe":
            if scenario.space.kind != "interval":
                raise bad(f"sampler {spec.name!r}: boundary probes need an interval")
            if not spec.widths or any(w <= 0 for w in spec.widths):
                raise bad(f"sampler {spec.name!r} needs positive widths")
        else:
            if spec.count < 1:
                raise bad(f"sampler {spec.name!r} needs count >= 1")
            if spec.band < 1:
                raise bad(f"sampler {spec.name!r} needs band >= 1")
            if "seed" not in _sampler_echo(scenario, spec.name):
                raise bad(f"sampler {spec.name!r} draws randomly and needs a seed")

    for check in scenario.checks:
        st = check.statement
        if st not in _KNOWN_STATEMENTS:
            raise bad(f"unknown statement {st!r}")
        for key, grid in check.grids.items():
            if len(grid) == 0:
                raise bad(f"{st}: empty {key} grid")
        if check.cap > SUPPORT_CAP:
            raise bad(f"{st}: cap {check.cap} exceeds the transport support cap "
                      f"{SUPPORT_CAP}")
        needs_sampler = st in ineq.FIELD_STATEMENTS or st in (
            "log_harnack6", "explicit_H1", "explicit_H2", "hwi_HW0", "hwi_HWI",
        )
        if needs_sampler:
            if check.sampler not in scenario.samplers:
                raise bad(f"{st} references unknown sampler {check.sampler!r}")
            kind = scenario.samplers[check.sampler].kind
            if st in _NEEDS_POSITIVE and kind not in _POSITIVE_TRANSFORMS:
                raise bad(f"{st} takes logs of f and needs a positive transform, "
                          f"sampler {check.sampler!r} is {kind!r}")
            if st.startswith("hwi") and kind != "normalized_density":
                raise bad(f"{st} needs a normalized_density sampler")
            if "t" not in check.grids and st in ineq.FIELD_STATEMENTS + ("log_harnack6",):
                raise bad(f"{st}: missing t grid")
        if st in ("explicit_H1", "explicit_H2", "kernel_KL_H1p", "kernel_KL_H2p"):
            if "t" not in check.grids or "s" not in check.grids:
                raise bad(f"{st}: needs t and s grids")
            if check.pairs is None:
                raise bad(f"{st}: needs a pairs entry")
        if st == "log_harnack6" and check.pairs is None:
            raise bad(f"{st}: needs a pairs entry")
        if st == "kernel_lower_heat":
            if check.source == "series":
                if scenario.space.kind != "sphere2":
                    raise bad("series kernel bound exists only on the sphere")
                if "t" not in check.grids or "theta" not in check.grids:
                    raise bad("series kernel bound needs t and theta grids")
            elif check.rows is None or "t" not in check.grids:
                raise bad(f"{st}: needs row selectors and a t grid")
        if st.startswith("contraction"):
            if check.diracs is None or "t" not in check.grids:
                raise bad(f"{st}: needs diracs and a t grid")
            backend = check.backend or scenario.backend
            if scenario.space.kind == "sphere2" and backend != "fd":
                raise bad(f"{st}: measure evolution needs the fd backend")


# -- samplers --------------------------------------------------------------

def sample_functions(
    space: ModelSpace,
    cache: SemigroupCache,
    seed: int,
    count: int,
    band: int,
    transform: str = "raw",
    delta: float = 1e-3,
) -> list[np.ndarray]:
    """Random combinations of the first ``band`` nonconstant eigenfunctions.

    Coefficients are standard normal from a seeded generator, so a fixed
    seed reproduces the functions bitwise.  Transforms: ``positive_exp``
    rescales by the sup norm and exponentiates; ``positive_floor`` shifts
    the minimum up to ``delta``; ``normalized_density`` rescales f so that
    the squared mass ``mu(f^2)`` is one.
    """
    if transform not in _TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    if band + 1 > cache.basis.shape[1]:
        raise ValueError(
            f"band {band} exceeds the {cache.basis.shape[1] - 1} available "
            "nonconstant eigenfunctions"
        )
    rng = np.random.default_rng(seed)
    columns = cache.basis[:, 1 : band + 1]
    out = []
    for _ in range(count):
        raw = columns @ rng.standard_normal(band)
        if transform == "positive_exp":
            f = np.exp(raw / np.abs(raw).max())
        elif transform == "positive_floor":
            f = raw - raw.min() + delta
        elif transform == "normalized_density":
            f = raw / math.sqrt(float(space.weights @ (raw * raw)))
        else:
            f = raw
        out.append(f)
    return out


def _smoothstep(tau: np.ndarray) -> np.ndarray:
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)


def boundary_probe_functions(
    space: ModelSpace, n: float, widths: Sequence[float], amplitude: float = 1.0
) -> list[tuple[str, np.ndarray]]:
    """Profiles whose derivative is the sharp-ratio direction near the ends.

    f' follows exp(V / (n - 1)) — the direction that minimizes the
    curvature ratio pointwise — cut off over a layer of the given width by
    a quintic step, so f' and f'' vanish at the reflecting ends and the
    profile is admissible for the Neumann operator.  Eigenfunction
    combinations have derivatives of size O(h^2) in that layer, which is
    exactly where a falsified curvature constant fails first.
    """
    if space.kind != "interval":
        raise ValueError("boundary probes are defined on the interval")
    x = space.points
    a, b = space.spec.bounds
    edge = np.minimum(x - a, b - x)
    if math.isfinite(n) and n > 1.0:
        expo = space.potential / (n - 1.0)
    else:
        expo = np.zeros_like(x)
    out = []
    for w in widths:
        fp = np.exp(expo) * _smoothstep(edge / float(w))
        f = np.concatenate([[0.0], np.cumsum(0.5 * (fp[1:] + fp[:-1]) * space.h)])
        out.append((f"w={w:g}", amplitude * f))
    return out


# -- scenario execution ----------------------------------------------------

class _Bundle:
    """Space, per-backend generators/caches, and the sample bank."""

    def __init__(self, scenario: Scenario, cache_dir: Optional[str] = None):
        self.scenario = scenario
        self.cache_dir = cache_dir
        try:
            self.space = build_model_space(scenario.space)
        except Exception as exc:
            raise ScenarioError("space", str(exc)) from exc
        self.generators: dict[str, Generator] = {}
        self.caches: dict[str, SemigroupCache] = {}
        self.samples: dict[tuple[str, str], list[tuple[str, np.ndarray]]] = {}

    def backend_for(self, check: Optional[CheckSpec]) -> str:
        if check is not None and check.backend:
            return check.backend
        return self.scenario.backend

    def build_backend(self, backend: str) -> None:
        if backend in self.caches:
            return
        try:
            gen = assemble_generator(self.space, backend, self.scenario.l_max)
        except Exception as exc:
            raise ScenarioError("generator", f"backend {backend!r}: {exc}") from exc
        try:
            cache = self._load_or_decompose(gen)
        except Exception as exc:
            raise ScenarioError("cache", f"backend {backend!r}: {exc}") from exc
        self.generators[backend] = gen
        self.caches[backend] = cache

    def _load_or_decompose(self, gen: Generator) -> SemigroupCache:
        fingerprint = space_fingerprint(gen)
        path = None
        if self.cache_dir:
            os.makedirs(self.cache_dir, exist_ok=True)
            path = os.path.join(self.cache_dir, f"{fingerprint}.npz")
            if os.path.exists(path):
                try:
                    return load_cache(path, expected_fingerprint=fingerprint)
                except Exception as exc:  # stale or foreign file: rebuild
                    log.warning("ignoring cache %s (%s)", path, exc)
        cache = spectral_decompose(gen)
        if path is not None:
            save_cache(path, cache)
        return cache

    def bank(self, name: str, backend: str, n: float) -> list[tuple[str, np.ndarray]]:
        spec = self.scenario.samplers[name]
        key = (name, "geom" if spec.kind == "boundary_probe" else backend)
        if key in self.samples:
            return self.samples[key]
        try:
            if spec.kind == "boundary_probe":
                labeled = [
                    (f"{name}[{tag}]", f)
                    for tag, f in boundary_probe_functions(
                        self.space, n, spec.widths, spec.amplitude
                    )
                ]
            else:
                funcs = sample_functions(
                    self.space,
                    self.caches[backend],
                    spec.seed,
                    spec.count,
                    spec.band,
                    spec.kind,
                    spec.delta,
                )
                labeled = [(f"{name}[{i}]", f) for i, f in enumerate(funcs)]
        except Exception as exc:
            raise ScenarioError("samples", f"sampler {name!r}: {exc}") from exc
        self.samples[key] = labeled
        return labeled


def _sampler_echo(scenario: Scenario, name: str) -> dict:
    return (scenario.echo.get("samplers") or {}).get(name) or {}


def _resolve_nodes(space: ModelSpace, spec: dict, prefix: str) -> np.ndarray:
    """Node selectors: explicit indices, 1D quantiles, or sphere targets."""
    if f"{prefix}_nodes" in spec:
        return np.asarray(spec[f"{prefix}_nodes"], dtype=int)
    if f"{prefix}_quantiles" in spec:
        qs = np.asarray(spec[f"{prefix}_quantiles"], dtype=float)
        return np.round(qs * (space.n_nodes - 1)).astype(int)
    if f"{prefix}_targets" in spec:
        return np.asarray(
            [space.nearest_node(np.asarray(v, dtype=float)) for v in spec[f"{prefix}_targets"]],
            dtype=int,
        )
    raise ValueError(f"pair spec needs {prefix}_nodes, {prefix}_quantiles or {prefix}_targets")


def _resolve_pairs(space: ModelSpace, spec: dict) -> tuple[np.ndarray, np.ndarray]:
    return _resolve_nodes(space, spec, "x"), _resolve_nodes(space, spec, "y")


def _resolve_rows(space: ModelSpace, spec: dict) -> np.ndarray:
    if "nodes" in spec:
        return np.asarray(spec["nodes"], dtype=int)
    if "stride" in spec:
        return np.arange(0, space.n_nodes, int(spec["stride"]))
    raise ValueError("row spec needs nodes or stride")


def _schedule_factory(label: str) -> Callable[[float], ineq.PhiSchedule]:
    if label == "identity":
        return lambda t: ineq.identity_schedule()
    kind, _, arg = label.partition(":")
    if kind == "quadratic":
        return lambda t, c=float(arg): ineq.quadratic_schedule(c)
    if kind == "ramp":
        return lambda t, s=float(arg): ineq.ramp_schedule(t, s)
    raise ValueError(f"unknown schedule {label!r}")


def _dirac_masses(
    bundle: _Bundle, ctx: ineq.EvalContext, spec: dict
) -> tuple[np.ndarray, np.ndarray]:
    if "nodes" in spec:
        i1, i2 = (int(v) for v in spec["nodes"])
    elif "targets" in spec:
        t1, t2 = spec["targets"]
        i1 = bundle.space.nearest_node(np.asarray(t1, dtype=float))
        i2 = bundle.space.nearest_node(np.asarray(t2, dtype=float))
    else:
        raise ValueError("diracs spec needs nodes or targets")
    n = bundle.space.n_nodes
    m1 = np.zeros(n)
    m2 = np.zeros(n)
    m1[i1] = 1.0
    m2[i2] = 1.0
    t0 = float(spec.get("presmooth", 0.0))
    if t0 > 0.0:
        m1 = ineq.evolve_measure(ctx, m1, t0)
        m2 = ineq.evolve_measure(ctx, m2, t0)
    return m1, m2


def _resolve_curvature(bundle: _Bundle) -> tuple[float, float]:
    scenario = bundle.scenario
    cur = scenario.curvature
    n = float(cur["n"])
    mode = cur["mode"]
    try:
        if mode == "explicit":
            return float(cur["K"]), n
        if mode == "analytic":
            return analytic_K(bundle.space, n), n
        backend = bundle.backend_for(None)
        bundle.build_backend(backend)
        bank = bundle.bank(cur["sampler"], backend, n)
        gen = bundle.generators[backend]
        return estimate_K(gen, [f for _, f in bank], n), n
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError("curvature", str(exc)) from exc


def _check_tol(scenario: Scenario, check: CheckSpec, tol_scale: float) -> float:
    if check.tol is not None:
        tol = check.tol
    else:
        tol = scenario.tol_overrides.get(check.statement, scenario.tol_default)
    return tol * tol_scale


def _expand_check(
    bundle: _Bundle,
    check: CheckSpec,
    K: float,
    n: float,
    tol: float,
) -> list[Callable[[], ineq.CheckReport]]:
    """Flatten one check spec into thunks, in scenario order."""
    scenario = bundle.scenario
    st = check.statement
    backend = bundle.backend_for(check)
    if st == "kernel_lower_heat" and check.source == "series":
        ts, thetas = check.grids["t"], check.grids["theta"]
        return [lambda: ineq.evaluate_kernel_lower_series(K, ts, thetas, tol)]

    bundle.build_backend(backend)
    ctx = ineq.EvalContext(
        space=bundle.space,
        gen=bundle.generators[backend],
        cache=bundle.caches[backend],
        K=K,
        n=n,
        tol=tol,
    )
    tasks: list[Callable[[], ineq.CheckReport]] = []

    if st in ineq.FIELD_STATEMENTS:
        bank = bundle.bank(check.sampler, backend, n)
        for label, f in bank:
            for t in check.grids["t"]:
                tasks.append(
                    lambda f=f, t=t, label=label: ineq.evaluate_field_statement(
                        ctx, st, f, t, sample=label
                    )
                )
        return tasks

    if st == "log_harnack6":
        bank = bundle.bank(check.sampler, backend, n)
        pairs = _resolve_pairs(bundle.space, check.pairs)
        factories = [(lab, _schedule_factory(lab)) for lab in check.schedules]
        for label, f in bank:
            for t in check.grids["t"]:
                for _, make in factories:
                    tasks.append(
                        lambda f=f, t=t, label=label, make=make: ineq.evaluate_log_harnack6(
                            ctx, f, t, pairs, schedule=make(t), sample=label
                        )
                    )
        return tasks

    if st in ("explicit_H1", "explicit_H2"):
        evaluator = (
            ineq.evaluate_explicit_H1 if st == "explicit_H1" else ineq.evaluate_explicit_H2
        )
        bank = bundle.bank(check.sampler, backend, n)
        pairs = _resolve_pairs(bundle.space, check.pairs)
        for label, f in bank:
            for t in check.grids["t"]:
                for s in check.grids["s"]:
                    tasks.append(
                        lambda f=f, t=t, s=s, label=label: evaluator(
                            ctx, f, t, s, pairs, sample=label
                        )
                    )
        return tasks

    if st in ("kernel_KL_H1p", "kernel_KL_H2p"):
        variant = st.split("_")[-1]
        pairs = _resolve_pairs(bundle.space, check.pairs)
        for t in check.grids["t"]:
            for s in check.grids["s"]:
                tasks.append(
                    lambda t=t, s=s: ineq.evaluate_kernel_KL(
                        ctx, variant, t, s, pairs, source=check.source
                    )
                )
        return tasks

    if st == "kernel_lower_heat":
        rows = _resolve_rows(bundle.space, check.rows)
        for t in check.grids["t"]:
            tasks.append(
                lambda t=t: ineq.evaluate_kernel_lower(ctx, t, rows, source=check.source)
            )
        return tasks

    if st == "lichnerowicz":
        return [lambda: ineq.evaluate_lichnerowicz(ctx)]

    if st == "hwi_HW0":
        bank = bundle.bank(check.sampler, backend, n)
        r_grid = check.grids.get("r", ("auto",))
        for label, f in bank:
            for r in r_grid:
                r_val = None if r == "auto" else float(r)
                tasks.append(
                    lambda f=f, r_val=r_val, label=label: ineq.evaluate_hw0(
                        ctx, f, r=r_val, sample=label
                    )
                )
        return tasks

    if st == "hwi_HWI":
        bank = bundle.bank(check.sampler, backend, n)
        for label, f in bank:
            tasks.append(lambda f=f, label=label: ineq.evaluate_hwi(ctx, f, sample=label))
        return tasks

    if st in ("contraction_CTpp", "contraction_CTp"):
        sharp = st == "contraction_CTp"
        m1, m2 = _dirac_masses(bundle, ctx, check.diracs)
        p_grid = (1.0,) if sharp else check.grids.get("p", (1.0,))
        for t in check.grids["t"]:
            for p in p_grid:
                tasks.append(
                    lambda t=t, p=p: ineq.evaluate_contraction(
                        ctx, m1, m2, t, p=p, sharp=sharp, cap=check.cap, slack=check.slack
                    )
                )
        return tasks

    raise ScenarioError("execute", f"no expansion for statement {st!r}")


def summarize(reports: Sequence[ineq.CheckReport]) -> dict:
    """Pass counts, worst margin per statement, and degradation tallies."""
    worst: dict[str, float] = {}
    degraded = 0
    passed = 0
    for rep in reports:
        worst[rep.statement] = min(worst.get(rep.statement, math.inf), rep.margin)
        if rep.passed:
            passed += 1
        if rep.flags.get("degraded") or rep.flags.get("clamped", 0):
            degraded += 1
    return {
        "checks": len(reports),
        "passed": passed,
        "failed": len(reports) - passed,
        "worst_margin": {k: worst[k] for k in sorted(worst)},
        "degraded": degraded,
    }


def run_scenario(
    scenario: Scenario,
    jobs: int = 1,
    tol_scale: float = 1.0,
    cache_dir: Optional[str] = None,
) -> ReportSet:
    """Execute every check of a scenario into an ordered :class:`ReportSet`.

    ``jobs`` > 1 spreads the flat task list over worker threads; all
    shared state is immutable by then, and results are reassembled in
    task order, so the output is identical to the sequential run.
    """
    started = time.perf_counter()
    bundle = _Bundle(scenario, cache_dir=cache_dir)
    for check in scenario.checks:
        if not (check.statement == "kernel_lower_heat" and check.source == "series"):
            bundle.build_backend(bundle.backend_for(check))
    K, n = _resolve_curvature(bundle)
    log.info("scenario %s: K=%g n=%g backend=%s", scenario.name, K, n, scenario.backend)

    tasks: list[Callable[[], ineq.CheckReport]] = []
    for check in scenario.checks:
        tol = _check_tol(scenario, check, tol_scale)
        try:
            tasks.extend(_expand_check(bundle, check, K, n, tol))
        except ScenarioError:
            raise
        except Exception as exc:
            raise ScenarioError("execute", f"{check.statement}: {exc}") from exc

    reports: list[Optional[ineq.CheckReport]] = [None] * len(tasks)
    if jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(task): i for i, task in enumerate(tasks)}
            for fut in concurrent.futures.as_completed(futures):
                reports[futures[fut]] = fut.result()
    else:
        for i, task in enumerate(tasks):
            reports[i] = task()

    done = [r for r in reports if r is not None]
    if len(done) != len(tasks):
        raise ScenarioError("execute", "task results went missing")
    summary = summarize(done)
    summary["scenario"] = scenario.name
    summary["K"] = K
    summary["n"] = n
    summary["expect_violation"] = scenario.expect_violation
    elapsed = time.perf_counter() - started
    log.info(
        "scenario %s: %d checks, %d failed, %.1fs",
        scenario.name,
        summary["checks"],
        summary["failed"],
        elapsed,
    )
    return ReportSet(
        scenario=scenario.echo, reports=done, summary=summary, wall_clock=elapsed
    )
