"""Command-line front end for the semigroup inequality bench.

Subcommands::

    cdbench check circle-flat interval-ou      # run scenarios, emit reports
    cdbench sweep interval-ou --grid t=0.05,0.2
    cdbench spectrum sphere-round              # spectral gap bound only
    cdbench transport transport-sphere         # contraction checks only
    cdbench validate scenarios/*.yaml          # parse + validate, no solve

Scenario arguments are file paths or names of bundled scenarios.  Exit
status: 0 when every check outside falsification scenarios passes, 1 when
one fails, 2 for configuration errors.  Scenarios marked
``expect_violation`` never gate the exit status; their failures are the
behavior under test.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from typing import Optional

import yaml

from . import reporting
from .harness import (
    ReportSet,
    Scenario,
    ScenarioError,
    _Bundle,
    _resolve_curvature,
    build_scenario,
    load_scenario,
    run_scenario,
)
from .semigroup import spectral_gap

log = logging.getLogger(__name__)

_BUNDLED_DIR = os.path.join(os.path.dirname(__file__), "scenarios")


def resolve_scenario_path(name: str) -> str:
    """A filesystem path as given, or the bundled scenario of that name."""
    if os.path.exists(name):
        return name
    candidate = os.path.join(_BUNDLED_DIR, f"{name}.yaml")
    if os.path.exists(candidate):
        return candidate
    raise ScenarioError("load", f"no scenario file or bundled scenario named {name!r}")


def bundled_scenarios() -> list[str]:
    if not os.path.isdir(_BUNDLED_DIR):
        return []
    return sorted(
        os.path.splitext(f)[0] for f in os.listdir(_BUNDLED_DIR) if f.endswith(".yaml")
    )


def _emit_all(rs: ReportSet, scenario: Scenario, out_dir: str, formats: list[str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for fmt in formats:
        ext = reporting.default_extension(fmt)
        path = os.path.join(out_dir, f"{scenario.output_prefix}.{ext}")
        reporting.emit_reports(rs, fmt, path)
        log.info("wrote %s", path)


def _print_summary(rs: ReportSet) -> None:
    s = rs.summary
    head = "expected-violation run" if s.get("expect_violation") else "run"
    print(
        f"{s['scenario']}: {s['passed']}/{s['checks']} checks passed "
        f"({head}, K={s['K']:g}, n={s['n']:g}, {rs.wall_clock:.1f}s)"
    )
    for name, margin in s["worst_margin"].items():
        failed = any(
            (not rep.passed) and rep.statement == name for rep in rs.reports
        )
        tag = "FAIL" if failed else "pass"
        print(f"  [{tag}] {name:<18} worst margin {margin:+.3e}")
    if s["degraded"]:
        print(f"  note: {s['degraded']} report(s) carry clamp/degradation flags")


def _gate(rs: ReportSet) -> bool:
    """True when this run keeps the exit status at zero."""
    if rs.summary.get("expect_violation"):
        if rs.summary["failed"] == 0:
            print(f"  warning: {rs.summary['scenario']} expected a violation "
                  "but every check passed")
        return True
    return rs.summary["failed"] == 0


def _run_paths(args, scenarios: list[Scenario]) -> int:
    ok = True
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    for scenario in scenarios:
        rs = run_scenario(
            scenario, jobs=args.jobs, tol_scale=args.tol_scale, cache_dir=args.cache_dir
        )
        _emit_all(rs, scenario, args.out, formats)
        _print_summary(rs)
        ok = _gate(rs) and ok
    return 0 if ok else 1


def _cmd_check(args) -> int:
    return _run_paths(args, [load_scenario(resolve_scenario_path(p)) for p in args.scenario])


def _parse_grid_overrides(entries: list[str]) -> dict[str, list]:
    grids: dict[str, list] = {}
    for entry in entries:
        key, sep, raw = entry.partition("=")
        if not sep or not raw:
            raise ScenarioError("validate", f"--grid wants key=v1,v2,..., got {entry!r}")
        values = []
        for tok in raw.split(","):
            values.append(tok if tok == "auto" else float(tok))
        grids[key.strip()] = values
    return grids


def _cmd_sweep(args) -> int:
    path = resolve_scenario_path(args.scenario)
    with open(path, "r", encoding="utf-8") as fh:
        mapping = yaml.safe_load(fh)
    overrides = _parse_grid_overrides(args.grid or [])
    touched = set()
    for check in mapping.get("checks") or ():
        for key, values in overrides.items():
            if key in check:
                check[key] = values
                touched.add(key)
    missing = set(overrides) - touched
    if missing:
        raise ScenarioError(
            "validate", f"grid override(s) {sorted(missing)} match no check"
        )
    name = os.path.splitext(os.path.basename(path))[0]
    scenario = build_scenario(mapping, name=name)
    return _run_paths(args, [scenario])


def _cmd_spectrum(args) -> int:
    scenario = load_scenario(resolve_scenario_path(args.scenario))
    bundle = _Bundle(scenario, cache_dir=args.cache_dir)
    bundle.build_backend(scenario.backend)
    K, n = _resolve_curvature(bundle)
    gap = spectral_gap(bundle.caches[scenario.backend])
    print(f"{scenario.name}: spectral gap {gap:.12g} (K={K:g}, n={n:g})")
    if not (K < 0.0 and n > 1.0):
        print("  spectral-gap lower bound needs K < 0 and n > 1; nothing to check")
        return 0
    from .harness import CheckSpec

    trimmed = dataclasses.replace(
        scenario, checks=(CheckSpec(statement="lichnerowicz"),)
    )
    return _run_paths(args, [trimmed])


def _cmd_transport(args) -> int:
    scenario = load_scenario(resolve_scenario_path(args.scenario))
    kept = tuple(c for c in scenario.checks if c.statement.startswith("contraction"))
    if not kept:
        raise ScenarioError("validate", f"{scenario.name} has no contraction checks")
    return _run_paths(args, [dataclasses.replace(scenario, checks=kept)])


def _cmd_validate(args) -> int:
    for name in args.scenario:
        scenario = load_scenario(resolve_scenario_path(name))
        print(
            f"{scenario.name}: ok ({len(scenario.checks)} checks, "
            f"{len(scenario.samplers)} samplers)"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdbench",
        description="Margin checks for curvature-dimension semigroup bounds",
        epilog=f"bundled scenarios: {', '.join(bundled_scenarios()) or '(none)'}",
    )
    parser.add_argument("--out", default="reports", help="output directory")
    parser.add_argument(
        "--format",
        default="json,csv,svg",
        help="comma list of report formats (json, csv, svg)",
    )
    parser.add_argument(
        "--cache-dir",
        default=os.environ.get("CDBENCH_CACHE_DIR") or None,
        help="directory for reusable eigendecompositions "
        "(default: $CDBENCH_CACHE_DIR)",
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker threads")
    parser.add_argument(
        "--tol-scale", type=float, default=1.0, help="multiply every tolerance"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run scenarios and emit reports")
    p.add_argument("scenario", nargs="+")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sweep", help="run one scenario with overridden grids")
    p.add_argument("scenario")
    p.add_argument("--grid", action="append", metavar="key=v1,v2", default=[])
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("spectrum", help="spectral gap and its curvature bound")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("transport", help="contraction checks only")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_transport)

    p = sub.add_parser("validate", help="parse and validate without solving")
    p.add_argument("scenario", nargs="+")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
