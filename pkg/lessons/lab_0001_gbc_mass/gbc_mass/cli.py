"""
Batch front-end: mass runs, identity suites, refinement sweeps and the
model listing.

Exit codes: 0 pass, 1 identity failure, 2 config error, 3 numeric or
domain error.
"""

import argparse
import itertools
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import events
from .errors import ConfigError, GBCMassError
from .events import EventBus, EventRecorder
from .extrinsic_geometry import ImmersionModel
from .intrinsic_geometry import MetricModel, ae_decay_check
from .mass_integrals import (
    METHODS,
    MassEstimate,
    estimate_mass,
    field_robustness,
    identity_eligible,
    verify_main_identity,
)
from .models import Model, ae_immersion_check, make_model, zoo
from .reports import IdentityReport, write_json, write_ladder_csv, write_table_csv
from .settings import CONSTANT_VARIANTS, LOG_LEVELS, RunConfig, Settings, load_run_config
from .suite import (
    EXTRINSIC_CHECKS,
    GLOBAL_CHECKS,
    INTRINSIC_CHECKS,
    applicable_orders,
    extrinsic_reports,
    intrinsic_reports,
    sample_points,
)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_IDENTITY_FAILURE = 1
EXIT_NUMERIC = GBCMassError.exit_code


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _out_dir(config: RunConfig) -> Path:
    return Path(config.output_dir)


def _attach_recorder(bus: EventBus | None) -> tuple[EventBus, EventRecorder]:
    bus = EventBus() if bus is None else bus
    return bus, EventRecorder(bus)


def _event_log(bus: EventBus, recorder: EventRecorder) -> list[dict[str, Any]]:
    bus.unsubscribe(recorder.subscription_id)
    return [{"event": name, **payload} for name, payload in recorder.events]


def _agreement(
    estimates: Sequence[MassEstimate], rtol: float, atol: float
) -> tuple[bool, list[dict[str, Any]]]:
    """Pairwise agreement of estimates within rtol plus combined error."""
    pairs = []
    ok = True
    for a, b in itertools.combinations(estimates, 2):
        gap = abs(a.value - b.value)
        allowed = (
            rtol * max(abs(a.value), abs(b.value))
            + a.error_estimate
            + b.error_estimate
            + atol
        )
        pairs.append(
            {"methods": [a.method, b.method], "gap": gap, "allowed": allowed}
        )
        ok = ok and gap <= allowed
    return ok, pairs


def run_mass(
    config: RunConfig, bus: EventBus | None = None
) -> dict[str, Any]:
    """
    Compute the configured masses and write JSON and CSV reports.

    The top-level ``method``, ``extrapolated``, ``error``, ``radii`` and
    ``fluxes`` fields repeat the first estimate; ``estimates`` holds all
    of them. ``events`` lists every run event in publication order.

    Returns:
        The JSON payload; ``pass`` is the pairwise agreement of all
        requested methods
    """
    bus, recorder = _attach_recorder(bus)
    model = make_model(config.model)
    estimates = []
    for method in config.methods:
        logger.info("Mass of %s by %s, q=%d", model.name, method, config.q)
        estimates.append(
            estimate_mass(
                model,
                config.q,
                method,
                config.identity,
                config.vector_field,
                bus,
            )
        )
    passed, pairs = _agreement(
        estimates, config.identity.rtol, config.identity.atol
    )
    out = _out_dir(config)
    for estimate in estimates:
        if estimate.series is not None:
            write_ladder_csv(
                out / f"{model.name}_{estimate.method}_q{config.q}.csv",
                list(estimate.series.radii),
                list(estimate.series.values),
            )
    payload = {
        "model": model.name,
        "parameters": dict(config.model.parameters),
        "q": config.q,
        "constant_variant": config.identity.constant_variant,
        "estimates": [
            {"model": model.name, **e.to_dict()} for e in estimates
        ],
        "agreement": pairs,
        "pass": passed,
    }
    first = estimates[0].to_dict()
    payload.update(
        method=first["method"],
        extrapolated=first["extrapolated"],
        error=first["error"],
        radii=first.get("radii", []),
        fluxes=first.get("fluxes", []),
        events=_event_log(bus, recorder),
    )
    write_json(out / f"{model.name}_mass_q{config.q}.json", payload)
    return payload


def _selected(config: RunConfig, candidates: Sequence[str]) -> list[str]:
    if config.checks is None:
        return list(candidates)
    return [c for c in candidates if c in config.checks]


def _global_reports(
    model: Model, config: RunConfig, bus: EventBus | None
) -> list[IdentityReport]:
    checks = _selected(config, GLOBAL_CHECKS)
    radii = config.identity.radii
    if model.rho_max != float("inf"):
        logger.info("Skipping asymptotic checks on the bounded chart of %s", model.name)
        return []
    reports = []
    if "ae_decay" in checks:
        if isinstance(model, ImmersionModel):
            reports.append(ae_immersion_check(model, None, radii))
        else:
            reports.append(ae_decay_check(model, radii, q=config.q))
    eligible = identity_eligible(model, config.q)
    if "main_identity" in checks and isinstance(model, ImmersionModel):
        if eligible:
            reports.append(
                verify_main_identity(model, config.q, config.identity, bus)
            )
        else:
            logger.info("%s is not eligible for q=%d", model.name, config.q)
    if "field_robustness" in checks and isinstance(model, MetricModel):
        if eligible:
            reports.append(field_robustness(model, config.q, config.identity))
    return reports


def run_verify(
    config: RunConfig, bus: EventBus | None = None
) -> list[IdentityReport]:
    """
    Run the pointwise identity suite and the applicable global checks.

    The JSON report lists the run events under ``events``.

    Returns:
        All reports; the CLI exits with 1 if any of them failed
    """
    bus, recorder = _attach_recorder(bus)
    model = make_model(config.model)
    orders = applicable_orders(model.dim, config.q)
    points = sample_points(model, config.sample_points, config.seed)
    metric = (
        model.induced_metric_model()
        if isinstance(model, ImmersionModel)
        else model
    )
    reports = intrinsic_reports(
        metric,
        orders,
        points,
        config.pointwise_rtol,
        checks=_selected(config, INTRINSIC_CHECKS),
    )
    if isinstance(model, ImmersionModel):
        reports += extrinsic_reports(
            model,
            orders,
            points,
            config.pointwise_rtol,
            riemann_sign=config.riemann_sign,
            checks=_selected(config, EXTRINSIC_CHECKS),
        )
    reports += _global_reports(model, config, bus)

    for report in reports:
        events.publish(
            bus, events.IDENTITY_CHECKED, name=report.name, passed=report.passed
        )
        level = logging.INFO if report.passed else logging.WARNING
        logger.log(
            level,
            "%s: %s (worst %.3e, tolerance %.1e)",
            report.name,
            "pass" if report.passed else "FAIL",
            report.worst,
            report.tolerance,
        )
    write_json(
        _out_dir(config) / f"{model.name}_verify_q{config.q}.json",
        {
            "model": model.name,
            "q": config.q,
            "constant_variant": config.identity.constant_variant,
            "flip_riemann_sign": config.flip_riemann_sign,
            "reports": [r.to_dict() for r in reports],
            "pass": all(r.passed for r in reports),
            "events": _event_log(bus, recorder),
        },
    )
    return reports


def run_sweep(config: RunConfig) -> list[list[Any]]:
    """
    Refinement study of the first configured method.

    Varies the sphere resolution over ``sweep_nodes`` on the configured
    ladder, then the ladder length over ``sweep_rungs`` (doubling from
    the first radius) at the configured resolution.
    """
    model = make_model(config.model)
    method = config.methods[0]
    rows: list[list[Any]] = []
    base = config.identity

    def record(kind: str, identity: Any) -> None:
        estimate = estimate_mass(
            model, config.q, method, identity, config.vector_field
        )
        exponent = (
            estimate.series.fit_exponent if estimate.series is not None else None
        )
        rows.append(
            [
                kind,
                identity.nodes_per_angle,
                len(identity.radii),
                repr(estimate.value),
                repr(estimate.error_estimate),
                "" if exponent is None else repr(exponent),
            ]
        )

    for nodes in config.sweep_nodes:
        record("nodes", replace(base, nodes_per_angle=nodes))
    for rungs in config.sweep_rungs:
        radii = tuple(base.radii[0] * 2.0**k for k in range(rungs))
        terms = min(base.correction_terms, rungs - 1)
        record("rungs", replace(base, radii=radii, correction_terms=terms))

    write_table_csv(
        _out_dir(config) / f"{model.name}_{method}_sweep_q{config.q}.csv",
        ["kind", "nodes_per_angle", "rungs", "extrapolated", "error", "fit_exponent"],
        rows,
    )
    return rows


def zoo_table() -> list[list[str]]:
    """One row per zoo model: name, kind, defaults, expectation."""
    return [
        [
            entry.name,
            entry.kind,
            ", ".join(f"{k}={v}" for k, v in entry.defaults.items()),
            f"{entry.expected} [{entry.provenance}]",
        ]
        for entry in zoo()
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbc-mass",
        description="ADM and Gauss-Bonnet-Chern masses of model geometries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--model", help="Zoo model name")
    common.add_argument("--q", type=int, help="Mass order")
    common.add_argument(
        "--method",
        action="append",
        choices=METHODS,
        help="Mass method (repeatable)",
    )
    common.add_argument("--out", help="Report directory")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument(
        "--constant", choices=CONSTANT_VARIANTS, help="Bulk identity constant"
    )
    common.add_argument("--log-level", choices=LOG_LEVELS)

    sub.add_parser("mass", parents=[common], help="Compute masses")
    verify = sub.add_parser(
        "verify", parents=[common], help="Run the identity suite"
    )
    verify.add_argument(
        "--flip-riemann-sign",
        action="store_true",
        default=None,
        help="Debug: reverse the Riemann sign (negative control)",
    )
    sub.add_parser("sweep", parents=[common], help="Refinement study")
    sub.add_parser("zoo", help="List the model zoo")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "model.name": args.model,
        "run.q": args.q,
        "run.methods": args.method,
        "output.dir": args.out,
        "run.threads": args.threads,
        "run.constant": args.constant,
        "output.log_level": args.log_level,
        "run.flip_riemann_sign": getattr(args, "flip_riemann_sign", None),
    }


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    settings = Settings()

    if args.command == "zoo":
        for row in zoo_table():
            print("  ".join(row))
        return EXIT_PASS

    try:
        config = load_run_config(args.config, _overrides(args), settings)
        configure_logging(config.log_level)
        bus = EventBus()
        bus.subscribe(events.ALL_EVENTS, events.log_event)

        if args.command == "mass":
            payload = run_mass(config, bus)
            logger.info("Collected %d run events", len(payload["events"]))
            return EXIT_PASS if payload["pass"] else EXIT_IDENTITY_FAILURE
        if args.command == "verify":
            reports = run_verify(config, bus)
            failed = [r.name for r in reports if not r.passed]
            if failed:
                logger.error("Failed checks: %s", ", ".join(failed))
                return EXIT_IDENTITY_FAILURE
            return EXIT_PASS
        run_sweep(config)
        return EXIT_PASS
    except GBCMassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (AssertionError, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: invalid environment setting: {exc}", file=sys.stderr)
        return ConfigError.exit_code
