"""
Pointwise identity suite.

Each check evaluates one identity at seeded random chart points and
returns an IdentityReport with one relative residual per point. Checks
built on central differences instead report the log-log slope of the
residual against the step, which must be 2 for a correct pipeline.
"""

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from core.helpers import loglog_slope, relative_residual

from .extrinsic_geometry import (
    ExtrinsicPoint,
    ImmersionModel,
    divergence_identity_residual,
    extrinsic_at,
    gauss_relation_residual,
    mean_curvatures,
    newton_pairing,
    newton_trace,
    newton_transformation,
    pohozaev_schoen_residual,
)
from .intrinsic_geometry import (
    MetricModel,
    curvature_at,
    curvature_from_sample,
    lovelock_divergence_residual,
)
from .reports import IdentityReport, residual_report
from .tensor_core import p_tensor, riemann_contraction, symmetry_residual

logger = logging.getLogger(__name__)

FD_STEPS = (1e-2, 5e-3, 2.5e-3)
FD_ORDER = 2.0
FD_SLOPE_TOLERANCE = 0.2
FD_FLOOR = 1e-12

CHECK_TOLERANCES = {
    "lovelock_trace": 1e-9,
    "p_symmetry": 1e-10,
    "p_contraction": 1e-9,
    "einstein": 1e-9,
    "newton_trace": 1e-9,
    "newton_pairing": 1e-9,
    "gauss_relation": 1e-8,
}
INTRINSIC_CHECKS = (
    "lovelock_trace",
    "p_symmetry",
    "p_contraction",
    "einstein",
    "lovelock_divergence",
)
EXTRINSIC_CHECKS = (
    "newton_trace",
    "newton_pairing",
    "gauss_relation",
    "divergence_identity",
    "pohozaev_schoen",
)
GLOBAL_CHECKS = ("ae_decay", "main_identity", "field_robustness")
ALL_CHECKS = INTRINSIC_CHECKS + EXTRINSIC_CHECKS + GLOBAL_CHECKS


def sample_points(
    model: MetricModel | ImmersionModel, count: int, seed: int = 0
) -> NDArray:
    """
    Seeded random chart points away from the chart boundary.

    Bounded charts are sampled between 10% and 80% of their radial
    range; exterior charts between max(1.5 rho_min, 0.5) and 10 more.
    """
    rng = np.random.default_rng(seed)
    if math.isfinite(model.rho_max):
        span = model.rho_max - model.rho_min
        low, high = model.rho_min + 0.1 * span, model.rho_min + 0.8 * span
    else:
        low = max(1.5 * model.rho_min, 0.5)
        high = low + 10.0
    directions = rng.normal(size=(count, model.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.uniform(low, high, size=count)
    return directions * radii[:, None]


def convergence_slope(
    residual: Callable[[float], float],
    steps: Sequence[float] = FD_STEPS,
    floor: float = FD_FLOOR,
) -> tuple[float, list[float]]:
    """
    Log-log slope of a finite-difference residual against the step.

    Returns:
        (slope, residuals); the slope is nan when every residual is
        below ``floor``
    """
    values = [residual(h) for h in steps]
    if all(v <= floor for v in values):
        return math.nan, values
    return loglog_slope(steps, [max(v, floor) for v in values]), values


def fd_report(
    name: str,
    residual_at: Callable[[NDArray, float], float],
    points: NDArray,
    steps: Sequence[float] = FD_STEPS,
) -> IdentityReport:
    """Judge an O(h^2) residual at each point by its convergence slope."""
    slopes = []
    ladders = []
    for x in points:
        slope, values = convergence_slope(lambda h: residual_at(x, h), steps)
        slopes.append(slope)
        ladders.append(values)
    gaps = [0.0 if math.isnan(s) else abs(s - FD_ORDER) for s in slopes]
    passed = all(g <= FD_SLOPE_TOLERANCE for g in gaps)
    if not passed:
        logger.warning("%s: convergence slopes %s", name, slopes)
    return IdentityReport(
        name=name,
        residuals=gaps,
        tolerance=FD_SLOPE_TOLERANCE,
        passed=passed,
        notes=["residual judged by its h^2 convergence"],
        details={"steps": list(steps), "slopes": slopes, "residuals": ladders},
    )


def _tolerance(name: str, override: float | None) -> float:
    return override if override is not None else CHECK_TOLERANCES[name]


def intrinsic_reports(
    model: MetricModel,
    q_values: Sequence[int],
    points: NDArray,
    rtol: float | None = None,
    fd_points: int = 3,
    checks: Sequence[str] = INTRINSIC_CHECKS,
) -> list[IdentityReport]:
    """
    Lovelock and P-tensor identities of a metric at sample points.

    Args:
        model: Metric model
        q_values: Orders to test, each with 2q < n
        points: Chart points
        rtol: Override of the per-check relative tolerances
        fd_points: Points used for the divergence check
        checks: Subset of INTRINSIC_CHECKS to run
    """
    n = model.dim
    reports = []
    for q in q_values:
        trace, sym, contraction, einstein = [], [], [], []
        for x in points:
            cp = curvature_from_sample(model.evaluate(x), q)
            g_inv = cp.metric_inverse.components
            scale = float(np.max(np.abs(cp.riemann_mixed.components))) ** q
            lovelock = cp.lovelock.components
            trace_gap = float(np.einsum("ij,ij->", g_inv, lovelock)) + (
                (n - 2 * q) / 2
            ) * cp.gauss_bonnet
            trace.append(
                relative_residual(
                    abs(trace_gap), max(scale, abs(cp.gauss_bonnet))
                )
            )
            p = p_tensor(cp.riemann_mixed, cp.metric_inverse, q)
            sym.append(symmetry_residual(p.components, "riemann-4"))
            full = riemann_contraction(p, cp.riemann_low)
            contraction.append(
                relative_residual(
                    abs(full - cp.gauss_bonnet),
                    max(scale, abs(cp.gauss_bonnet)),
                )
            )
            if q == 1:
                gap = np.max(np.abs(lovelock - cp.einstein.components))
                einstein.append(relative_residual(float(gap), scale))
        suffix = f"[q={q}]"
        if "lovelock_trace" in checks:
            reports.append(
                residual_report(
                    f"lovelock_trace{suffix}",
                    trace,
                    _tolerance("lovelock_trace", rtol),
                )
            )
        if "p_symmetry" in checks:
            reports.append(
                residual_report(
                    f"p_symmetry{suffix}", sym, _tolerance("p_symmetry", rtol)
                )
            )
        if "p_contraction" in checks:
            reports.append(
                residual_report(
                    f"p_contraction{suffix}",
                    contraction,
                    _tolerance("p_contraction", rtol),
                )
            )
        if q == 1 and "einstein" in checks:
            reports.append(
                residual_report(
                    "einstein", einstein, _tolerance("einstein", rtol)
                )
            )
        if "lovelock_divergence" in checks:
            reports.append(
                fd_report(
                    f"lovelock_divergence{suffix}",
                    lambda x, h, q=q: lovelock_divergence_residual(
                        model, x, q, h
                    ),
                    points[:fd_points],
                )
            )
    return reports


def _newton_residuals(ep: ExtrinsicPoint, n: int) -> tuple[float, float]:
    """Worst relative trace and pairing residuals over p = 0..n."""
    b_scale = max(float(np.max(np.abs(ep.second_ff))), 1e-300)
    trace_worst = pairing_worst = 0.0
    for p in range(n + 1):
        newton = newton_transformation(ep, p)
        s = mean_curvatures(ep, p)
        lhs = newton_trace(ep, newton)
        rhs = (n - p) * (s.value_even if p % 2 == 0 else s.value_odd)
        scale = max(b_scale**p * math.comb(n, p), float(np.max(np.abs(rhs))))
        gap = float(np.max(np.abs(lhs - rhs)))
        trace_worst = max(trace_worst, relative_residual(gap, scale))
        if p % 2 == 0 and p < n:
            paired = newton_pairing(ep, newton)
            expected = (p + 1) * mean_curvatures(ep, p + 1).value_odd
            scale = max(
                b_scale ** (p + 1) * math.comb(n, p + 1),
                float(np.max(np.abs(expected))),
            )
            gap = float(np.max(np.abs(paired - expected)))
            pairing_worst = max(pairing_worst, relative_residual(gap, scale))
    return trace_worst, pairing_worst


def extrinsic_reports(
    model: ImmersionModel,
    q_values: Sequence[int],
    points: NDArray,
    rtol: float | None = None,
    riemann_sign: float = 1.0,
    fd_points: int = 3,
    checks: Sequence[str] = EXTRINSIC_CHECKS,
) -> list[IdentityReport]:
    """
    Newton-transformation and Gauss-relation identities of an immersion.

    ``riemann_sign`` is handed to the intrinsic side of the Gauss
    relation only; -1 is the negative control.
    """
    n = model.intrinsic_dim
    metric = model.induced_metric_model()
    reports = []

    traces, pairings = [], []
    for x in points:
        trace_gap, pairing_gap = _newton_residuals(extrinsic_at(model, x), n)
        traces.append(trace_gap)
        pairings.append(pairing_gap)
    if "newton_trace" in checks:
        reports.append(
            residual_report(
                "newton_trace", traces, _tolerance("newton_trace", rtol)
            )
        )
    if "newton_pairing" in checks:
        reports.append(
            residual_report(
                "newton_pairing", pairings, _tolerance("newton_pairing", rtol)
            )
        )

    for q in q_values:
        suffix = f"[q={q}]"
        if "gauss_relation" in checks:
            gaps = []
            for x in points:
                cp = curvature_at(metric, x, q)
                scale = max(
                    float(np.max(np.abs(cp.riemann_mixed.components))) ** q,
                    float(np.max(np.abs(cp.lovelock.components))),
                )
                gaps.append(
                    relative_residual(
                        gauss_relation_residual(model, x, q, riemann_sign),
                        scale,
                    )
                )
            report = residual_report(
                f"gauss_relation{suffix}",
                gaps,
                _tolerance("gauss_relation", rtol),
            )
            if riemann_sign != 1.0:
                report.notes.append("Riemann sign flipped (debug)")
            reports.append(report)
        if "divergence_identity" in checks:
            reports.append(
                fd_report(
                    f"divergence_identity{suffix}",
                    lambda x, h, q=q: divergence_identity_residual(
                        model, x, q, h
                    ),
                    points[:fd_points],
                )
            )
        if "pohozaev_schoen" in checks:

            def lovelock_field(y: NDArray, q: int = q) -> NDArray:
                return curvature_at(metric, y, q).lovelock.components

            reports.append(
                fd_report(
                    f"pohozaev_schoen{suffix}",
                    lambda x, h, field=lovelock_field: pohozaev_schoen_residual(
                        field, lambda y: y, metric, x, h
                    ),
                    points[:fd_points],
                )
            )
    return reports


def applicable_orders(dim: int, q: int) -> list[int]:
    """Orders tested by the suite: 1 and q, as far as 2q < n allows."""
    return sorted({k for k in (1, q) if 2 * k < dim})
