"""
Model zoo: analytic metrics and immersions with known or cross-checkable
masses, plus the decay checker for asymptotically Euclidean immersions.

Every model is written once in plain arithmetic over coordinate jets, so
the same code yields values and exact partial derivatives. Expected
masses recorded here for constructed profiles are regression baselines
produced by the flux pipeline, not closed-form ground truth.
"""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray

from core.helpers import validate_ladder

from .dual import exp, log, sqrt, value_of
from .errors import SpecError
from .extrinsic_geometry import ImmersionModel
from .intrinsic_geometry import (
    MetricModel,
    ae_decay_check,
    bounded_trend,
    sample_directions,
)
from .reports import IdentityReport

logger = logging.getLogger(__name__)

ModelKind = Literal["metric", "immersion"]
Model = MetricModel | ImmersionModel


@dataclass(frozen=True)
class ModelSpec:
    """
    A request for a zoo model.

    Args:
        name: Registered model name
        parameters: Overrides of the model's default parameters

    Examples:
        >>> ModelSpec("schwarzschild", {"n": 3, "m": 1.0}).name
        'schwarzschild'
    """

    name: str
    parameters: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ZooEntry:
    """
    A registered model builder with its documentation.

    ``expected`` states the expected mass or behaviour; ``provenance``
    says where that expectation comes from (derived, regression,
    trivial or negative-control).
    """

    name: str
    kind: ModelKind
    builder: Callable[[dict[str, Any]], Model]
    defaults: Mapping[str, Any]
    expected: str
    provenance: str


_ZOO: dict[str, ZooEntry] = {}


def register(
    name: str,
    kind: ModelKind,
    defaults: Mapping[str, Any],
    expected: str,
    provenance: str,
) -> Callable[[Callable[[dict[str, Any]], Model]], Callable[[dict[str, Any]], Model]]:
    """Decorator adding a model builder to the zoo."""

    def decorator(
        builder: Callable[[dict[str, Any]], Model],
    ) -> Callable[[dict[str, Any]], Model]:
        assert name not in _ZOO, f"Model {name!r} registered twice"
        _ZOO[name] = ZooEntry(name, kind, builder, dict(defaults), expected, provenance)
        return builder

    return decorator


def zoo() -> list[ZooEntry]:
    """All registered models, sorted by name."""
    return [_ZOO[name] for name in sorted(_ZOO)]


def zoo_entry(name: str) -> ZooEntry:
    try:
        return _ZOO[name]
    except KeyError:
        known = ", ".join(sorted(_ZOO))
        raise SpecError(f"Unknown model {name!r}; known models: {known}") from None


def make_model(spec: ModelSpec) -> Model:
    """
    Build the model a spec asks for.

    Args:
        spec: Model name and parameter overrides

    Returns:
        An immutable MetricModel or ImmersionModel

    Raises:
        SpecError: For unknown models, unknown parameters or parameters
            outside their validity range
    """
    entry = zoo_entry(spec.name)
    unknown = set(spec.parameters) - set(entry.defaults)
    if unknown:
        raise SpecError(
            f"Model {spec.name!r} has no parameters {sorted(unknown)}; "
            f"accepted: {sorted(entry.defaults)}"
        )
    params = {**entry.defaults, **spec.parameters}
    model = entry.builder(params)
    logger.debug("Built model %s with %s", model.name, params)
    return model


# -- parameter helpers ---------------------------------------------------------


def _dimension(params: dict[str, Any], allowed: range | tuple[int, ...]) -> int:
    n = params["n"]
    if not isinstance(n, int) or n not in allowed:
        raise SpecError(f"Dimension n={n!r} not in {list(allowed)}")
    return n


def _number(params: dict[str, Any], key: str) -> float:
    value = params[key]
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise SpecError(f"Parameter {key}={value!r} must be a number")
    if not math.isfinite(value):
        raise SpecError(f"Parameter {key} must be finite")
    return float(value)


def _positive(params: dict[str, Any], key: str) -> float:
    value = _number(params, key)
    if value <= 0:
        raise SpecError(f"Parameter {key}={value} must be positive")
    return value


def _radius(xs: list) -> Any:
    return sqrt(sum(x * x for x in xs))


def _conformal_metric(factor: Any, n: int) -> list[list[Any]]:
    return [[factor if i == j else 0.0 for j in range(n)] for i in range(n)]


# -- metric models -------------------------------------------------------------


@register(
    "flat",
    "metric",
    {"n": 3, "tau": 1.0},
    "mass 0 for every method and order; every check passes",
    "trivial",
)
def _flat(params: dict[str, Any]) -> MetricModel:
    n = _dimension(params, range(3, 9))
    return MetricModel(
        dim=n,
        components=lambda xs: _conformal_metric(1.0, n),
        decay_order=_positive(params, "tau"),
        name="flat",
    )


def schwarzschild_factor(n: int, m: float) -> Callable[[float], tuple[float, float, float]]:
    """F(r) = (1 + m / (2 r^(n-2)))^(4/(n-2)) with F' and F''."""
    k = 4.0 / (n - 2)

    def factor(r: float) -> tuple[float, float, float]:
        phi = 1.0 + m / (2.0 * r ** (n - 2))
        dphi = -(n - 2) * m / (2.0 * r ** (n - 1))
        ddphi = (n - 2) * (n - 1) * m / (2.0 * r**n)
        f = phi**k
        df = k * phi ** (k - 1) * dphi
        ddf = k * ((k - 1) * phi ** (k - 2) * dphi**2 + phi ** (k - 1) * ddphi)
        return f, df, ddf

    return factor


@register(
    "schwarzschild",
    "metric",
    {"n": 3, "m": 1.0, "center": None, "rho_min": None, "analytic": False},
    "ADM mass m; every GBC mass of order q >= 2 vanishes in the limit",
    "derived: flux of the conformal factor is m (1 + m / 2rho^(n-2))^...",
)
def _schwarzschild(params: dict[str, Any]) -> MetricModel:
    """
    Isotropic Schwarzschild, optionally in a translated chart.

    g = (1 + m / (2 r^(n-2)))^(4/(n-2)) delta with r = |x - center|.
    """
    n = _dimension(params, (3, 4, 5))
    m = _number(params, "m")
    center = np.zeros(n) if params["center"] is None else np.asarray(
        params["center"], dtype=float
    )
    if center.shape != (n,):
        raise SpecError(f"center must have {n} entries")
    # the conformal factor vanishes (m < 0) or the horizon sits (m > 0) here
    horizon = (abs(m) / 2.0) ** (1.0 / (n - 2))
    lowest = float(np.linalg.norm(center)) + horizon
    rho_min = lowest if params["rho_min"] is None else _number(params, "rho_min")
    if rho_min < lowest or (m < 0 and rho_min <= lowest):
        raise SpecError(
            f"rho_min={rho_min} must exceed {lowest:.6g} for m={m}, "
            f"center={center.tolist()}"
        )
    k = 4.0 / (n - 2)
    factor = schwarzschild_factor(n, m)

    def components(xs: list) -> list[list[Any]]:
        r = _radius([x - c for x, c in zip(xs, center, strict=True)])
        phi = 1.0 + m / (2.0 * r ** (n - 2))
        return _conformal_metric(phi**k, n)

    def analytic(x: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        y = x - center
        r = float(np.linalg.norm(y))
        f, df, ddf = factor(r)
        u = y / r
        eye = np.eye(n)
        radial = np.outer(u, u)
        dscalar = df * u
        ddscalar = ddf * radial + df * (eye - radial) / r
        return (
            f * eye,
            np.einsum("ij,k->ijk", eye, dscalar),
            np.einsum("ij,kl->ijkl", eye, ddscalar),
        )

    shifted = bool(np.any(center != 0.0))
    return MetricModel(
        dim=n,
        components=components,
        rho_min=rho_min,
        decay_order=float(n - 2),
        name="schwarzschild-shifted" if shifted else "schwarzschild",
        analytic=analytic,
        prefer_analytic=bool(params["analytic"]),
    )


def _conformal_builder(
    params: dict[str, Any], decay_order: float, name: str
) -> MetricModel:
    n = _dimension(params, range(3, 9))
    m = _number(params, "m")
    power = _positive(params, "power")
    dipole = _number(params, "dipole")
    # (1 + rho^2)^(-p/2) <= 1 and |x_1| (1 + rho^2)^(-(p+1)/2) <= 1
    if abs(m) + abs(dipole) >= 1.0:
        raise SpecError(
            f"|m| + |dipole| = {abs(m) + abs(dipole)} must be below 1 to "
            "keep the conformal factor positive"
        )
    k = 4.0 / (n - 2)

    def components(xs: list) -> list[list[Any]]:
        s = 1.0 + sum(x * x for x in xs)
        u = 1.0 + m * s ** (-power / 2.0) + dipole * xs[0] * s ** (-(power + 1.0) / 2.0)
        return _conformal_metric(u**k, n)

    return MetricModel(
        dim=n,
        components=components,
        decay_order=decay_order,
        name=name,
    )


@register(
    "conformal",
    "metric",
    {"n": 5, "m": 0.5, "power": 0.5, "dipole": 0.0},
    "finite GBC mass of order q when power = (n-2q)/q; value is a "
    "regression baseline",
    "regression",
)
def _conformal(params: dict[str, Any]) -> MetricModel:
    """u^(4/(n-2)) delta with u = 1 + m s^(-p/2) + d x_1 s^(-(p+1)/2), s = 1 + rho^2."""
    return _conformal_builder(params, _positive(params, "power"), "conformal")


@register(
    "slow-decay",
    "metric",
    {"n": 3, "m": 0.5, "power": 0.3, "dipole": 0.0, "claimed_tau": 1.0},
    "fails the decay check at its claimed order",
    "negative-control",
)
def _slow_decay(params: dict[str, Any]) -> MetricModel:
    return _conformal_builder(params, _positive(params, "claimed_tau"), "slow-decay")


@register(
    "sphere-patch",
    "metric",
    {"n": 4, "radius": 1.0, "rho_max": 1.0},
    "constant sectional curvature 1/radius^2",
    "derived: stereographic chart of the round sphere",
)
def _sphere_patch(params: dict[str, Any]) -> MetricModel:
    """g = (2 r^2 / (r^2 + rho^2))^2 delta on rho <= rho_max."""
    n = _dimension(params, range(3, 9))
    r = _positive(params, "radius")

    def components(xs: list) -> list[list[Any]]:
        conformal = 2.0 * r * r / (r * r + sum(x * x for x in xs))
        return _conformal_metric(conformal * conformal, n)

    return MetricModel(
        dim=n,
        components=components,
        rho_max=_positive(params, "rho_max"),
        decay_order=0.0,
        name="sphere-patch",
    )


# -- immersion models ----------------------------------------------------------


@register(
    "flat-inclusion",
    "immersion",
    {"n": 3, "d": 4, "tau": 1.0},
    "induced metric exactly delta; mass and bulk integrals 0",
    "trivial",
)
def _flat_inclusion(params: dict[str, Any]) -> ImmersionModel:
    n = _dimension(params, range(3, 9))
    d = params["d"]
    if not isinstance(d, int) or d <= n:
        raise SpecError(f"Ambient dimension d={d!r} must exceed n={n}")
    return ImmersionModel(
        intrinsic_dim=n,
        ambient_dim=d,
        map=lambda xs: [*xs, *([0.0] * (d - n))],
        decay_order=_positive(params, "tau"),
        name="flat-inclusion",
    )


@register(
    "schwarzschild-graph",
    "immersion",
    {"m": 1.0},
    "induced metric is isotropic Schwarzschild: mass m, bulk identity holds",
    "derived: rotational hypersurface of R^4 in the isotropic chart",
)
def _schwarzschild_graph(params: dict[str, Any]) -> ImmersionModel:
    """
    psi(x) = ((1 + m/2rho)^2 x, sqrt(8m) (rho^(1/2) - (m/2) rho^(-1/2))).

    Starts at the horizon rho = m/2, where the position is normal.
    """
    m = _positive(params, "m")
    height = math.sqrt(8.0 * m)

    def immersion(xs: list) -> list[Any]:
        rho = _radius(xs)
        scale = (1.0 + m / (2.0 * rho)) ** 2
        root = sqrt(rho)
        return [scale * x for x in xs] + [height * (root - 0.5 * m / root)]

    return ImmersionModel(
        intrinsic_dim=3,
        ambient_dim=4,
        map=immersion,
        rho_min=m / 2.0,
        decay_order=1.0,
        name="schwarzschild-graph",
    )


@register(
    "bump-graph",
    "immersion",
    {"n": 3, "amplitude": 0.5, "support": 5.0},
    "flat outside the support: mass 0 and no extrapolation error",
    "trivial",
)
def _bump_graph(params: dict[str, Any]) -> ImmersionModel:
    """Graph of u = A exp(-1 / (1 - rho^2/R^2)) inside rho < R, 0 outside."""
    n = _dimension(params, range(3, 9))
    amplitude = _number(params, "amplitude")
    support = _positive(params, "support")

    def immersion(xs: list) -> list[Any]:
        s = sum(x * x for x in xs) / (support * support)
        if value_of(s) >= 1.0 - 1e-9:
            return [*xs, 0.0]
        return [*xs, amplitude * math.e * exp(-1.0 / (1.0 - s))]

    return ImmersionModel(
        intrinsic_dim=n,
        ambient_dim=n + 1,
        map=immersion,
        decay_order=float(n - 2),
        name="bump-graph",
    )


def codim2_exponent(n: int, q: int) -> float:
    """Slope exponent a with |du_1| ~ rho^a, tuned so that tau = (n-2q)/q."""
    return -(n - 2 * q) / (2 * q)


@register(
    "codim2-graph",
    "immersion",
    {"n": 5, "q": 2, "c1": 1.0, "c2": 0.5},
    "finite GBC mass of order q; flux and bulk agree; values are "
    "regression baselines",
    "regression",
)
def _codim2_graph(params: dict[str, Any]) -> ImmersionModel:
    """
    psi(x) = (x, u_1(x), u_2(x)) in R^(n+2).

    u_1 is radial with |du_1| = c_1 rho (1 + rho^2)^((a-1)/2), so that the
    induced metric decays at the order (n-2q)/q where the q-th mass is
    finite and nonzero; u_2 = c_2 x_1 / (1 + rho^2) breaks the symmetry.
    """
    n = _dimension(params, range(3, 9))
    q = params["q"]
    if not isinstance(q, int) or q < 1 or 2 * q >= n:
        raise SpecError(f"Order q={q!r} needs 1 <= q and 2q < n={n}")
    c1 = _number(params, "c1")
    c2 = _number(params, "c2")
    a = codim2_exponent(n, q)

    def immersion(xs: list) -> list[Any]:
        s = 1.0 + sum(x * x for x in xs)
        if a == -1.0:
            u1 = 0.5 * c1 * log(s)
        else:
            u1 = c1 / (a + 1.0) * s ** ((a + 1.0) / 2.0)
        u2 = c2 * xs[0] / s
        return [*xs, u1, u2]

    return ImmersionModel(
        intrinsic_dim=n,
        ambient_dim=n + 2,
        map=immersion,
        decay_order=-2.0 * a,
        name=f"codim2-graph-q{q}",
    )


@register(
    "cone-graph",
    "immersion",
    {"n": 3, "slope": 0.1, "claimed_tau": 1.0},
    "non-decaying slope: fails both immersion decay conditions",
    "negative-control",
)
def _cone_graph(params: dict[str, Any]) -> ImmersionModel:
    n = _dimension(params, range(3, 9))
    slope = _positive(params, "slope")

    def immersion(xs: list) -> list[Any]:
        return [*xs, slope * sqrt(1.0 + sum(x * x for x in xs))]

    return ImmersionModel(
        intrinsic_dim=n,
        ambient_dim=n + 1,
        map=immersion,
        decay_order=_positive(params, "claimed_tau"),
        name="cone-graph",
    )


@register(
    "sphere-cap",
    "immersion",
    {"n": 3, "radius": 1.0, "rho_max": 0.8},
    "all principal curvatures 1/radius: S_(p) = binom(n, p) radius^-p",
    "derived: graph of the upper hemisphere",
)
def _sphere_cap(params: dict[str, Any]) -> ImmersionModel:
    n = _dimension(params, range(3, 9))
    r = _positive(params, "radius")
    rho_max = _positive(params, "rho_max")
    if rho_max >= r:
        raise SpecError(f"rho_max={rho_max} must stay below radius={r}")

    def immersion(xs: list) -> list[Any]:
        return [*xs, sqrt(r * r - sum(x * x for x in xs))]

    return ImmersionModel(
        intrinsic_dim=n,
        ambient_dim=n + 1,
        map=immersion,
        rho_max=rho_max,
        decay_order=0.0,
        name="sphere-cap",
    )


# -- decay of immersions -------------------------------------------------------


def ae_immersion_check(
    model: ImmersionModel,
    tau: float | None,
    radii: list[float] | tuple[float, ...],
    slope_tolerance: float = 0.1,
    directions: NDArray | None = None,
) -> IdentityReport:
    """
    Check both decay conditions of an asymptotically Euclidean immersion.

    Condition (i) is ``ae_decay_check`` on the induced metric. Condition
    (ii) asks rho^(tau-1) |d_i(|psi|^2 - rho^2)| to stay bounded along the
    ladder, maximized over sample directions.

    Args:
        model: The immersion
        tau: Decay order; defaults to the model's claim
        radii: Increasing ladder inside the chart
        slope_tolerance: Largest admissible log-log growth rate
        directions: Unit vectors to sample

    Returns:
        An IdentityReport named "ae_immersion"
    """
    validate_ladder(radii)
    tau = model.decay_order if tau is None else tau
    dirs = sample_directions(model.dim) if directions is None else directions

    intrinsic = ae_decay_check(
        model.induced_metric_model(), radii, tau, slope_tolerance, dirs
    )

    indicator = []
    for rho in radii:
        worst = 0.0
        for direction in dirs:
            x = rho * np.asarray(direction, dtype=float)
            sample = model.evaluate(x, order=2)
            gradient = 2.0 * sample.jacobian.T @ sample.value - 2.0 * x
            worst = max(worst, float(np.max(np.abs(gradient))))
        indicator.append(rho ** (tau - 1.0) * worst)
    position_ok, position_slope = bounded_trend(radii, indicator, slope_tolerance)

    passed = intrinsic.passed and position_ok
    notes = list(intrinsic.notes)
    if not position_ok:
        notes.append("position condition d(|psi|^2 - rho^2) = O(rho^(1-tau)) fails")
        logger.warning("Immersion %s fails the position condition", model.name)
    return IdentityReport(
        name="ae_immersion",
        residuals=[*intrinsic.residuals, position_slope],
        tolerance=slope_tolerance,
        passed=passed,
        notes=notes,
        details={
            "model": model.name,
            "tau": tau,
            "radii": list(radii),
            "metric_condition": intrinsic.to_dict(),
            "metric_condition_passed": intrinsic.passed,
            "position": indicator,
            "position_passed": position_ok,
            "position_slope": position_slope,
        },
    )
