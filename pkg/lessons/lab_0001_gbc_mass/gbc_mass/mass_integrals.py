"""
Mass flux integrals, bulk integrals and the rho -> infinity limit.

Three flux formulas for the mass of an asymptotically Euclidean end:

    coordinate ADM:  (1 / (2 (n-1) w)) int (g_ij,i - g_ii,j) nu^j dS
    coordinate GBC:  c(n, q) int P_(q)^{ijkl} g_jk,l nu_i dS
    Lovelock flux:   -b(n, q) int G_(q)(Y, nu_g) dS^g

with w = omega_{n-1}. For immersions the bulk side of the integral
identity is A(n, q) [(n-2q) int S_(2q) dM + (2q+1) int <S_(2q+1), Z> dM].
All node evaluations are independent; sums are compensated so results do
not depend on the thread count.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import curve_fit

from core.helpers import loglog_slope, relative_residual, validate_ladder

from . import events
from .dual import Jet, variables
from .errors import ContractViolation, DomainError, IntegrabilityError
from .events import EventBus
from .extrinsic_geometry import (
    ImmersionModel,
    extrinsic_at,
    mean_curvatures,
    tangential_position,
)
from .intrinsic_geometry import MetricModel, curvature_at
from .parallel import map_points, weighted_sum
from .quadrature import RadialQuadrature, SphereQuadrature, sphere_area
from .reports import IdentityReport
from .tensor_core import DenseTensor, p_tensor

logger = logging.getLogger(__name__)

Method = Literal["coordinate-adm", "coordinate-gbc", "lovelock-flux", "bulk-identity"]
METHODS: tuple[str, ...] = (
    "coordinate-adm",
    "coordinate-gbc",
    "lovelock-flux",
    "bulk-identity",
)
ConstantVariant = Literal["proof", "printed"]
VectorField = Callable[[NDArray, NDArray], NDArray]
ScalarField = Callable[[list], Any]

# -- constants ---------------------------------------------------------------


def omega(dim: int) -> float:
    """omega_{n-1}: surface measure of the unit sphere in R^dim."""
    return sphere_area(dim)


def tau_q(n: int, q: int) -> float:
    """Threshold decay order (n - 2q) / (q + 1) for the q-th GBC mass."""
    return (n - 2 * q) / (q + 1)


def adm_threshold(n: int) -> float:
    """Threshold decay order (n - 2) / 2 for the ADM mass."""
    return (n - 2) / 2


def _check_nq(n: int, q: int) -> None:
    if q < 1 or 2 * q >= n:
        raise DomainError(f"Mass order q={q} requires 1 <= q and 2q < n={n}")


def gbc_constant(n: int, q: int) -> float:
    """c(n, q) = (n - 2q)! / (2^(q-1) (n-1)! omega_{n-1})."""
    _check_nq(n, q)
    return math.factorial(n - 2 * q) / (
        2 ** (q - 1) * math.factorial(n - 1) * omega(n)
    )


def lovelock_constant(n: int, q: int) -> float:
    """b(n, q) = (n - 2q - 1)! / (2^(q-1) (n-1)! omega_{n-1})."""
    _check_nq(n, q)
    return math.factorial(n - 2 * q - 1) / (
        2 ** (q - 1) * math.factorial(n - 1) * omega(n)
    )


def proof_constant(n: int, q: int) -> float:
    """A(n, q) = b(n, q) (2q)! / 2, the bulk constant of the identity."""
    return lovelock_constant(n, q) * math.factorial(2 * q) / 2


def printed_constant(n: int, q: int) -> float:
    """(2n)! (n-2q-1)! / (2^q (n-1)! omega_{n-1}), the alternative form."""
    _check_nq(n, q)
    return (
        math.factorial(2 * n)
        * math.factorial(n - 2 * q - 1)
        / (2**q * math.factorial(n - 1) * omega(n))
    )


def identity_constant(n: int, q: int, variant: ConstantVariant) -> float:
    if variant == "proof":
        return proof_constant(n, q)
    if variant == "printed":
        return printed_constant(n, q)
    raise ContractViolation(f"Unknown constant variant {variant!r}")


def identity_eligible(model: MetricModel | ImmersionModel, q: int) -> bool:
    """Whether the model's claimed decay order exceeds tau_q."""
    return model.decay_order > tau_q(model.dim, q)


# -- value types -------------------------------------------------------------


@dataclass(frozen=True)
class FluxSeries:
    """
    Flux values along a radial ladder with their extrapolated limit.

    Args:
        radii: Strictly increasing radii
        values: Flux at each radius
        fit_exponent: Exponent s of the correction c_1 rho^-s
        extrapolated: Fitted limit c_0
        error_estimate: max(fit residual, |last - c_0| / 2)
        coefficients: All fitted coefficients, c_0 first
        low_confidence: Set for non-monotone series or s <= 0
    """

    radii: tuple[float, ...]
    values: tuple[float, ...]
    fit_exponent: float
    extrapolated: float
    error_estimate: float
    coefficients: tuple[float, ...] = ()
    low_confidence: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "radii": list(self.radii),
            "fluxes": list(self.values),
            "fit_exponent": self.fit_exponent,
            "extrapolated": self.extrapolated,
            "error": self.error_estimate,
            "coefficients": list(self.coefficients),
            "low_confidence": self.low_confidence,
        }


@dataclass
class MassEstimate:
    """
    A mass value from one method, with per-end breakdown.

    Args:
        q: Mass order (1 for ADM)
        method: One of METHODS
        value: Total mass over all ends
        error_estimate: Combined error bar
        per_end: Mass of each end
        series: Flux ladder for flux methods
        details: Method-specific numbers for reports
    """

    q: int
    method: str
    value: float
    error_estimate: float
    per_end: list[float] = field(default_factory=list)
    series: FluxSeries | None = None
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractViolation(f"Unknown mass method {self.method!r}")
        if not self.per_end:
            self.per_end = [self.value]

    @classmethod
    def fold_ends(cls, estimates: Sequence["MassEstimate"]) -> "MassEstimate":
        """Sum the masses of separately integrated ends."""
        assert estimates, "Need at least one end"
        first = estimates[0]
        assert all(
            e.q == first.q and e.method == first.method for e in estimates
        ), "Ends must share order and method"
        return cls(
            q=first.q,
            method=first.method,
            value=math.fsum(e.value for e in estimates),
            error_estimate=math.fsum(e.error_estimate for e in estimates),
            per_end=[e.value for e in estimates],
            details={"ends": len(estimates)},
        )

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "q": self.q,
            "method": self.method,
            "extrapolated": self.value,
            "error": self.error_estimate,
            "per_end": list(self.per_end),
            "details": self.details,
        }
        if self.series is not None:
            payload.update(
                radii=list(self.series.radii),
                fluxes=list(self.series.values),
                fit_exponent=self.series.fit_exponent,
                low_confidence=self.series.low_confidence,
            )
        return payload


# -- vector fields -----------------------------------------------------------


def position_field(x: NDArray, g_inv: NDArray) -> NDArray:
    """The coordinate position field X = x^i d_i."""
    return x


def perturbed_position_field(
    epsilon: float, tau: float, direction: NDArray
) -> VectorField:
    """
    X + epsilon rho^-tau (x . e) e, a perturbation of size O(rho^(1-tau)).
    """
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)

    def perturbed(x: NDArray, g_inv: NDArray) -> NDArray:
        rho = float(np.linalg.norm(x))
        return x + epsilon * rho ** (-tau) * float(x @ e) * e

    return perturbed


def gradient_field(f: ScalarField) -> VectorField:
    """The metric gradient g^ij d_j f of a scalar written on jets."""

    def gradient(x: NDArray, g_inv: NDArray) -> NDArray:
        value = f(variables(x, order=2))
        grad = value.grad if isinstance(value, Jet) else np.zeros(len(x))
        return g_inv @ grad

    return gradient


def half_radius_squared(xs: list) -> Any:
    """f = rho^2 / 2 on coordinate jets."""
    return 0.5 * sum(x * x for x in xs)


def immersion_position_field(model: ImmersionModel) -> VectorField:
    """Y = grad(|psi|^2 / 2) for the induced metric of an immersion."""

    def tangential(x: NDArray, g_inv: NDArray) -> NDArray:
        return tangential_position(model, x)

    return tangential


# -- flux integrals ----------------------------------------------------------


def _sphere(
    model: MetricModel, rho: float, quad: SphereQuadrature
) -> SphereQuadrature:
    if quad.dim != model.dim:
        raise ContractViolation(
            f"Quadrature dimension {quad.dim} does not match model {model.dim}"
        )
    if not (rho > 0 and model.in_domain(np.eye(model.dim)[0] * rho)):
        raise DomainError(
            f"Sphere rho={rho} outside the chart of {model.name!r}"
        )
    return quad.at_radius(rho)


def adm_flux(
    model: MetricModel,
    rho: float,
    quad: SphereQuadrature,
    threads: int = 1,
) -> float:
    """
    The ADM flux through the coordinate sphere of radius rho.

    Args:
        model: Metric model
        rho: Sphere radius inside the chart
        quad: Sphere rule (its radius is replaced by rho)
        threads: Worker count for node evaluation

    Returns:
        (1 / (2 (n-1) w)) int (g_ij,i - g_ii,j) nu^j dS

    Raises:
        DomainError: If the sphere leaves the chart
    """
    sphere = _sphere(model, rho, quad)
    n = model.dim

    def integrand(nu: NDArray) -> float:
        dg = model.evaluate(rho * nu).first
        divergence = np.einsum("iji->j", dg)
        trace_gradient = np.einsum("iij->j", dg)
        return float((divergence - trace_gradient) @ nu)

    values = map_points(integrand, sphere.nodes, threads)
    total = weighted_sum(sphere.scaled_weights, values)
    return total / (2 * (n - 1) * omega(n))


def gbc_flux_coordinate(
    model: MetricModel,
    q: int,
    rho: float,
    quad: SphereQuadrature,
    threads: int = 1,
) -> float:
    """
    The q-th GBC flux c(n, q) int P_(q)^{ijkl} g_jk,l nu_i dS.

    For q = 1, P_(1) needs only the inverse metric; the integrand is the
    ADM integrand with indices raised by g, so both share their limit.

    Raises:
        DomainError: If 2q >= n or the sphere leaves the chart
    """
    n = model.dim
    constant = gbc_constant(n, q)
    sphere = _sphere(model, rho, quad)
    flat_riemann = DenseTensor.zeros(n, 4, signature="dduu")

    def integrand(nu: NDArray) -> float:
        x = rho * nu
        if q == 1:
            sample = model.evaluate(x)
            g_inv = np.linalg.inv(sample.metric)
            g_inv = 0.5 * (g_inv + g_inv.T)
            p = p_tensor(
                flat_riemann, DenseTensor(n, 2, g_inv, "symmetric-2", "uu"), 1
            )
            dg = sample.first
        else:
            cp = curvature_at(model, x, q)
            p = p_tensor(cp.riemann_mixed, cp.metric_inverse, q)
            dg = cp.metric_first
        return float(np.einsum("ijkl,jkl,i->", p.components, dg, nu))

    values = map_points(integrand, sphere.nodes, threads)
    return constant * weighted_sum(sphere.scaled_weights, values)


def gbc_flux_lovelock(
    model: MetricModel,
    q: int,
    rho: float,
    quad: SphereQuadrature,
    vector_field: VectorField = position_field,
    threads: int = 1,
) -> float:
    """
    The Lovelock flux -b(n, q) int G_(q)(Y, nu_g) dS^g.

    With the coordinate normal nu, G(Y, nu_g) dS^g equals
    G_ij Y^i g^jm nu_m sqrt(det g) dS.

    Args:
        model: Metric model
        q: Mass order
        rho: Sphere radius
        quad: Sphere rule
        vector_field: Callable (x, g_inv) -> Y^i
        threads: Worker count

    Raises:
        DomainError: If 2q >= n or the sphere leaves the chart
    """
    n = model.dim
    constant = lovelock_constant(n, q)
    sphere = _sphere(model, rho, quad)

    def integrand(nu: NDArray) -> float:
        x = rho * nu
        cp = curvature_at(model, x, q)
        g_inv = cp.metric_inverse.components
        y = np.asarray(vector_field(x, g_inv), dtype=float)
        volume = math.sqrt(float(np.linalg.det(cp.metric.components)))
        return float(y @ cp.lovelock.components @ g_inv @ nu) * volume

    values = map_points(integrand, sphere.nodes, threads)
    return -constant * weighted_sum(sphere.scaled_weights, values)


def gradient_field_flux(
    model: MetricModel,
    q: int,
    rho: float,
    quad: SphereQuadrature,
    f: ScalarField = half_radius_squared,
    threads: int = 1,
) -> float:
    """The Lovelock flux with Y = grad f, f written on coordinate jets."""
    return gbc_flux_lovelock(model, q, rho, quad, gradient_field(f), threads)


# -- extrapolation -----------------------------------------------------------


def _initial_exponent(radii: NDArray, values: NDArray) -> float:
    """Exponent from the decay of successive differences."""
    diffs = np.diff(values)
    if np.any(diffs == 0.0):
        return 1.0
    return -loglog_slope(radii[:-1], diffs)


def _sign_changes(diffs: NDArray, floor: float) -> bool:
    significant = diffs[np.abs(diffs) > floor]
    return bool(significant.size > 1 and np.any(np.diff(np.sign(significant))))


def extrapolate(
    radii: Sequence[float],
    values: Sequence[float],
    fit_exponent_hint: float | None = None,
    correction_terms: int = 1,
) -> FluxSeries:
    """
    Fit value(rho) = c_0 + sum_k c_k rho^(-k s) and return the limit c_0.

    With no hint, s comes from the decay of successive differences and,
    for a single correction term, is refined by a nonlinear fit.

    Args:
        radii: At least 3 strictly increasing radii
        values: Flux at each radius
        fit_exponent_hint: Fixed exponent s, or None to fit it
        correction_terms: Number of correction powers (1 by default)

    Returns:
        A FluxSeries; low_confidence is set (and a warning logged) for
        non-monotone series or a non-positive exponent

    Raises:
        ContractViolation: For fewer than 3 radii or too many terms

    Examples:
        >>> r = [10.0, 20.0, 40.0, 80.0]
        >>> s = extrapolate(r, [3 + 5 / x**2 for x in r])
        >>> round(s.extrapolated, 10)
        3.0
    """
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape or r.size < 3:
        raise ContractViolation("Extrapolation needs >= 3 radii with values")
    validate_ladder(list(r))
    if correction_terms < 1 or correction_terms + 1 > r.size:
        raise ContractViolation(
            f"{correction_terms} correction terms need more than "
            f"{correction_terms} radii"
        )

    diffs = np.diff(v)
    floor = 1e-14 * max(1.0, float(np.max(np.abs(v))))
    if np.all(np.abs(diffs) <= floor):
        hint = math.nan if fit_exponent_hint is None else fit_exponent_hint
        return FluxSeries(
            tuple(r), tuple(v), hint, float(v[-1]), 0.0, (float(v[-1]),)
        )

    s = (
        _initial_exponent(r, v)
        if fit_exponent_hint is None
        else float(fit_exponent_hint)
    )
    low_confidence = _sign_changes(diffs, floor) or not s > 0
    if not s > 0:
        s = 1.0

    def design(exponent: float) -> NDArray:
        return np.stack(
            [r ** (-k * exponent) for k in range(correction_terms + 1)], axis=1
        )

    coeffs, *_ = np.linalg.lstsq(design(s), v, rcond=None)

    if fit_exponent_hint is None and correction_terms == 1 and r.size > 3:
        try:
            popt, _ = curve_fit(
                lambda x, c0, c1, e: c0 + c1 * x ** (-e),
                r,
                v,
                p0=(coeffs[0], coeffs[1], s),
                maxfev=2000,
            )
            if popt[2] > 0:
                s = float(popt[2])
                coeffs = np.asarray(popt[:2])
        except (RuntimeError, ValueError) as exc:
            logger.debug("Nonlinear exponent refinement failed: %s", exc)

    fitted = design(s) @ coeffs
    residual = float(np.max(np.abs(fitted - v)))
    c0 = float(coeffs[0])
    error = max(residual, 0.5 * abs(float(v[-1]) - c0))
    if low_confidence:
        logger.warning(
            "Low-confidence extrapolation: values %s, exponent %.3g",
            np.array2string(v, precision=6),
            s,
        )
    return FluxSeries(
        radii=tuple(float(x) for x in r),
        values=tuple(float(x) for x in v),
        fit_exponent=s,
        extrapolated=c0,
        error_estimate=error,
        coefficients=tuple(float(c) for c in coeffs),
        low_confidence=low_confidence,
    )


def flux_ladder(
    flux: Callable[[float], float],
    radii: Sequence[float],
    bus: EventBus | None = None,
    label: str = "flux",
) -> list[float]:
    """Evaluate a flux at each radius, publishing one event per radius."""
    validate_ladder(radii)
    values = []
    for rho in radii:
        value = flux(rho)
        logger.info("%s at rho=%g: %.12g", label, rho, value)
        events.publish(
            bus, events.FLUX_RADIUS, method=label, rho=rho, flux=value
        )
        values.append(value)
    return values


# -- bulk integrals ----------------------------------------------------------


@dataclass(frozen=True)
class BulkIntegral:
    """
    Truncated bulk integrals of the identity and their tail.

    Args:
        value_s2q: int S_(2q) dM over rho <= r_max
        value_pairing: int <S_(2q+1), Z> dM over rho <= r_max
        tail_estimate: Fitted integral of the combined integrand
            (n-2q) S_(2q) + (2q+1) <S_(2q+1), Z> beyond r_max
        decay_exponent: Fitted beta of the combined radial profile
            ~ rho^-beta (inf when the tail vanishes)
        min_s2q: Smallest sampled S_(2q)
        radii: Radial nodes
        profile: Combined radial profile at the radial nodes
        r_max: Truncation radius
    """

    value_s2q: float
    value_pairing: float
    tail_estimate: float
    decay_exponent: float
    min_s2q: float
    radii: tuple[float, ...]
    profile: tuple[float, ...]
    r_max: float

    def combined(self, n: int, q: int) -> float:
        """(n-2q) int S_(2q) + (2q+1) int <S_(2q+1), Z> up to r_max."""
        return (n - 2 * q) * self.value_s2q + (2 * q + 1) * self.value_pairing


def fit_radial_tail(
    radii: NDArray,
    profile: NDArray,
    r_max: float,
    scale: float,
    negligible: float = 1e-12,
) -> tuple[float, float]:
    """
    Fit |F(rho)| ~ C rho^-beta and integrate the fit beyond r_max.

    Args:
        radii: Radii of the fitting window
        profile: Radial profile values there
        r_max: Truncation radius
        scale: Magnitude of the whole profile, for the negligibility test
        negligible: Relative level below which the tail is taken as zero

    Returns:
        (signed tail estimate, beta)

    Raises:
        IntegrabilityError: If beta <= 1
    """
    window = np.abs(profile)
    if np.all(window <= negligible * max(scale, 1e-300)):
        return 0.0, math.inf
    mask = window > negligible * max(scale, 1e-300)
    if mask.sum() < 2:
        return 0.0, math.inf
    if np.any(np.diff(np.sign(profile[mask]))):
        logger.warning("Radial profile changes sign in the tail window")
    slope, intercept = np.polyfit(np.log(radii[mask]), np.log(window[mask]), 1)
    beta = -float(slope)
    if beta <= 1.0:
        raise IntegrabilityError(
            f"Radial profile decays like rho^-{beta:.3f}; the bulk "
            "integrand is not integrable"
        )
    c = math.exp(float(intercept))
    sign = float(np.sign(profile[mask][-1]))
    return sign * c * r_max ** (1.0 - beta) / (beta - 1.0), beta


def bulk_identity_integral(
    model: ImmersionModel,
    q: int,
    r_max: float,
    radial_quad: RadialQuadrature,
    sphere_quad: SphereQuadrature,
    threads: int = 1,
    tail_shells: int = 2,
    bus: EventBus | None = None,
) -> BulkIntegral:
    """
    Integrate S_(2q) and <S_(2q+1), Z> over rho_min <= rho <= r_max.

    dM is the induced Riemannian measure sqrt(det g) dx. The tail of the
    combined integrand beyond r_max is estimated from its radial profile
    on the outer ``tail_shells`` shells.

    Args:
        model: The immersion
        q: Order with 2q < n
        r_max: Outer radius
        radial_quad: Rule on [rho_min, r_max]
        sphere_quad: Unit-sphere rule
        threads: Worker count
        tail_shells: Shells used for the tail fit
        bus: Optional event bus

    Raises:
        IntegrabilityError: If the combined profile decays like rho^-1 or
            slower
    """
    n = model.intrinsic_dim
    if 2 * q >= n:
        raise DomainError(f"Order q={q} requires 2q < n={n}")
    if sphere_quad.dim != n:
        raise ContractViolation("Sphere rule dimension does not match model")
    if not math.isclose(float(radial_quad.edges[-1]), r_max):
        raise ContractViolation("Radial rule must end at r_max")

    def integrands(rho: float) -> tuple[float, float, float]:
        s_vals, p_vals = [], []
        smallest = math.inf
        for nu in sphere_quad.nodes:
            ep = extrinsic_at(model, rho * nu)
            volume = math.sqrt(float(np.linalg.det(ep.induced_metric.components)))
            s_even = mean_curvatures(ep, 2 * q).value_even
            s_odd = mean_curvatures(ep, 2 * q + 1).value_odd
            assert s_even is not None and s_odd is not None
            smallest = min(smallest, s_even)
            s_vals.append(s_even * volume)
            p_vals.append(float(s_odd @ ep.position) * volume)
        area = rho ** (n - 1)
        return (
            area * weighted_sum(sphere_quad.weights, s_vals),
            area * weighted_sum(sphere_quad.weights, p_vals),
            smallest,
        )

    rows = map_points(integrands, list(radial_quad.nodes), threads)
    s_profile = np.array([row[0] for row in rows])
    p_profile = np.array([row[1] for row in rows])
    min_s2q = min(row[2] for row in rows)
    combined = (n - 2 * q) * s_profile + (2 * q + 1) * p_profile

    for a, b in zip(radial_quad.edges, radial_quad.edges[1:], strict=False):
        mask = (radial_quad.nodes >= a) & (radial_quad.nodes <= b)
        events.publish(
            bus,
            events.BULK_SHELL,
            inner=float(a),
            outer=float(b),
            value=math.fsum((radial_quad.weights[mask] * combined[mask]).tolist()),
        )

    start = radial_quad.edges[max(0, len(radial_quad.edges) - 1 - tail_shells)]
    window = radial_quad.nodes >= start
    scale = float(np.max(np.abs(np.concatenate([s_profile, p_profile])))) if rows else 0.0
    tail, beta = fit_radial_tail(
        radial_quad.nodes[window], combined[window], r_max, scale
    )
    result = BulkIntegral(
        value_s2q=radial_quad.integrate(s_profile),
        value_pairing=radial_quad.integrate(p_profile),
        tail_estimate=tail,
        decay_exponent=beta,
        min_s2q=float(min_s2q),
        radii=tuple(float(x) for x in radial_quad.nodes),
        profile=tuple(float(x) for x in combined),
        r_max=r_max,
    )
    logger.info(
        "Bulk integrals of %s up to %g: S=%.10g, pairing=%.10g, tail=%.3g",
        model.name,
        r_max,
        result.value_s2q,
        result.value_pairing,
        tail,
    )
    return result


# -- drivers -----------------------------------------------------------------


@dataclass(frozen=True)
class IdentityConfig:
    """
    Resolution and tolerance settings for global identity checks.

    Args:
        radii: Flux ladder
        nodes_per_angle: Sphere rule resolution
        radial_shells: Geometric shells of the bulk rule
        radial_nodes: Gauss nodes per shell
        r_max: Bulk truncation radius; defaults to the last ladder radius
        rtol: Relative tolerance
        atol: Absolute tolerance
        constant_variant: "proof" or "printed" bulk constant
        threads: Worker count
        fit_exponent_hint: Extrapolation exponent; None uses tau
        correction_terms: Correction powers in the extrapolation
        tail_uncertainty: Fraction of the fitted tail added to the error
    """

    radii: tuple[float, ...] = (25.0, 50.0, 100.0, 200.0)
    nodes_per_angle: int = 8
    radial_shells: int = 10
    radial_nodes: int = 8
    r_max: float | None = None
    rtol: float = 0.02
    atol: float = 1e-6
    constant_variant: ConstantVariant = "proof"
    threads: int = 1
    fit_exponent_hint: float | None = None
    correction_terms: int = 2
    tail_uncertainty: float = 0.25

    def __post_init__(self):
        validate_ladder(list(self.radii))
        assert self.rtol > 0 and self.atol > 0, "Tolerances must be positive"
        assert self.nodes_per_angle >= 1, "Need at least one node per angle"
        assert self.radial_shells >= 1 and self.radial_nodes >= 1, (
            "Radial rule needs shells and nodes"
        )
        assert self.constant_variant in ("proof", "printed"), (
            "Constant variant must be proof or printed"
        )

    @property
    def outer_radius(self) -> float:
        return self.r_max if self.r_max is not None else self.radii[-1]


def _metric_of(model: MetricModel | ImmersionModel) -> MetricModel:
    if isinstance(model, ImmersionModel):
        return model.induced_metric_model()
    return model


def _hint(model: MetricModel | ImmersionModel, hint: float | None) -> float:
    return model.decay_order if hint is None else hint


def bulk_mass(
    model: ImmersionModel,
    q: int,
    config: IdentityConfig,
    bus: EventBus | None = None,
) -> tuple[BulkIntegral, float, float]:
    """
    Bulk-side mass A(n, q) times the combined bulk integral plus tail.

    Returns:
        (bulk integrals, mass value, error bar from the tail)
    """
    n = model.intrinsic_dim
    radial = RadialQuadrature.geometric(
        model.rho_min, config.outer_radius, config.radial_shells, config.radial_nodes
    )
    sphere = SphereQuadrature.gauss_product(n, config.nodes_per_angle)
    bulk = bulk_identity_integral(
        model, q, config.outer_radius, radial, sphere, config.threads, bus=bus
    )
    constant = identity_constant(n, q, config.constant_variant)
    value = constant * (bulk.combined(n, q) + bulk.tail_estimate)
    error = abs(constant) * config.tail_uncertainty * abs(bulk.tail_estimate)
    return bulk, value, error


def estimate_mass(
    model: MetricModel | ImmersionModel,
    q: int,
    method: str,
    config: IdentityConfig,
    vector_field: Literal["position", "gradient"] = "position",
    bus: EventBus | None = None,
) -> MassEstimate:
    """
    Compute one mass estimate of a model by the chosen method.

    Flux methods on immersions use the induced metric; the gradient field
    there is grad(|psi|^2 / 2), on metric models grad(rho^2 / 2).

    Args:
        model: Metric or immersion model
        q: Mass order (coordinate-adm ignores it)
        method: One of METHODS
        config: Ladder and resolution settings
        vector_field: Field for lovelock-flux
        bus: Optional event bus

    Raises:
        ContractViolation: For an unknown method or bulk-identity on a
            metric model
    """
    if method not in METHODS:
        raise ContractViolation(f"Unknown mass method {method!r}")
    metric = _metric_of(model)
    n = metric.dim

    if method == "bulk-identity":
        if not isinstance(model, ImmersionModel):
            raise ContractViolation("bulk-identity needs an immersion model")
        bulk, value, error = bulk_mass(model, q, config, bus)
        return MassEstimate(
            q=q,
            method=method,
            value=value,
            error_estimate=error,
            details={
                "value_s2q": bulk.value_s2q,
                "value_pairing": bulk.value_pairing,
                "tail_estimate": bulk.tail_estimate,
                "decay_exponent": bulk.decay_exponent,
                "r_max": bulk.r_max,
                "constant_variant": config.constant_variant,
            },
        )

    quad = SphereQuadrature.gauss_product(n, config.nodes_per_angle)
    threads = config.threads
    if method == "coordinate-adm":

        def flux(rho: float) -> float:
            return adm_flux(metric, rho, quad, threads)

    elif method == "coordinate-gbc":

        def flux(rho: float) -> float:
            return gbc_flux_coordinate(metric, q, rho, quad, threads)

    elif vector_field == "gradient" and not isinstance(model, ImmersionModel):

        def flux(rho: float) -> float:
            return gradient_field_flux(metric, q, rho, quad, threads=threads)

    else:
        chosen = (
            immersion_position_field(model)
            if isinstance(model, ImmersionModel) and vector_field == "gradient"
            else position_field
        )

        def flux(rho: float) -> float:
            return gbc_flux_lovelock(metric, q, rho, quad, chosen, threads)

    values = flux_ladder(flux, config.radii, bus, label=method)
    series = extrapolate(
        config.radii,
        values,
        _hint(model, config.fit_exponent_hint),
        config.correction_terms,
    )
    events.publish(
        bus,
        events.FLUX_EXTRAPOLATED,
        method=method,
        extrapolated=series.extrapolated,
        error=series.error_estimate,
    )
    return MassEstimate(
        q=1 if method == "coordinate-adm" else q,
        method=method,
        value=series.extrapolated,
        error_estimate=series.error_estimate,
        series=series,
        details={"field": vector_field} if method == "lovelock-flux" else {},
    )


def verify_main_identity(
    model: ImmersionModel,
    q: int,
    config: IdentityConfig,
    bus: EventBus | None = None,
) -> IdentityReport:
    """
    Compare the q-th GBC mass with the constant times the bulk integral.

    Two comparisons are made. In the limit: the extrapolated coordinate
    GBC flux against A [(n-2q) S + (2q+1) pairing + tail], within rtol
    plus the combined error bar. At matched radius: the Lovelock flux of
    grad(|psi|^2 / 2) through rho = r_max against A times the bulk
    integral up to r_max, which agree by the divergence theorem. Both
    bulk constants are reported; the configured one decides the verdict.

    Raises:
        DomainError: If the model's decay order does not exceed tau_q
        IntegrabilityError: If the bulk integrand is not integrable
    """
    n = model.intrinsic_dim
    if not identity_eligible(model, q):
        raise DomainError(
            f"Model {model.name!r} has tau={model.decay_order}, which does "
            f"not exceed tau_q={tau_q(n, q):.4g}"
        )
    metric = model.induced_metric_model()
    quad = SphereQuadrature.gauss_product(n, config.nodes_per_angle)

    fluxes = flux_ladder(
        lambda rho: gbc_flux_coordinate(metric, q, rho, quad, config.threads),
        config.radii,
        bus,
        label="coordinate-gbc",
    )
    series = extrapolate(
        config.radii,
        fluxes,
        _hint(model, config.fit_exponent_hint),
        config.correction_terms,
    )
    if series.low_confidence:
        logger.warning("Flux extrapolation for %s is low confidence", model.name)

    bulk, rhs, tail_error = bulk_mass(model, q, config, bus)
    proof = proof_constant(n, q)
    printed = printed_constant(n, q)
    combined = bulk.combined(n, q)

    lhs = series.extrapolated
    error_bar = series.error_estimate + tail_error
    limit_gap = abs(lhs - rhs)
    limit_tol = config.rtol * max(abs(lhs), abs(rhs)) + config.atol + error_bar

    matched_flux = gbc_flux_lovelock(
        metric,
        q,
        config.outer_radius,
        quad,
        immersion_position_field(model),
        config.threads,
    )
    constant = identity_constant(n, q, config.constant_variant)
    matched_bulk = constant * combined
    matched_gap = abs(matched_flux - matched_bulk)
    matched_tol = (
        config.rtol * max(abs(matched_flux), abs(matched_bulk)) + config.atol
    )

    passed = limit_gap <= limit_tol and matched_gap <= matched_tol
    notes = [
        f"bulk constant: {config.constant_variant}",
        f"proof constant A={proof:.12g}, printed constant a={printed:.12g}, "
        f"ratio {printed / proof:.6g}",
    ]
    if series.low_confidence:
        notes.append("flux extrapolation flagged low confidence")
    report = IdentityReport(
        name="main_identity",
        residuals=[
            relative_residual(limit_gap, max(abs(lhs), abs(rhs))),
            relative_residual(matched_gap, max(abs(matched_flux), abs(matched_bulk))),
        ],
        tolerance=config.rtol,
        passed=passed,
        notes=notes,
        details={
            "model": model.name,
            "q": q,
            "lhs": lhs,
            "rhs": rhs,
            "rhs_proof": proof * (combined + bulk.tail_estimate),
            "rhs_printed": printed * (combined + bulk.tail_estimate),
            "error_bar": error_bar,
            "flux_series": series.to_dict(),
            "value_s2q": bulk.value_s2q,
            "value_pairing": bulk.value_pairing,
            "tail_estimate": bulk.tail_estimate,
            "decay_exponent": bulk.decay_exponent,
            "matched_radius": config.outer_radius,
            "matched_flux": matched_flux,
            "matched_bulk": matched_bulk,
            "identity_eligible": True,
        },
    )
    return report


@dataclass(frozen=True)
class CorollaryResult:
    """
    Signed bulk combination with its error bar.

    ``sign`` is "positive", "negative" or "indeterminate" when the value
    lies within its error bar of zero.
    """

    value: float
    error_estimate: float
    sign: str
    min_s2q: float


def corollary_inequality(
    model: ImmersionModel,
    q: int,
    config: IdentityConfig,
    bus: EventBus | None = None,
) -> CorollaryResult:
    """
    (n-2q) int S_(2q) dM + (2q+1) int <S_(2q+1), Z> dM, tail included.

    Also reports the smallest sampled S_(2q).

    Raises:
        DomainError: If the model's decay order does not exceed tau_q
    """
    n = model.intrinsic_dim
    if not identity_eligible(model, q):
        raise DomainError(
            f"Model {model.name!r} is not eligible for order q={q}"
        )
    radial = RadialQuadrature.geometric(
        model.rho_min, config.outer_radius, config.radial_shells, config.radial_nodes
    )
    sphere = SphereQuadrature.gauss_product(n, config.nodes_per_angle)
    bulk = bulk_identity_integral(
        model, q, config.outer_radius, radial, sphere, config.threads, bus=bus
    )
    value = bulk.combined(n, q) + bulk.tail_estimate
    error = config.tail_uncertainty * abs(bulk.tail_estimate) + config.atol
    if abs(value) <= error:
        sign = "indeterminate"
    else:
        sign = "positive" if value > 0 else "negative"
    return CorollaryResult(value, error, sign, bulk.min_s2q)


def predicted_difference_slope(n: int, q: int, tau: float) -> float:
    """Log-log slope -[q(tau+2) + (tau-1) - (n-1)] of the flux change."""
    return -(q * (tau + 2) + (tau - 1) - (n - 1))


def field_robustness(
    model: MetricModel,
    q: int,
    config: IdentityConfig,
    epsilon: float = 1.0,
    direction: NDArray | None = None,
    slope_margin: float = 0.3,
) -> IdentityReport:
    """
    Perturb the flux field X by O(rho^(1-tau)) and compare the fluxes.

    Passes when the per-radius flux change decays at least as fast as the
    predicted slope (plus ``slope_margin``) and both fields extrapolate to
    the same mass within their combined error.
    """
    n = model.dim
    tau = model.decay_order
    e = np.eye(n)[0] if direction is None else np.asarray(direction)
    quad = SphereQuadrature.gauss_product(n, config.nodes_per_angle)
    perturbed_field = perturbed_position_field(epsilon, tau, e)

    base = [
        gbc_flux_lovelock(model, q, rho, quad, position_field, config.threads)
        for rho in config.radii
    ]
    perturbed = [
        gbc_flux_lovelock(model, q, rho, quad, perturbed_field, config.threads)
        for rho in config.radii
    ]
    diffs = [abs(a - b) for a, b in zip(base, perturbed, strict=True)]
    predicted = predicted_difference_slope(n, q, tau)
    floor = 1e-13 * max(1.0, max(abs(v) for v in base))
    if all(d <= floor for d in diffs):
        slope = -math.inf
    else:
        slope = loglog_slope(config.radii, [max(d, floor) for d in diffs])

    hint = _hint(model, config.fit_exponent_hint)
    base_series = extrapolate(config.radii, base, hint, config.correction_terms)
    pert_series = extrapolate(config.radii, perturbed, hint, config.correction_terms)
    gap = abs(base_series.extrapolated - pert_series.extrapolated)
    allowed = (
        base_series.error_estimate + pert_series.error_estimate + config.atol
    )
    passed = slope <= predicted + slope_margin and gap <= allowed
    return IdentityReport(
        name="field_robustness",
        residuals=[slope - predicted, gap],
        tolerance=slope_margin,
        passed=passed,
        details={
            "radii": list(config.radii),
            "base": base,
            "perturbed": perturbed,
            "differences": diffs,
            "slope": slope,
            "predicted_slope": predicted,
            "base_mass": base_series.extrapolated,
            "perturbed_mass": pert_series.extrapolated,
        },
    )
