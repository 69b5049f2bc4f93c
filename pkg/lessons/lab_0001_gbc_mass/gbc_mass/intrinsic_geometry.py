"""
Intrinsic curvature of a metric given in one exterior chart.

Pipeline: g, dg, ddg -> Christoffel symbols -> Riemann -> Ricci, scalar,
Einstein -> Lovelock tensor of order q. Metric derivatives come from
forward-mode jets (or an analytic callback); finite differences are used
only where third metric derivatives would be needed, in the divergence
checks.

Conventions:
    dg[i, j, k] = d_k g_ij and ddg[i, j, k, l] = d_k d_l g_ij.
    christoffel[k, i, j] = Gamma^k_ij.
    R_ijkl = g(R(d_i, d_j) d_l, d_k), so R_ijij > 0 on round spheres and
    Sc = g^ik g^jl R_ijkl. The mixed form is R_ab^cd = g^ce g^df R_abef.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from core.helpers import loglog_slope, validate_ladder

from .dual import Scalar, unpack, variables
from .errors import ContractViolation, DomainError, ModelError
from .reports import IdentityReport
from .tensor_core import (
    DenseTensor,
    gauss_bonnet_curvature,
    lovelock_tensor,
)

logger = logging.getLogger(__name__)

MetricComponents = Callable[[list], Sequence[Sequence[Scalar]]]
MetricDerivatives = Callable[[NDArray], tuple[NDArray, NDArray, NDArray]]
DerivativeMethod = Literal["dual", "analytic"]

DOMAIN_RTOL = 1e-12


@dataclass(frozen=True)
class MetricSample:
    """Metric components and their first and second partials at a point."""

    point: NDArray
    metric: NDArray
    first: NDArray
    second: NDArray


@dataclass(frozen=True)
class MetricModel:
    """
    A Riemannian metric on the chart region rho_min <= |x| <= rho_max.

    Args:
        dim: Dimension n >= 3
        components: Callable mapping a list of coordinate jets to the
            n x n nested components g_ij written in plain arithmetic
        rho_min: Inner radius of the chart region
        rho_max: Outer radius (inf for an end)
        decay_order: Claimed decay order tau
        name: Model name for reports
        analytic: Optional callable returning (g, dg, ddg) directly
        prefer_analytic: Use ``analytic`` by default when available
    """

    dim: int
    components: MetricComponents | None
    rho_min: float = 0.0
    rho_max: float = math.inf
    decay_order: float = 1.0
    name: str = "metric"
    analytic: MetricDerivatives | None = None
    prefer_analytic: bool = False

    def __post_init__(self):
        if self.dim < 3:
            raise ContractViolation(f"Metric dimension must be >= 3, got {self.dim}")
        if self.components is None and self.analytic is None:
            raise ContractViolation(
                "A metric model needs components or an analytic evaluator"
            )
        assert self.rho_max > self.rho_min >= 0, "Chart radii must be ordered"

    def in_domain(self, point: NDArray, margin: float = 0.0) -> bool:
        """Whether ``point`` lies in the chart region, shrunk by ``margin``."""
        rho = float(np.linalg.norm(point))
        low = self.rho_min + margin
        high = self.rho_max - margin
        slack = DOMAIN_RTOL * max(1.0, rho)
        return low - slack <= rho <= high + slack

    def evaluate(
        self, point: Sequence[float] | NDArray, method: DerivativeMethod | None = None
    ) -> MetricSample:
        """
        Evaluate g and its first two partial derivatives.

        Args:
            point: Chart coordinates
            method: "dual" or "analytic"; defaults to the model preference

        Returns:
            A MetricSample

        Raises:
            DomainError: If the point is outside the chart region
            ModelError: If g is not positive definite at the point
        """
        x = np.asarray(point, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(
                f"Point must have shape ({self.dim},), got {x.shape}"
            )
        if not self.in_domain(x):
            raise DomainError(
                f"Point at rho={np.linalg.norm(x):.6g} outside chart "
                f"[{self.rho_min}, {self.rho_max}] of model {self.name!r}"
            )
        if method is None:
            method = (
                "analytic"
                if self.analytic is not None
                and (self.prefer_analytic or self.components is None)
                else "dual"
            )
        if method == "analytic":
            if self.analytic is None:
                raise ContractViolation(
                    f"Model {self.name!r} has no analytic derivatives"
                )
            g, dg, ddg = (np.asarray(a, dtype=float) for a in self.analytic(x))
        else:
            if self.components is None:
                raise ContractViolation(
                    f"Model {self.name!r} has no jet components"
                )
            g, dg, ddg = self._dual_derivatives(x)

        n = self.dim
        assert g.shape == (n, n), "Metric must be n x n"
        assert dg.shape == (n, n, n), "First derivatives must be n x n x n"
        assert ddg.shape == (n,) * 4, "Second derivatives must be rank 4"
        check_positive_definite(g, x, self.name)
        return MetricSample(x, g, dg, ddg)

    def _dual_derivatives(self, x: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        n = self.dim
        assert self.components is not None
        rows = self.components(variables(x, order=2))
        flat = [entry for row in rows for entry in row]
        if len(flat) != n * n:
            raise ContractViolation(
                f"Model {self.name!r} returned {len(flat)} components"
            )
        values, grads, hessians, _ = unpack(flat, n)
        return (
            values.reshape(n, n),
            grads.reshape(n, n, n),
            hessians.reshape(n, n, n, n),
        )


def check_positive_definite(g: NDArray, point: NDArray, name: str) -> None:
    """
    Raise ModelError unless g is symmetric positive definite.

    Uses a Cholesky factorization, which succeeds exactly when every
    leading principal minor is positive.
    """
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14):
        raise ModelError(f"Metric of {name!r} not symmetric at {point}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ModelError(
            f"Metric of {name!r} not positive definite at {point}"
        ) from exc


@dataclass(frozen=True)
class CurvaturePoint:
    """Every curvature quantity of a metric at one chart point."""

    point: NDArray
    q: int
    metric: DenseTensor
    metric_inverse: DenseTensor
    metric_first: NDArray
    christoffel: NDArray
    riemann_low: DenseTensor
    riemann_mixed: DenseTensor
    ricci: DenseTensor
    scalar: float
    einstein: DenseTensor
    lovelock: DenseTensor
    gauss_bonnet: float


def christoffel_symbols(g_inv: NDArray, dg: NDArray) -> NDArray:
    """Gamma^k_ij = g^kl (d_i g_jl + d_j g_il - d_l g_ij) / 2."""
    return np.einsum("kl,lij->kij", g_inv, _christoffel_first_kind(dg))


def _christoffel_first_kind(dg: NDArray) -> NDArray:
    """Gamma_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2, shape [l, i, j]."""
    # dg[a, b, c] = d_c g_ab
    d_i_gjl = np.einsum("jli->lij", dg)
    d_j_gil = np.einsum("ilj->lij", dg)
    d_l_gij = np.einsum("ijl->lij", dg)
    return 0.5 * (d_i_gjl + d_j_gil - d_l_gij)


def riemann_from_derivatives(
    g: NDArray, g_inv: NDArray, dg: NDArray, ddg: NDArray
) -> tuple[NDArray, NDArray]:
    """
    Christoffel symbols and the covariant Riemann tensor.

    Returns:
        (christoffel[k, i, j], riemann_low[i, j, k, l])
    """
    first = _christoffel_first_kind(dg)
    gamma = np.einsum("kl,lij->kij", g_inv, first)

    # d_m Gamma_lij and d_m g^kl
    d_first = 0.5 * (
        np.einsum("jlim->lijm", ddg)
        + np.einsum("iljm->lijm", ddg)
        - np.einsum("ijlm->lijm", ddg)
    )
    d_ginv = -np.einsum("ka,abm,bl->klm", g_inv, dg, g_inv)
    d_gamma = np.einsum("klm,lij->kijm", d_ginv, first) + np.einsum(
        "kl,lijm->kijm", g_inv, d_first
    )

    # R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik
    #           + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    r_op = (
        np.einsum("ljki->lkij", d_gamma)
        - np.einsum("likj->lkij", d_gamma)
        + np.einsum("lim,mjk->lkij", gamma, gamma)
        - np.einsum("ljm,mik->lkij", gamma, gamma)
    )
    riemann_low = np.einsum("km,mlij->ijkl", g, r_op)
    return gamma, riemann_low


def curvature_from_sample(
    sample: MetricSample, q: int = 1, riemann_sign: float = 1.0
) -> CurvaturePoint:
    """
    Build a CurvaturePoint from metric derivatives.

    Args:
        sample: Metric and partials at one point
        q: Lovelock order, 2q < n
        riemann_sign: Debug multiplier on R (-1 flips the convention)
    """
    g, dg, ddg = sample.metric, sample.first, sample.second
    n = g.shape[0]
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + g_inv.T)

    gamma, r_low = riemann_from_derivatives(g, g_inv, dg, ddg)
    r_low = riemann_sign * r_low
    r_mixed = np.einsum("abef,ce,df->abcd", r_low, g_inv, g_inv)
    ricci = np.einsum("ik,ijkl->jl", g_inv, r_low)
    scalar = float(np.einsum("jl,jl->", g_inv, ricci))
    einstein = ricci - 0.5 * scalar * g

    metric = DenseTensor(n, 2, g, "symmetric-2")
    mixed = DenseTensor(n, 4, r_mixed, signature="dduu")
    return CurvaturePoint(
        point=sample.point,
        q=q,
        metric=metric,
        metric_inverse=DenseTensor(n, 2, g_inv, "symmetric-2", "uu"),
        metric_first=dg,
        christoffel=gamma,
        riemann_low=DenseTensor(n, 4, r_low, "riemann-4"),
        riemann_mixed=mixed,
        ricci=DenseTensor(n, 2, ricci, "symmetric-2"),
        scalar=scalar,
        einstein=DenseTensor(n, 2, einstein, "symmetric-2"),
        lovelock=lovelock_tensor(mixed, metric, q),
        gauss_bonnet=gauss_bonnet_curvature(mixed, q),
    )


def curvature_at(
    model: MetricModel,
    point: Sequence[float] | NDArray,
    q: int = 1,
    riemann_sign: float = 1.0,
) -> CurvaturePoint:
    """
    Evaluate all curvature quantities of ``model`` at ``point``.

    Args:
        model: The metric model
        point: Chart coordinates inside the model's region
        q: Lovelock order, 1 <= q with 2q < n
        riemann_sign: Debug multiplier on R; 1.0 in normal use

    Returns:
        A CurvaturePoint with Einstein tensor equal to G_(1)

    Raises:
        DomainError: If the point is outside the chart or 2q >= n
        ModelError: If the metric is not positive definite there

    Examples:
        >>> from .models import make_model, ModelSpec
        >>> flat = make_model(ModelSpec("flat", {"n": 3}))
        >>> curvature_at(flat, [1.0, 2.0, 3.0]).scalar
        0.0
    """
    if 2 * q >= model.dim:
        raise DomainError(f"Order q={q} requires 2q < n={model.dim}")
    return curvature_from_sample(model.evaluate(point), q, riemann_sign)


def central_gradient(
    fn: Callable[[NDArray], NDArray], point: NDArray, h: float
) -> NDArray:
    """
    Second-order central differences of an array-valued field.

    Returns:
        Array of shape fn(point).shape + (n,), derivative index last
    """
    x = np.asarray(point, dtype=float)
    columns = []
    for k in range(x.shape[0]):
        step = np.zeros_like(x)
        step[k] = h
        columns.append((np.asarray(fn(x + step)) - np.asarray(fn(x - step))) / (2 * h))
    return np.stack(columns, axis=-1)


def one_form_divergence(
    form: NDArray, d_form: NDArray, g_inv: NDArray, gamma: NDArray
) -> float:
    """div W = g^jk (d_k W_j - Gamma^l_kj W_l), with d_form[j, k] = d_k W_j."""
    return float(
        np.einsum("jk,jk->", g_inv, d_form)
        - np.einsum("jk,lkj,l->", g_inv, gamma, form)
    )


def two_tensor_divergence(
    tensor: NDArray, d_tensor: NDArray, g_inv: NDArray, gamma: NDArray
) -> NDArray:
    """
    (div K)_j = g^ik (d_k K_ij - Gamma^l_ki K_lj - Gamma^l_kj K_il).

    d_tensor[i, j, k] holds d_k K_ij.
    """
    return (
        np.einsum("ik,ijk->j", g_inv, d_tensor)
        - np.einsum("ik,lki,lj->j", g_inv, gamma, tensor)
        - np.einsum("ik,lkj,il->j", g_inv, gamma, tensor)
    )


def check_margin(model: MetricModel, point: NDArray, h: float) -> None:
    """Raise DomainError unless a 2h neighbourhood of point is in the chart."""
    if not h > 0:
        raise DomainError(f"Finite-difference step must be positive, got {h}")
    if not model.in_domain(point, margin=2 * h):
        raise DomainError(
            f"Step h={h:.3g} leaves the chart of {model.name!r} near "
            f"rho={np.linalg.norm(point):.6g}"
        )


def lovelock_divergence_residual(
    model: MetricModel,
    point: Sequence[float] | NDArray,
    q: int = 1,
    h: float | None = None,
) -> float:
    """
    max_j |nabla^i G_(q)ij| by covariant central differences.

    Args:
        model: The metric model
        point: Chart point with a 2h margin to the chart boundary
        q: Lovelock order
        h: Step; defaults to 1e-3 * |point|

    Returns:
        The largest component of the divergence, O(h^2) for a correct
        pipeline

    Raises:
        DomainError: If the step leaves the chart
    """
    x = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-3 * float(np.linalg.norm(x))
    check_margin(model, x, h)

    centre = curvature_at(model, x, q)

    def lovelock_components(y: NDArray) -> NDArray:
        return curvature_at(model, y, q).lovelock.components

    d_lovelock = central_gradient(lovelock_components, x, h)
    div = two_tensor_divergence(
        centre.lovelock.components,
        d_lovelock,
        centre.metric_inverse.components,
        centre.christoffel,
    )
    residual = float(np.max(np.abs(div)))
    logger.debug(
        "Lovelock divergence q=%d at rho=%.4g, h=%.3g: %.3e",
        q,
        np.linalg.norm(x),
        h,
        residual,
    )
    return residual


def sample_directions(dim: int, count: int = 12, seed: int = 0) -> NDArray:
    """Coordinate axes followed by seeded random unit vectors."""
    rng = np.random.default_rng(seed)
    extra = rng.normal(size=(max(count - dim, 0), dim))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([np.eye(dim), extra])


def bounded_trend(
    radii: Sequence[float],
    values: Sequence[float],
    slope_tolerance: float = 0.1,
    zero_floor: float = 1e-12,
) -> tuple[bool, float]:
    """
    Judge whether an indicator series stays bounded along a ladder.

    A series is bounded when it is identically below ``zero_floor`` or
    when its log-log slope against radius does not exceed
    ``slope_tolerance``. This is a finite-ladder surrogate for O(1).

    Returns:
        (bounded, fitted slope or nan for a zero series)
    """
    vals = np.abs(np.asarray(values, dtype=float))
    if np.all(vals <= zero_floor):
        return True, math.nan
    if np.any(vals <= zero_floor):
        # mixed zero/nonzero: judge on the nonzero tail
        mask = vals > zero_floor
        if mask.sum() < 2:
            return True, math.nan
        radii = list(np.asarray(radii)[mask])
        vals = vals[mask]
    slope = loglog_slope(radii, vals)
    return slope <= slope_tolerance, slope


def ae_decay_check(
    model: MetricModel,
    radii: Sequence[float],
    tau: float | None = None,
    slope_tolerance: float = 0.1,
    directions: NDArray | None = None,
    q: int | None = None,
) -> IdentityReport:
    """
    Check the asymptotically Euclidean decay conditions along a ladder.

    Reports, per radius, the maxima over sample directions of
    rho^tau |g - delta|, rho^(tau+1) |dg| and rho^(tau+2) |ddg|, and
    passes if all three stay bounded. The curvature indicators
    rho^(tau+2) |R| and, when q is given, rho^(q(tau+2)) |G_(q)| are
    reported for information.

    Args:
        model: The metric model
        radii: Increasing ladder inside the chart
        tau: Decay order to test; defaults to the model's claim
        slope_tolerance: Largest admissible log-log growth rate
        directions: Unit vectors to sample; defaults to axes plus random
        q: Lovelock order for the G_(q) indicator, with 2q < n

    Returns:
        An IdentityReport named "ae_decay"
    """
    validate_ladder(radii)
    tau = model.decay_order if tau is None else tau
    dirs = (
        sample_directions(model.dim) if directions is None else directions
    )
    eye = np.eye(model.dim)

    if q is not None and 2 * q >= model.dim:
        raise DomainError(f"Order q={q} requires 2q < n={model.dim}")
    metric_ind, first_ind, second_ind, curvature_ind = [], [], [], []
    lovelock_ind = []
    for rho in radii:
        m0 = m1 = m2 = mr = mg = 0.0
        for d in dirs:
            sample = model.evaluate(rho * d)
            m0 = max(m0, float(np.max(np.abs(sample.metric - eye))))
            m1 = max(m1, float(np.max(np.abs(sample.first))))
            m2 = max(m2, float(np.max(np.abs(sample.second))))
            cp = curvature_from_sample(sample, q=q or 1)
            mr = max(mr, float(np.max(np.abs(cp.riemann_low.components))))
            mg = max(mg, float(np.max(np.abs(cp.lovelock.components))))
        metric_ind.append(rho**tau * m0)
        first_ind.append(rho ** (tau + 1) * m1)
        second_ind.append(rho ** (tau + 2) * m2)
        curvature_ind.append(rho ** (tau + 2) * mr)
        if q is not None:
            lovelock_ind.append(rho ** (q * (tau + 2)) * mg)

    verdicts = [
        bounded_trend(radii, series, slope_tolerance)
        for series in (metric_ind, first_ind, second_ind)
    ]
    passed = all(ok for ok, _ in verdicts)
    slopes = [slope for _, slope in verdicts]
    curvature_ok, curvature_slope = bounded_trend(
        radii, curvature_ind, slope_tolerance
    )
    notes = [
        "boundedness judged by log-log slope over a finite ladder "
        "(surrogate for O(rho^-tau))"
    ]
    if not passed:
        notes.append(f"decay order tau={tau} not supported by indicators")
        logger.warning("AE decay check failed for %s at tau=%s", model.name, tau)
    return IdentityReport(
        name="ae_decay",
        residuals=slopes,
        tolerance=slope_tolerance,
        passed=passed,
        notes=notes,
        details={
            "model": model.name,
            "tau": tau,
            "radii": list(radii),
            "metric": metric_ind,
            "first_derivatives": first_ind,
            "second_derivatives": second_ind,
            "curvature": curvature_ind,
            "curvature_bounded": curvature_ok,
            "curvature_slope": curvature_slope,
            "lovelock": lovelock_ind,
        },
    )
