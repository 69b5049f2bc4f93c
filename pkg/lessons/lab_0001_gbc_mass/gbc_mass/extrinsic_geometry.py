"""
Extrinsic geometry of immersions psi: chart -> R^d.

Second fundamental form, higher-order mean curvatures S_(p), Newton
transformations T_(p) and the pointwise identities tying them to the
intrinsic Lovelock tensor of the induced metric.

Conventions:
    second_ff[i, j, alpha] = B_ij^alpha, the normal part of d_i d_j psi.
    Mixed B_b^a = g^ac B_bc; odd-order quantities are ambient vectors.
    For codimension 1 the unit normal has a positive last ambient
    component (upward for graphs).
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from .dual import Scalar, unpack, variables
from .errors import ContractViolation, DomainError, ImmersionError
from .intrinsic_geometry import (
    MetricModel,
    central_gradient,
    check_margin,
    christoffel_symbols,
    curvature_at,
    one_form_divergence,
    two_tensor_divergence,
)
from .tensor_core import DenseTensor, antisymmetrized_contraction

logger = logging.getLogger(__name__)

ImmersionMap = Callable[[list], Sequence[Scalar]]
ImmersionDerivatives = Callable[
    [NDArray], tuple[NDArray, NDArray, NDArray, NDArray | None]
]

ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class ImmersionSample:
    """psi and its partials at a point; third is None at order 2."""

    point: NDArray
    value: NDArray  # (d,)
    jacobian: NDArray  # (d, n)
    hessian: NDArray  # (d, n, n)
    third: NDArray | None  # (d, n, n, n)


@dataclass(frozen=True)
class ImmersionModel:
    """
    An immersion of the chart region rho_min <= |x| <= rho_max into R^d.

    Args:
        intrinsic_dim: Chart dimension n >= 3
        ambient_dim: Ambient dimension d > n
        map: Callable sending a list of coordinate jets to the d ambient
            components of psi, written in plain arithmetic
        rho_min: Inner radius of the chart region
        rho_max: Outer radius
        decay_order: Claimed AE order tau
        name: Model name for reports
        analytic: Optional callable x -> (psi, dpsi, ddpsi, dddpsi)
    """

    intrinsic_dim: int
    ambient_dim: int
    map: ImmersionMap | None
    rho_min: float = 0.0
    rho_max: float = math.inf
    decay_order: float = 1.0
    name: str = "immersion"
    analytic: ImmersionDerivatives | None = None

    def __post_init__(self):
        if self.intrinsic_dim < 3:
            raise ContractViolation("Intrinsic dimension must be >= 3")
        if self.ambient_dim <= self.intrinsic_dim:
            raise ContractViolation("Ambient dimension must exceed n")
        if self.map is None and self.analytic is None:
            raise ContractViolation("An immersion needs a map or derivatives")
        assert self.rho_max > self.rho_min >= 0, "Chart radii must be ordered"

    @property
    def dim(self) -> int:
        return self.intrinsic_dim

    @property
    def codimension(self) -> int:
        return self.ambient_dim - self.intrinsic_dim

    def in_domain(self, point: NDArray, margin: float = 0.0) -> bool:
        return self.induced_metric_model().in_domain(point, margin)

    def evaluate(
        self, point: Sequence[float] | NDArray, order: int = 2
    ) -> ImmersionSample:
        """
        Evaluate psi with partial derivatives up to ``order`` (2 or 3).

        Raises:
            DomainError: If the point is outside the chart region
        """
        x = np.asarray(point, dtype=float)
        n, d = self.intrinsic_dim, self.ambient_dim
        if x.shape != (n,):
            raise ContractViolation(f"Point must have shape ({n},)")
        if not self.in_domain(x):
            raise DomainError(
                f"Point at rho={np.linalg.norm(x):.6g} outside chart of "
                f"immersion {self.name!r}"
            )
        if self.map is not None:
            entries = list(self.map(variables(x, order=order)))
            if len(entries) != d:
                raise ContractViolation(
                    f"Immersion {self.name!r} returned {len(entries)} "
                    f"components, expected {d}"
                )
            value, jac, hess, third = unpack(entries, n, order)
        else:
            assert self.analytic is not None
            value, jac, hess, third = self.analytic(x)
            if order == 2:
                third = None
        return ImmersionSample(x, value, jac, hess, third)

    def induced_metric_model(self) -> MetricModel:
        """
        The pulled-back metric psi* delta as a MetricModel.

        Metric derivatives come from the third-order jet of psi:
        d_k g_ij = <d_ik psi, d_j psi> + <d_i psi, d_jk psi> and
        d_kl g_ij = <d_ikl psi, d_j psi> + <d_ik psi, d_jl psi>
                    + <d_il psi, d_jk psi> + <d_i psi, d_jkl psi>.
        """
        return self._induced_metric

    @cached_property
    def _induced_metric(self) -> MetricModel:
        return _induced_metric(self)


def _induced_metric(model: ImmersionModel) -> MetricModel:
    def derivatives(x: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        s = model.evaluate(x, order=3)
        assert s.third is not None
        jac, hess, third = s.jacobian, s.hessian, s.third
        g = jac.T @ jac
        dg = np.einsum("aik,aj->ijk", hess, jac)
        dg = dg + dg.transpose(1, 0, 2)
        ddg = np.einsum("aikl,aj->ijkl", third, jac) + np.einsum(
            "aik,ajl->ijkl", hess, hess
        )
        ddg = ddg + ddg.transpose(1, 0, 2, 3)
        return g, dg, ddg

    return MetricModel(
        dim=model.intrinsic_dim,
        components=None,
        rho_min=model.rho_min,
        rho_max=model.rho_max,
        decay_order=model.decay_order,
        name=f"{model.name}:induced",
        analytic=derivatives,
    )


@dataclass(frozen=True)
class ExtrinsicPoint:
    """Induced metric, second fundamental form and frames at one point."""

    point: NDArray
    induced_metric: DenseTensor
    metric_inverse: NDArray
    tangent_frame: NDArray  # (d, n), columns d_i psi
    second_ff: NDArray  # (n, n, d)
    normal_frame: NDArray  # (d, d - n), orthonormal columns
    position: NDArray  # (d,)

    @property
    def dim(self) -> int:
        return self.tangent_frame.shape[1]

    @cached_property
    def mixed_second_ff(self) -> NDArray:
        """B_b^a as [b, a, alpha]."""
        return np.einsum("ac,bcx->bax", self.metric_inverse, self.second_ff)

    @cached_property
    def pairings(self) -> NDArray:
        """<B_ij, B_kl> as [i, j, k, l]."""
        return np.einsum("ijx,klx->ijkl", self.second_ff, self.second_ff)

    @cached_property
    def pair_factor(self) -> NDArray:
        """
        F[u1, u2, l1, l2] = <B_u1^l1, B_u2^l2> antisymmetrized in (l1, l2).

        Antisymmetrizing the lower pair leaves delta contractions unchanged
        and makes F antisymmetric in both pairs.
        """
        g_inv = self.metric_inverse
        f = np.einsum(
            "ac,bd,xcyd->xyab", g_inv, g_inv, self.pairings
        )
        return 0.5 * (f - f.transpose(0, 1, 3, 2))

    @cached_property
    def second_ff_up(self) -> NDArray:
        """B^ij as [i, j, alpha]."""
        g_inv = self.metric_inverse
        return np.einsum("ia,jb,abx->ijx", g_inv, g_inv, self.second_ff)


@dataclass(frozen=True)
class MeanCurvatureSet:
    """
    S_(p) and/or T_(p) at one point.

    Even p fills the scalar fields, odd p the ambient-vector fields.
    """

    order: int
    value_even: float | None = None
    value_odd: NDArray | None = None
    newton_even: DenseTensor | None = None
    newton_odd: NDArray | None = None  # (n, n, d)


def _gram_schmidt_complement(tangent: NDArray) -> NDArray:
    """
    Orthonormal basis of the orthogonal complement of the tangent columns.

    Candidates are the coordinate vectors projected onto the complement,
    taken in order of decreasing norm; each pass of Gram-Schmidt is
    repeated once for stability.
    """
    d, n = tangent.shape
    q_tan, _ = np.linalg.qr(tangent)
    projector = np.eye(d) - q_tan @ q_tan.T
    candidates = projector.T
    order = np.argsort(-np.linalg.norm(candidates, axis=1), kind="stable")
    basis: list[NDArray] = []
    for idx in order:
        v = candidates[idx].copy()
        for _ in range(2):
            for w in list(q_tan.T) + basis:
                v -= (w @ v) * w
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
        if len(basis) == d - n:
            break
    assert len(basis) == d - n, "Normal space must have dimension d - n"
    return np.stack(basis, axis=1)


def extrinsic_at(
    model: ImmersionModel, point: Sequence[float] | NDArray
) -> ExtrinsicPoint:
    """
    Evaluate the extrinsic data of ``model`` at ``point``.

    Args:
        model: The immersion
        point: Chart coordinates

    Returns:
        An ExtrinsicPoint with B orthogonal to the tangent frame

    Raises:
        ImmersionError: If the differential is rank deficient
        DomainError: If the point is outside the chart region
    """
    s = model.evaluate(point, order=2)
    jac, hess = s.jacobian, s.hessian
    n, d = model.intrinsic_dim, model.ambient_dim

    g = jac.T @ jac
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ImmersionError(
            f"Differential of {model.name!r} rank deficient at {s.point}"
        ) from exc
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + g_inv.T)
    tangent_projector = jac @ g_inv @ jac.T
    normal_projector = np.eye(d) - tangent_projector
    second_ff = np.einsum("ab,bij->ija", normal_projector, hess)

    normals = _gram_schmidt_complement(jac)
    if d - n == 1 and normals[-1, 0] < 0:
        normals = -normals

    scale = max(1.0, float(np.max(np.abs(hess))))
    leak = float(np.max(np.abs(np.einsum("ija,ak->ijk", second_ff, jac))))
    assert leak <= ORTHOGONALITY_TOL * scale * max(
        1.0, float(np.max(np.abs(jac)))
    ), f"Second fundamental form not normal (leak {leak:.3e})"

    return ExtrinsicPoint(
        point=s.point,
        induced_metric=DenseTensor(n, 2, g, "symmetric-2"),
        metric_inverse=g_inv,
        tangent_frame=jac,
        second_ff=second_ff,
        normal_frame=normals,
        position=s.value,
    )


def _check_p(p: int, highest: int) -> None:
    if not isinstance(p, int | np.integer):
        raise ContractViolation(f"p must be an integer, got {p!r}")
    if not 0 <= p <= highest:
        raise DomainError(f"p must lie in [0, {highest}], got {p}")


def mean_curvatures(ep: ExtrinsicPoint, p: int) -> MeanCurvatureSet:
    """
    The p-th mean curvature S_(p).

    Even p = 2m: S = (1/p!) delta^{b..}_{a..} prod <B_b^a, B_b^a>.
    Odd p = 2m+1: the same with one extra free factor B_b^a, giving an
    ambient normal vector. S_(0) = 1 and S_(n+1) = 0.

    Args:
        ep: Extrinsic data at a point
        p: Order in [0, n+1]

    Returns:
        A MeanCurvatureSet with value_even or value_odd set
    """
    n = ep.dim
    d = ep.position.shape[0]
    _check_p(p, n + 1)
    if p == 0:
        return MeanCurvatureSet(0, value_even=1.0)
    norm = 1.0 / math.factorial(p)
    if p % 2 == 0:
        if p > n:
            return MeanCurvatureSet(p, value_even=0.0)
        value = antisymmetrized_contraction(ep.pair_factor, pairs=p // 2)
        return MeanCurvatureSet(p, value_even=float(value) * norm)
    if p > n:
        return MeanCurvatureSet(p, value_odd=np.zeros(d))
    vec = antisymmetrized_contraction(
        ep.pair_factor, pairs=p // 2, tail=ep.mixed_second_ff
    )
    return MeanCurvatureSet(p, value_odd=vec * norm)


def newton_transformation(ep: ExtrinsicPoint, p: int) -> MeanCurvatureSet:
    """
    The p-th Newton transformation T_(p).

    T_(p)ij = (1/p!) g_ik delta^{k b..}_{j a..} prod <B, B> (times one
    free B factor for odd p). T_(0) = g and T_(p) = 0 for p > n.

    Args:
        ep: Extrinsic data at a point
        p: Order in [0, n+1]

    Returns:
        A MeanCurvatureSet with newton_even (symmetric 2-tensor) or
        newton_odd (normal-vector-valued, shape (n, n, d)) set
    """
    n = ep.dim
    d = ep.position.shape[0]
    _check_p(p, n + 1)
    g = ep.induced_metric.components
    if p == 0:
        return MeanCurvatureSet(0, newton_even=ep.induced_metric)
    norm = 1.0 / math.factorial(p)
    if p % 2 == 0:
        mixed = antisymmetrized_contraction(
            ep.pair_factor, pairs=p // 2, free=1
        )
        comps = norm * (g @ mixed)
        return MeanCurvatureSet(
            p, newton_even=DenseTensor(n, 2, comps, "symmetric-2")
        )
    if p > n:
        return MeanCurvatureSet(p, newton_odd=np.zeros((n, n, d)))
    mixed = antisymmetrized_contraction(
        ep.pair_factor, pairs=p // 2, free=1, tail=ep.mixed_second_ff
    )
    return MeanCurvatureSet(
        p, newton_odd=norm * np.einsum("ik,kjx->ijx", g, mixed)
    )


def newton_trace(ep: ExtrinsicPoint, newton: MeanCurvatureSet) -> NDArray:
    """tr_g T_(p): a scalar array for even p, an ambient vector for odd p."""
    g_inv = ep.metric_inverse
    if newton.newton_even is not None:
        return np.asarray(
            np.einsum("ij,ij->", g_inv, newton.newton_even.components)
        )
    assert newton.newton_odd is not None, "Newton fields must be populated"
    return np.einsum("ij,ijx->x", g_inv, newton.newton_odd)


def newton_pairing(ep: ExtrinsicPoint, newton: MeanCurvatureSet) -> NDArray:
    """T_(p)ij B^ij for even p, an ambient vector."""
    assert newton.newton_even is not None, "Pairing is defined for even p"
    return np.einsum(
        "ij,ijx->x", newton.newton_even.components, ep.second_ff_up
    )


def gauss_relation_residual(
    model: ImmersionModel,
    point: Sequence[float] | NDArray,
    q: int,
    riemann_sign: float = 1.0,
) -> float:
    """
    max |G_(q) + ((2q)!/2) T_(2q)| over components.

    G_(q) comes from the intrinsic pipeline on the induced metric, T_(2q)
    from the second fundamental form; the two agree by the Gauss equation.

    Args:
        model: The immersion
        point: Chart coordinates
        q: Order with 2q < n
        riemann_sign: Debug multiplier passed to the intrinsic pipeline
    """
    cp = curvature_at(model.induced_metric_model(), point, q, riemann_sign)
    ep = extrinsic_at(model, point)
    newton = newton_transformation(ep, 2 * q).newton_even
    assert newton is not None
    diff = cp.lovelock.components + 0.5 * math.factorial(2 * q) * (
        newton.components
    )
    return float(np.max(np.abs(diff)))


def tangential_position(model: ImmersionModel, point: NDArray) -> NDArray:
    """Y^i = g^ij <d_j psi, psi>, the tangential part of the position."""
    s = model.evaluate(point, order=2)
    g = s.jacobian.T @ s.jacobian
    return np.linalg.solve(g, s.jacobian.T @ s.value)


def divergence_identity_residual(
    model: ImmersionModel,
    point: Sequence[float] | NDArray,
    q: int,
    h: float | None = None,
) -> float:
    """
    |div(i_Y G_(q)) + ((2q)!/2)[(n-2q) S_(2q) + (2q+1) <S_(2q+1), Z>]|.

    Y is the tangential part of the ambient position field Z. The
    divergence uses covariant central differences, so the residual is
    O(h^2).

    Raises:
        DomainError: If the step leaves the chart
    """
    x = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-3 * float(np.linalg.norm(x))
    metric_model = model.induced_metric_model()
    check_margin(metric_model, x, h)
    n = model.intrinsic_dim

    def contracted(y: NDArray) -> NDArray:
        cp = curvature_at(metric_model, y, q)
        return tangential_position(model, y) @ cp.lovelock.components

    centre = curvature_at(metric_model, x, q)
    form = contracted(x)
    d_form = central_gradient(contracted, x, h)
    lhs = one_form_divergence(
        form, d_form, centre.metric_inverse.components, centre.christoffel
    )

    ep = extrinsic_at(model, x)
    s_even = mean_curvatures(ep, 2 * q).value_even
    s_odd = mean_curvatures(ep, 2 * q + 1).value_odd
    assert s_even is not None and s_odd is not None
    rhs = (
        0.5
        * math.factorial(2 * q)
        * ((n - 2 * q) * s_even + (2 * q + 1) * float(s_odd @ ep.position))
    )
    return abs(lhs + rhs)


def pohozaev_schoen_residual(
    bilinear: Callable[[NDArray], NDArray],
    vector: Callable[[NDArray], NDArray],
    model: MetricModel,
    point: Sequence[float] | NDArray,
    h: float | None = None,
) -> float:
    """
    |div(i_V K) - (div K)(V) - g(K, L_V g) / 2| by central differences.

    Args:
        bilinear: Symmetric 2-tensor field K, x -> (n, n)
        vector: Vector field V, x -> (n,)
        model: Metric model supplying g and its Christoffel symbols
        point: Chart coordinates
        h: Step; defaults to 1e-3 * |point|

    Raises:
        DomainError: If the step leaves the chart
    """
    x = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-3 * float(np.linalg.norm(x))
    check_margin(model, x, h)

    sample = model.evaluate(x)
    g, dg = sample.metric, sample.first
    g_inv = np.linalg.inv(g)
    gamma = christoffel_symbols(g_inv, dg)

    k_here = np.asarray(bilinear(x))
    v_here = np.asarray(vector(x))

    def contracted(y: NDArray) -> NDArray:
        return np.asarray(vector(y)) @ np.asarray(bilinear(y))

    lhs = one_form_divergence(
        contracted(x), central_gradient(contracted, x, h), g_inv, gamma
    )
    div_k = two_tensor_divergence(
        k_here, central_gradient(bilinear, x, h), g_inv, gamma
    )
    d_v = central_gradient(vector, x, h)  # d_v[k, i] = d_i V^k
    lie_g = (
        np.einsum("k,ijk->ij", v_here, dg)
        + np.einsum("kj,ki->ij", g, d_v)
        + np.einsum("ik,kj->ij", g, d_v)
    )
    balance = 0.5 * np.einsum("ia,jb,ij,ab->", g_inv, g_inv, k_here, lie_g)
    return abs(lhs - float(v_here @ div_k) - float(balance))
