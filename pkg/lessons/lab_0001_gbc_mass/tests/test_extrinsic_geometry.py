"""
Tests for second fundamental forms, mean curvatures and Newton
transformations.
"""

import math

import numpy as np
import pytest

from ..gbc_mass.errors import ContractViolation, DomainError, ImmersionError
from ..gbc_mass.extrinsic_geometry import (
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
    tangential_position,
)
from ..gbc_mass.models import ModelSpec, make_model
from ..gbc_mass.tensor_core import DenseTensor


def sphere_cap(n: int = 3, radius: float = 1.0):
    return make_model(ModelSpec("sphere-cap", {"n": n, "radius": radius}))


class TestExtrinsicBasics:
    """Test extrinsic data of simple immersions."""

    def test_flat_inclusion(self, flat_inclusion):
        """Test that the flat inclusion has no second fundamental form."""
        ep = extrinsic_at(flat_inclusion, [1.0, 2.0, 0.0, -1.0, 0.5])
        assert not np.any(ep.second_ff)
        np.testing.assert_allclose(ep.induced_metric.components, np.eye(5))

    def test_upward_normal_for_graphs(self):
        """Test that codimension-one normals point up."""
        ep = extrinsic_at(sphere_cap(), [0.2, 0.1, 0.3])
        assert ep.normal_frame[-1, 0] > 0
        np.testing.assert_allclose(ep.tangent_frame.T @ ep.normal_frame, 0.0, atol=1e-12)

    @pytest.mark.parametrize("n,p", [(3, 2), (4, 2), (4, 4), (5, 4)])
    def test_even_mean_curvatures_of_sphere(self, n, p):
        """Test S_p = binom(n, p) r^-p on a round sphere."""
        r = 1.5
        x = 0.2 * np.ones(n)
        s = mean_curvatures(extrinsic_at(sphere_cap(n, r), x), p)
        assert math.isclose(s.value_even, math.comb(n, p) * r**-p, rel_tol=1e-10)

    @pytest.mark.parametrize("p", [1, 3])
    def test_odd_mean_curvatures_point_inward(self, p):
        """Test S_p = -binom(n, p) r^-p psi / r for odd p."""
        n, r = 4, 1.5
        ep = extrinsic_at(sphere_cap(n, r), 0.2 * np.ones(n))
        s = mean_curvatures(ep, p).value_odd
        expected = -math.comb(n, p) * r**-p * ep.position / r
        np.testing.assert_allclose(s, expected, atol=1e-10)

    def test_order_zero_and_beyond_dimension(self):
        """Test S_0 = 1 and S_(n+1) = 0."""
        ep = extrinsic_at(sphere_cap(), [0.1, 0.2, 0.3])
        assert mean_curvatures(ep, 0).value_even == 1.0
        assert mean_curvatures(ep, 4).value_even == 0.0

    def test_induced_metric_of_schwarzschild_graph(self, schwarzschild, schwarzschild_graph):
        """Test that the rotational graph induces isotropic Schwarzschild."""
        x = np.array([1.0, -2.0, 0.5])
        induced = schwarzschild_graph.induced_metric_model().evaluate(x)
        direct = schwarzschild.evaluate(x)
        np.testing.assert_allclose(
            induced.metric, direct.metric, rtol=1e-12, atol=1e-14
        )
        np.testing.assert_allclose(induced.first, direct.first, atol=1e-12)
        np.testing.assert_allclose(induced.second, direct.second, atol=1e-11)

    def test_tangential_position_of_flat_inclusion(self, flat_inclusion):
        """Test that Y = x when psi is the inclusion."""
        x = np.array([1.0, 2.0, 3.0, -1.0, 0.5])
        np.testing.assert_allclose(tangential_position(flat_inclusion, x), x)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_codimension_one_matches_elementary_symmetric(self, seed):
        """Test S_(p) = sigma_p of the principal curvatures for random shapes."""
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3))
        shape = 0.5 * (a + a.T)
        normal = np.array([0.0, 0.0, 0.0, 1.0])
        ep = ExtrinsicPoint(
            point=np.zeros(3),
            induced_metric=DenseTensor(3, 2, np.eye(3), "symmetric-2", "dd"),
            metric_inverse=np.eye(3),
            tangent_frame=np.eye(4)[:, :3],
            second_ff=np.einsum("ij,x->ijx", shape, normal),
            normal_frame=normal[:, None],
            position=np.zeros(4),
        )
        k1, k2, k3 = np.linalg.eigvalsh(shape)
        sigma = [1.0, k1 + k2 + k3, k1 * k2 + k1 * k3 + k2 * k3, k1 * k2 * k3]
        assert abs(mean_curvatures(ep, 2).value_even - sigma[2]) <= 1e-12 * max(1.0, abs(sigma[2]))
        for p in (1, 3):
            np.testing.assert_allclose(
                mean_curvatures(ep, p).value_odd, sigma[p] * normal, atol=1e-12
            )


class TestNewtonTransformations:
    """Test trace and pairing identities of Newton transformations."""

    @pytest.fixture
    def codim2_point(self):
        model = make_model(ModelSpec("codim2-graph", {"n": 5, "q": 2}))
        return extrinsic_at(model, [0.7, -0.3, 1.1, 0.4, -0.9])

    @pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 5])
    def test_trace_identity(self, codim2_point, p):
        """Test tr T_p = (n - p) S_p in codimension two."""
        ep = codim2_point
        newton = newton_transformation(ep, p)
        s = mean_curvatures(ep, p)
        expected = (5 - p) * (s.value_even if p % 2 == 0 else s.value_odd)
        np.testing.assert_allclose(newton_trace(ep, newton), expected, atol=1e-10)

    @pytest.mark.parametrize("p", [0, 2, 4])
    def test_pairing_identity(self, codim2_point, p):
        """Test T_p B = (p + 1) S_(p+1) for even p."""
        ep = codim2_point
        paired = newton_pairing(ep, newton_transformation(ep, p))
        expected = (p + 1) * mean_curvatures(ep, p + 1).value_odd
        np.testing.assert_allclose(paired, expected, atol=1e-10)

    def test_newton_order_zero_is_metric(self, codim2_point):
        """Test T_0 = g."""
        newton = newton_transformation(codim2_point, 0).newton_even
        np.testing.assert_allclose(
            newton.components, codim2_point.induced_metric.components
        )

    def test_order_out_of_range(self, codim2_point):
        """Test that p > n + 1 is a domain error."""
        with pytest.raises(DomainError):
            mean_curvatures(codim2_point, 7)

    def test_non_integer_order(self, codim2_point):
        """Test that p must be an integer."""
        with pytest.raises(ContractViolation):
            newton_transformation(codim2_point, 2.0)


class TestPointwiseIdentities:
    """Test the Gauss relation and the divergence identities."""

    @pytest.mark.parametrize(
        "spec,point,q",
        [
            (ModelSpec("sphere-cap", {"n": 3}), [0.2, -0.1, 0.3], 1),
            (ModelSpec("schwarzschild-graph", {"m": 1.0}), [1.0, 2.0, -0.5], 1),
            (ModelSpec("codim2-graph", {"n": 5, "q": 2}), [0.7, -0.3, 1.1, 0.4, -0.9], 2),
            (ModelSpec("codim2-graph", {"n": 5, "q": 2}), [0.7, -0.3, 1.1, 0.4, -0.9], 1),
        ],
    )
    def test_gauss_relation(self, spec, point, q):
        """Test G_q = -((2q)!/2) T_2q on the induced metric."""
        model = make_model(spec)
        assert gauss_relation_residual(model, point, q) < 1e-9

    def test_gauss_relation_negative_control(self):
        """Test that the flipped Riemann sign breaks the Gauss relation."""
        model = sphere_cap()
        assert gauss_relation_residual(model, [0.2, -0.1, 0.3], 1, riemann_sign=-1.0) > 0.1

    def test_divergence_identity(self, schwarzschild_graph):
        """Test div(i_Y G_1) against the mean-curvature combination."""
        residual = divergence_identity_residual(schwarzschild_graph, [2.0, 1.0, -1.0], 1)
        assert residual < 1e-6

    def test_divergence_identity_second_order(self):
        """Test the q = 2 divergence identity in codimension two."""
        model = make_model(ModelSpec("codim2-graph", {"n": 5, "q": 2}))
        x = [0.7, -0.3, 1.1, 0.4, -0.9]
        coarse = divergence_identity_residual(model, x, 2, h=2e-2)
        fine = divergence_identity_residual(model, x, 2, h=1e-2)
        assert fine < coarse
        assert fine < 1e-3

    @pytest.mark.parametrize(
        "bilinear,vector",
        [
            (lambda y: np.outer(y, y) + np.eye(3), lambda y: np.array([1.0, -2.0, 0.5])),
            (
                lambda y: np.diag([1.0, 2.0, 3.0]),
                lambda y: np.array([[1.0, 2.0, 0.0], [0.0, 1.0, -1.0], [3.0, 0.0, 1.0]]) @ y,
            ),
        ],
    )
    def test_pohozaev_schoen_exact_fields(self, schwarzschild, bilinear, vector):
        """Test the identity where central differences are exact."""
        residual = pohozaev_schoen_residual(
            bilinear, vector, schwarzschild, [2.0, -1.0, 1.5]
        )
        assert residual < 1e-8


class TestImmersionValidation:
    """Test invalid immersions."""

    def test_rank_deficient_differential(self):
        """Test that a degenerate map raises an immersion error."""
        model = ImmersionModel(
            intrinsic_dim=3,
            ambient_dim=4,
            map=lambda xs: [xs[0], xs[0], xs[1], 0.0],
            name="degenerate",
        )
        with pytest.raises(ImmersionError, match="rank deficient"):
            extrinsic_at(model, [1.0, 1.0, 1.0])

    def test_ambient_dimension_must_exceed(self):
        """Test that d > n is required."""
        with pytest.raises(ContractViolation):
            ImmersionModel(intrinsic_dim=3, ambient_dim=3, map=lambda xs: xs)

    def test_point_outside_chart(self):
        """Test that points beyond rho_max are rejected."""
        with pytest.raises(DomainError):
            extrinsic_at(sphere_cap(), [0.9, 0.0, 0.0])

    def test_wrong_component_count(self):
        """Test that the map must return d components."""
        model = ImmersionModel(3, 5, map=lambda xs: [*xs, 0.0])
        with pytest.raises(ContractViolation, match="returned 4"):
            model.evaluate([1.0, 0.0, 0.0])
