"""
Tests for the sphere and radial quadrature rules.
"""

import math

import numpy as np
import pytest

from ..gbc_mass.errors import ContractViolation
from ..gbc_mass.quadrature import RadialQuadrature, SphereQuadrature, sphere_area


class TestSphereArea:
    """Test the unit-sphere measure."""

    @pytest.mark.parametrize(
        "dim,expected",
        [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi**2), (5, 8 * math.pi**2 / 3)],
    )
    def test_known_areas(self, dim, expected):
        """Test omega_{n-1} in low dimensions."""
        assert math.isclose(sphere_area(dim), expected, rel_tol=1e-13)


class TestSphereQuadrature:
    """Test the product rule on spheres."""

    @pytest.mark.parametrize("dim", [3, 4, 5])
    def test_nodes_are_unit_vectors(self, dim):
        """Test that every node lies on the unit sphere."""
        quad = SphereQuadrature.gauss_product(dim, 3)
        np.testing.assert_allclose(np.linalg.norm(quad.nodes, axis=1), 1.0)

    def test_node_count(self):
        """Test N^(n-2) polar times 2N azimuthal nodes."""
        assert len(SphereQuadrature.gauss_product(3, 4).weights) == 32
        assert len(SphereQuadrature.gauss_product(5, 2).weights) == 32

    @pytest.mark.parametrize("dim", [3, 4, 6])
    def test_second_moment(self, dim):
        """Test int x_1^2 dS = omega / n."""
        quad = SphereQuadrature.gauss_product(dim, 3)
        value = quad.integrate(quad.nodes[:, 0] ** 2)
        assert math.isclose(value, sphere_area(dim) / dim, rel_tol=1e-12)

    def test_fourth_moment_on_two_sphere(self):
        """Test int x_3^4 dS = 4 pi / 5 with a degree-5 rule."""
        quad = SphereQuadrature.gauss_product(3, 3)
        value = quad.integrate(quad.nodes[:, 2] ** 4)
        assert math.isclose(value, 4 * math.pi / 5, rel_tol=1e-12)

    def test_odd_moments_vanish(self):
        """Test that x_1 x_2^2 integrates to zero."""
        quad = SphereQuadrature.gauss_product(4, 3)
        value = quad.integrate(quad.nodes[:, 0] * quad.nodes[:, 1] ** 2)
        assert abs(value) < 1e-13

    def test_radius_scaling(self):
        """Test that the area at radius r is omega r^(n-1)."""
        quad = SphereQuadrature.gauss_product(3, 2).at_radius(3.0)
        assert math.isclose(quad.integrate(np.ones(len(quad.weights))), 36 * math.pi)
        np.testing.assert_allclose(np.linalg.norm(quad.points, axis=1), 3.0)

    def test_exactness_recorded(self):
        """Test that N nodes per angle are exact to degree 2N - 1."""
        assert SphereQuadrature.gauss_product(3, 5).exactness == 9

    def test_invalid_dimension(self):
        """Test that a sphere rule needs dim >= 2."""
        with pytest.raises(ContractViolation):
            SphereQuadrature.gauss_product(1, 4)

    def test_invalid_node_count(self):
        """Test that zero nodes are rejected."""
        with pytest.raises(ContractViolation):
            SphereQuadrature.gauss_product(3, 0)


class TestRadialQuadrature:
    """Test the composite radial rule."""

    def test_geometric_edges(self):
        """Test doubling shell boundaries."""
        rule = RadialQuadrature.geometric(1.0, 8.0, 3, 4)
        assert rule.edges.tolist() == [1.0, 2.0, 4.0, 8.0]

    def test_polynomial_exact(self):
        """Test int_1^8 r^2 dr with 4 Gauss nodes per shell."""
        rule = RadialQuadrature.geometric(1.0, 8.0, 3, 4)
        assert math.isclose(rule.integrate(rule.nodes**2), (512 - 1) / 3, rel_tol=1e-13)

    def test_zero_inner_radius(self):
        """Test that an inner radius of 0 starts with a full shell."""
        rule = RadialQuadrature.geometric(0.0, 8.0, 4, 2)
        assert rule.edges.tolist() == [0.0, 1.0, 2.0, 4.0, 8.0]
        assert math.isclose(rule.integrate(np.ones_like(rule.nodes)), 8.0)

    def test_power_decay_converges(self):
        """Test int_1^100 r^-2 dr to high accuracy on geometric shells."""
        rule = RadialQuadrature.geometric(1.0, 100.0, 8, 8)
        assert math.isclose(rule.integrate(rule.nodes**-2.0), 0.99, rel_tol=1e-10)

    def test_invalid_interval(self):
        """Test that inner must be below outer."""
        with pytest.raises(ContractViolation):
            RadialQuadrature.geometric(5.0, 1.0, 2, 2)

    def test_value_count_checked(self):
        """Test that one value per node is required."""
        rule = RadialQuadrature.geometric(1.0, 2.0, 1, 3)
        with pytest.raises(AssertionError):
            rule.integrate(np.ones(2))
