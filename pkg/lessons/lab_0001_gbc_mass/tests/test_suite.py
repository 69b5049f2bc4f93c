"""Tests for the pointwise identity suite."""

import math

import numpy as np
import pytest

from ..gbc_mass.models import ModelSpec, make_model
from ..gbc_mass.suite import (
    FD_SLOPE_TOLERANCE,
    applicable_orders,
    convergence_slope,
    extrinsic_reports,
    fd_report,
    intrinsic_reports,
    sample_points,
)

POINTWISE_INTRINSIC = ("lovelock_trace", "p_symmetry", "p_contraction", "einstein")
POINTWISE_EXTRINSIC = ("newton_trace", "newton_pairing", "gauss_relation")


class TestSampling:
    """Test seeded sample points."""

    def test_bounded_chart(self):
        """Test that points stay inside the bounded chart."""
        model = make_model(ModelSpec("sphere-cap", {"rho_max": 0.8}))
        points = sample_points(model, 40, seed=3)
        radii = np.linalg.norm(points, axis=1)
        assert points.shape == (40, 3)
        assert np.all(radii >= 0.08 - 1e-12)
        assert np.all(radii <= 0.64 + 1e-12)

    def test_exterior_chart(self, schwarzschild):
        """Test the radial window of an exterior chart."""
        radii = np.linalg.norm(sample_points(schwarzschild, 40), axis=1)
        low = max(1.5 * schwarzschild.rho_min, 0.5)
        assert np.all(radii >= low - 1e-12)
        assert np.all(radii <= low + 10.0 + 1e-12)

    def test_seed_is_reproducible(self, schwarzschild):
        """Test that equal seeds give equal points."""
        np.testing.assert_array_equal(
            sample_points(schwarzschild, 5, seed=7),
            sample_points(schwarzschild, 5, seed=7),
        )

    @pytest.mark.parametrize(
        "dim, q, expected", [(3, 1, [1]), (3, 2, [1]), (5, 2, [1, 2]), (7, 3, [1, 3])]
    )
    def test_applicable_orders(self, dim, q, expected):
        """Test the orders a dimension admits."""
        assert applicable_orders(dim, q) == expected


class TestConvergenceSlope:
    """Test finite-difference convergence judging."""

    def test_second_order_residual(self):
        """Test that an h^2 residual has slope 2."""
        slope, values = convergence_slope(lambda h: 3.0 * h * h)
        assert math.isclose(slope, 2.0, rel_tol=1e-12)
        assert len(values) == 3

    def test_vanishing_residual(self):
        """Test that residuals below the floor give nan."""
        slope, _ = convergence_slope(lambda h: 0.0)
        assert math.isnan(slope)

    def test_fd_report_passes_second_order(self):
        """Test that the report passes an h^2 residual at every point."""
        points = np.zeros((2, 3))
        report = fd_report("quadratic", lambda x, h: h * h, points)
        assert report.passed
        assert report.worst < FD_SLOPE_TOLERANCE

    def test_fd_report_fails_first_order(self):
        """Test that an O(h) residual fails."""
        points = np.zeros((1, 3))
        report = fd_report("linear", lambda x, h: h, points)
        assert not report.passed
        assert math.isclose(report.details["slopes"][0], 1.0, rel_tol=1e-12)

    def test_fd_report_passes_exact_identity(self):
        """Test that an identically vanishing residual passes."""
        report = fd_report("exact", lambda x, h: 0.0, np.zeros((1, 3)))
        assert report.passed
        assert report.residuals == [0.0]


class TestIntrinsicReports:
    """Test Lovelock and P-tensor identities on sample metrics."""

    def test_sphere_patch_all_orders(self):
        """Test every pointwise identity on a round sphere patch in n = 4."""
        model = make_model(ModelSpec("sphere-patch", {"n": 4}))
        points = sample_points(model, 5, seed=1)
        reports = intrinsic_reports(model, [1], points, checks=POINTWISE_INTRINSIC)
        assert [r.name for r in reports] == [
            "lovelock_trace[q=1]",
            "p_symmetry[q=1]",
            "p_contraction[q=1]",
            "einstein",
        ]
        assert all(r.passed for r in reports), [r.to_dict() for r in reports]

    def test_conformal_second_order(self):
        """Test the q = 2 identities on a conformally flat metric."""
        model = make_model(ModelSpec("conformal", {"n": 5}))
        points = sample_points(model, 4, seed=2)
        reports = intrinsic_reports(model, [1, 2], points, checks=POINTWISE_INTRINSIC)
        names = [r.name for r in reports]
        assert "p_contraction[q=2]" in names
        assert "einstein" in names
        assert all(r.passed for r in reports), [r.to_dict() for r in reports]


class TestExtrinsicReports:
    """Test Newton and Gauss identities on sample immersions."""

    def test_schwarzschild_graph(self, schwarzschild_graph):
        """Test the pointwise extrinsic identities on the rotational graph."""
        points = sample_points(schwarzschild_graph, 5, seed=4)
        reports = extrinsic_reports(
            schwarzschild_graph, [1], points, checks=POINTWISE_EXTRINSIC
        )
        assert [r.name for r in reports] == [
            "newton_trace",
            "newton_pairing",
            "gauss_relation[q=1]",
        ]
        assert all(r.passed for r in reports), [r.to_dict() for r in reports]

    def test_flipped_sign_fails_gauss_relation(self):
        """Test the negative control on a sphere cap."""
        model = make_model(ModelSpec("sphere-cap", {}))
        points = sample_points(model, 5)
        (report,) = extrinsic_reports(
            model, [1], points, riemann_sign=-1.0, checks=("gauss_relation",)
        )
        assert not report.passed
        assert "Riemann sign flipped (debug)" in report.notes

    def test_check_selection(self, flat_inclusion):
        """Test that only the requested checks run."""
        points = sample_points(flat_inclusion, 2)
        reports = extrinsic_reports(
            flat_inclusion, [1, 2], points, checks=("gauss_relation",)
        )
        assert [r.name for r in reports] == [
            "gauss_relation[q=1]",
            "gauss_relation[q=2]",
        ]
        assert all(r.passed for r in reports)
