"""
Tests for identity reports, writers and the worker pool.
"""

import csv
import json
import math

import numpy as np
import pytest

from ..gbc_mass.parallel import map_points, weighted_sum
from ..gbc_mass.reports import (
    IdentityReport,
    residual_report,
    write_json,
    write_ladder_csv,
    write_table_csv,
)


class TestIdentityReport:
    """Test report construction."""

    def test_residual_report_passes_within_tolerance(self):
        """Test that all residuals at or below tolerance pass."""
        report = residual_report("trace", [1e-12, 1e-10], 1e-10)
        assert report.passed
        assert report.worst == 1e-10

    def test_residual_report_fails_above_tolerance(self):
        """Test that one large residual fails the report."""
        assert not residual_report("trace", [1e-12, 1e-3], 1e-10).passed

    def test_worst_ignores_nan(self):
        """Test that NaN residuals do not hide the worst value."""
        report = IdentityReport("slope", [math.nan, 0.1], 0.2, True)
        assert report.worst == 0.1

    def test_non_positive_tolerance(self):
        """Test that tolerances must be positive."""
        with pytest.raises(AssertionError):
            residual_report("trace", [0.0], 0.0)

    def test_to_dict_is_json_ready(self):
        """Test conversion of numpy values and non-finite floats."""
        report = IdentityReport(
            "x",
            [0.1],
            1.0,
            True,
            details={"array": np.arange(2), "flag": np.bool_(True), "beta": math.inf},
        )
        data = report.to_dict()
        assert data["details"] == {"array": [0, 1], "flag": True, "beta": None}
        json.dumps(data)


class TestWriters:
    """Test JSON and CSV output."""

    def test_write_json_sorted(self, tmp_path):
        """Test stable key order and directory creation."""
        path = write_json(tmp_path / "out" / "r.json", {"b": 1, "a": np.float64(0.5)})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": 0.5, "b": 1}

    def test_write_ladder_csv_round_trips_floats(self, tmp_path):
        """Test that values are written with full precision."""
        path = write_ladder_csv(tmp_path / "ladder.csv", [25.0, 50.0], [1 / 3, 2 / 3])
        with path.open() as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["rho", "flux"]
        assert float(rows[1][1]) == 1 / 3

    def test_write_ladder_csv_length_mismatch(self, tmp_path):
        """Test that radii and fluxes must align."""
        with pytest.raises(AssertionError):
            write_ladder_csv(tmp_path / "bad.csv", [1.0], [1.0, 2.0])

    def test_write_table_csv(self, tmp_path):
        """Test a generic table."""
        path = write_table_csv(tmp_path / "t.csv", ["a", "b"], [[1, 2], [3, 4]])
        assert path.read_text().splitlines() == ["a,b", "1,2", "3,4"]


class TestParallel:
    """Test the order-preserving worker pool."""

    def test_map_preserves_order(self):
        """Test that threaded results come back in input order."""
        items = list(range(50))
        assert map_points(lambda x: x * x, items, threads=4) == [x * x for x in items]

    def test_map_inline(self):
        """Test the single-thread path."""
        assert map_points(str, [1, 2], threads=1) == ["1", "2"]

    def test_invalid_thread_count(self):
        """Test that at least one thread is required."""
        with pytest.raises(AssertionError):
            map_points(str, [1], threads=0)

    def test_weighted_sum_is_compensated(self):
        """Test that cancellation does not lose small terms."""
        weights = np.ones(3)
        assert weighted_sum(weights, [1e16, 1.0, -1e16]) == 1.0
