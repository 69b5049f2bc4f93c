"""
Report values and writers.

``IdentityReport`` is the common result of every checker in the package;
the writers turn reports into the JSON and CSV files the CLI emits.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class IdentityReport:
    """
    Residuals of a named identity with its verdict.

    Args:
        name: Identity or check name (e.g. "lovelock_trace")
        residuals: One residual per sample point, radius or step
        tolerance: Threshold the residuals were judged against
        passed: Verdict
        notes: Human-readable remarks (surrogate criteria, warnings)
        details: Free-form numeric detail for the JSON report
    """

    name: str
    residuals: list[float]
    tolerance: float
    passed: bool
    notes: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        """Largest residual, ignoring NaN entries."""
        finite = [r for r in self.residuals if not math.isnan(r)]
        return max(finite, default=0.0)

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))


def residual_report(
    name: str,
    residuals: list[float],
    tolerance: float,
    notes: list[str] | None = None,
    details: dict[str, Any] | None = None,
) -> IdentityReport:
    """Build a report that passes when every residual is within tolerance."""
    assert tolerance > 0, "Tolerance must be positive"
    passed = all(r <= tolerance for r in residuals)
    return IdentityReport(
        name=name,
        residuals=[float(r) for r in residuals],
        tolerance=tolerance,
        passed=passed,
        notes=list(notes or []),
        details=dict(details or {}),
    )


def _plain(value: Any) -> Any:
    """Convert numpy containers and scalars into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating | float):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    """Write a JSON report with stable key order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"
    )
    logger.info("Wrote %s", path)
    return path


def write_ladder_csv(
    path: Path, radii: list[float], fluxes: list[float]
) -> Path:
    """Write a (rho, flux) ladder table."""
    assert len(radii) == len(fluxes), "Radii and fluxes must align"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rho", "flux"])
        for rho, flux in zip(radii, fluxes, strict=True):
            writer.writerow([repr(float(rho)), repr(float(flux))])
    logger.info("Wrote %s", path)
    return path


def write_table_csv(
    path: Path, header: list[str], rows: list[list[Any]]
) -> Path:
    """Write a generic table, one list per row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("Wrote %s", path)
    return path
