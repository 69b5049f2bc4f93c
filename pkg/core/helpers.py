"""
Shared numerical helpers for all labs.
"""

from collections.abc import Sequence

import numpy as np


def validate_ladder(radii: Sequence[float], name: str = "radii") -> None:
    """
    Assert that a radial ladder is positive and strictly increasing.

    Args:
        radii: The ladder values
        name: The name of the ladder (for error messages)

    Raises:
        AssertionError: If the ladder is empty, non-positive or unsorted

    Examples:
        >>> validate_ladder([10.0, 20.0, 40.0])
        >>> validate_ladder([10.0, 5.0])
        Traceback (most recent call last):
        ...
        AssertionError: radii must be strictly increasing
    """
    assert len(radii) > 0, f"{name} cannot be empty"
    assert all(r > 0 for r in radii), f"{name} must be positive"
    assert all(
        b > a for a, b in zip(radii, radii[1:], strict=False)
    ), f"{name} must be strictly increasing"


def relative_residual(residual: float, scale: float) -> float:
    """
    Residual divided by a magnitude scale, with exact zeros preserved.

    Args:
        residual: Absolute residual (non-negative)
        scale: Magnitude of the quantities compared

    Returns:
        residual / scale, or the bare residual when scale is 0

    Examples:
        >>> relative_residual(2.0, 4.0)
        0.5
        >>> relative_residual(0.0, 0.0)
        0.0
    """
    assert residual >= 0, "Residual must be non-negative"
    assert scale >= 0, "Scale must be non-negative"
    if scale == 0.0:
        return residual
    return residual / scale


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Least-squares slope of log|y| against log x.

    Args:
        x: Positive abscissae (radii or step sizes)
        y: Values, none of them zero

    Returns:
        The fitted exponent s in |y| ~ C x^s

    Examples:
        >>> round(loglog_slope([1.0, 2.0, 4.0], [1.0, 4.0, 16.0]), 12)
        2.0
    """
    assert len(x) == len(y) and len(x) >= 2, "Need two or more points"
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
