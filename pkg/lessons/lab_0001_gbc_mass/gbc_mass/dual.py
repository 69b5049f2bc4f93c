"""
Forward-mode dual numbers truncated at second or third order.

A ``Jet`` carries the value of a scalar expression together with its
gradient and Hessian (and optionally the third derivative tensor) with
respect to ``n`` seed variables. Model code is written once against plain
arithmetic and evaluated on jets to obtain exact partial derivatives, so
the curvature pipeline never has to tune finite-difference steps.

Examples:
    >>> x, y = variables([1.0, 2.0])
    >>> f = x * x * y
    >>> f.value, f.grad.tolist()
    (2.0, [4.0, 1.0])
"""

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation


def _sym3(hess: NDArray, grad: NDArray) -> NDArray:
    """Return H_ij g_k + H_ik g_j + H_jk g_i."""
    t = np.multiply.outer(hess, grad)
    return t + t.transpose(0, 2, 1) + t.transpose(2, 1, 0)


class Jet:
    """
    A truncated multivariate Taylor expansion of a scalar.

    Args:
        value: The scalar value
        grad: First partial derivatives, shape (n,)
        hess: Second partial derivatives, shape (n, n)
        third: Third partial derivatives, shape (n, n, n), or None when
            the jet is truncated at second order
    """

    __slots__ = ("value", "grad", "hess", "third")
    __array_ufunc__ = None

    def __init__(
        self,
        value: float,
        grad: NDArray,
        hess: NDArray,
        third: NDArray | None = None,
    ):
        self.value = float(value)
        self.grad = grad
        self.hess = hess
        self.third = third

    @property
    def dim(self) -> int:
        """Number of seed variables."""
        return self.grad.shape[0]

    @property
    def order(self) -> int:
        """Highest derivative order carried."""
        return 2 if self.third is None else 3

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, order={self.order}, dim={self.dim})"

    # -- composition -------------------------------------------------------

    def _compose(self, f0: float, f1: float, f2: float, f3: float) -> "Jet":
        """Apply a scalar function given its value and three derivatives."""
        g = self.grad
        grad = f1 * g
        hess = f1 * self.hess + f2 * np.multiply.outer(g, g)
        third = None
        if self.third is not None:
            third = (
                f1 * self.third
                + f2 * _sym3(self.hess, g)
                + f3 * np.multiply.outer(np.multiply.outer(g, g), g)
            )
        return Jet(f0, grad, hess, third)

    def _check_partner(self, other: "Jet") -> None:
        if other.dim != self.dim:
            raise ContractViolation(
                f"Jets over {self.dim} and {other.dim} variables cannot mix"
            )

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            self._check_partner(other)
            third = None
            if self.third is not None and other.third is not None:
                third = self.third + other.third
            return Jet(
                self.value + other.value,
                self.grad + other.grad,
                self.hess + other.hess,
                third,
            )
        return Jet(self.value + float(other), self.grad, self.hess, self.third)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        third = None if self.third is None else -self.third
        return Jet(-self.value, -self.grad, -self.hess, third)

    def __pos__(self) -> "Jet":
        return self

    def __sub__(self, other: Any) -> "Jet":
        return self + (-other)

    def __rsub__(self, other: Any) -> "Jet":
        return (-self) + other

    def __mul__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            self._check_partner(other)
            a, b = self.value, other.value
            ga, gb = self.grad, other.grad
            cross = np.multiply.outer(ga, gb)
            third = None
            if self.third is not None and other.third is not None:
                third = (
                    a * other.third
                    + b * self.third
                    + _sym3(self.hess, gb)
                    + _sym3(other.hess, ga)
                )
            return Jet(
                a * b,
                a * gb + b * ga,
                a * other.hess + b * self.hess + cross + cross.T,
                third,
            )
        c = float(other)
        third = None if self.third is None else c * self.third
        return Jet(self.value * c, c * self.grad, c * self.hess, third)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        """Return 1/self."""
        t = self.value
        if t == 0.0:
            raise ZeroDivisionError("Jet reciprocal of zero")
        return self._compose(1.0 / t, -1.0 / t**2, 2.0 / t**3, -6.0 / t**4)

    def __truediv__(self, other: Any) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / float(other))

    def __rtruediv__(self, other: Any) -> "Jet":
        return self.reciprocal() * float(other)

    def __pow__(self, power: Any) -> "Jet":
        if isinstance(power, Jet):
            return exp(log(self) * power)
        if isinstance(power, int) and 0 <= power <= 3:
            result: Jet | float = 1.0
            for _ in range(power):
                result = self * result
            if isinstance(result, float):
                return self._compose(1.0, 0.0, 0.0, 0.0)
            return result
        p = float(power)
        t = self.value
        return self._compose(
            t**p,
            p * t ** (p - 1.0),
            p * (p - 1.0) * t ** (p - 2.0),
            p * (p - 1.0) * (p - 2.0) * t ** (p - 3.0),
        )

    def __rpow__(self, base: Any) -> "Jet":
        return exp(self * math.log(float(base)))

    # -- comparisons act on the value only ---------------------------------

    def __lt__(self, other: Any) -> bool:
        return self.value < value_of(other)

    def __le__(self, other: Any) -> bool:
        return self.value <= value_of(other)

    def __gt__(self, other: Any) -> bool:
        return self.value > value_of(other)

    def __ge__(self, other: Any) -> bool:
        return self.value >= value_of(other)


Scalar = Jet | float


def value_of(x: Any) -> float:
    """Return the plain value of a jet or number."""
    return x.value if isinstance(x, Jet) else float(x)


def variables(point: Sequence[float] | NDArray, order: int = 2) -> list[Jet]:
    """
    Seed one jet per coordinate of ``point``.

    Args:
        point: Coordinates at which derivatives are taken
        order: 2 for value/gradient/Hessian, 3 to also carry third
            derivatives

    Returns:
        A list of jets ``x_i`` with unit gradient along axis i

    Raises:
        ContractViolation: If order is not 2 or 3
    """
    if order not in (2, 3):
        raise ContractViolation(f"Jet order must be 2 or 3, got {order}")
    point = np.asarray(point, dtype=float)
    assert point.ndim == 1, "Point must be a 1-d coordinate vector"

    n = point.shape[0]
    eye = np.eye(n)
    zeros2 = np.zeros((n, n))
    jets = []
    for i in range(n):
        third = np.zeros((n, n, n)) if order == 3 else None
        jets.append(Jet(point[i], eye[i].copy(), zeros2.copy(), third))
    return jets


def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, Jet):
        t = x.value
        if t <= 0.0:
            raise ValueError(f"Jet sqrt requires a positive value, got {t}")
        s = math.sqrt(t)
        return x._compose(
            s, 0.5 / s, -0.25 / (s * t), 0.375 / (s * t * t)
        )
    return math.sqrt(x)


def exp(x: Scalar) -> Scalar:
    if isinstance(x, Jet):
        e = math.exp(x.value)
        return x._compose(e, e, e, e)
    return math.exp(x)


def log(x: Scalar) -> Scalar:
    if isinstance(x, Jet):
        t = x.value
        return x._compose(math.log(t), 1.0 / t, -1.0 / t**2, 2.0 / t**3)
    return math.log(x)


def sin(x: Scalar) -> Scalar:
    if isinstance(x, Jet):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._compose(s, c, -s, -c)
    return math.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, Jet):
        s, c = math.sin(x.value), math.cos(x.value)
        return x._compose(c, -s, -c, s)
    return math.cos(x)


def unpack(
    entries: Sequence[Any], dim: int, order: int = 2
) -> tuple[NDArray, NDArray, NDArray, NDArray | None]:
    """
    Split a flat sequence of jets or numbers into derivative arrays.

    Plain numbers are treated as constants.

    Args:
        entries: Jets or floats, in the order the caller wants them
        dim: Number of seed variables
        order: Derivative order to extract (2 or 3)

    Returns:
        (values, grads, hessians, thirds) with a leading axis of length
        ``len(entries)``; thirds is None when order is 2
    """
    count = len(entries)
    values = np.zeros(count)
    grads = np.zeros((count, dim))
    hessians = np.zeros((count, dim, dim))
    thirds = np.zeros((count, dim, dim, dim)) if order == 3 else None
    for k, entry in enumerate(entries):
        if isinstance(entry, Jet):
            if entry.dim != dim:
                raise ContractViolation(
                    f"Expected jets over {dim} variables, got {entry.dim}"
                )
            values[k] = entry.value
            grads[k] = entry.grad
            hessians[k] = entry.hess
            if thirds is not None:
                if entry.third is None:
                    raise ContractViolation(
                        "Third derivatives requested from an order-2 jet"
                    )
                thirds[k] = entry.third
        else:
            values[k] = float(entry)
    return values, grads, hessians, thirds
