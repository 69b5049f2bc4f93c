"""
Quadrature rules for coordinate spheres and radial intervals.

Sphere rule: hyperspherical angles phi_1..phi_{n-2} in [0, pi] and an
azimuth phi_{n-1} in [0, 2 pi). The surface element is
prod_k sin(phi_k)^(n-1-k) dphi_k. Each polar angle uses Gauss-Jacobi
nodes in t = cos(phi) for the weight (1 - t^2)^((j-1)/2) (plain
Gauss-Legendre when j = 1); the azimuth uses the uniform rule. With N
nodes per polar angle and 2N azimuthal nodes the product rule integrates
every polynomial of degree <= 2N - 1 exactly.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import gamma, roots_jacobi

from .errors import ContractViolation

WEIGHT_SUM_RTOL = 1e-12


def sphere_area(dim: int) -> float:
    """
    Surface measure omega_{n-1} = 2 pi^(n/2) / Gamma(n/2) of S^(n-1).

    Args:
        dim: Ambient dimension n of the unit sphere S^(n-1) in R^n

    Examples:
        >>> round(sphere_area(3), 12) == round(4 * math.pi, 12)
        True
    """
    assert dim >= 1, "Dimension must be positive"
    return float(2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0))


def _polar_rule(points: int, power: int) -> tuple[NDArray, NDArray]:
    """Nodes t = cos(phi) and weights for the weight sin(phi)^power."""
    alpha = (power - 1) / 2.0
    if alpha == 0.0:
        return np.polynomial.legendre.leggauss(points)
    nodes, weights = roots_jacobi(points, alpha, alpha)
    return np.asarray(nodes), np.asarray(weights)


@dataclass(frozen=True)
class SphereQuadrature:
    """
    A product rule on the coordinate sphere of radius ``radius`` in R^n.

    Nodes are unit directions; ``points`` and ``scaled_weights`` give the
    rule on the sphere of the stored radius.

    Args:
        dim: Ambient dimension n
        nodes: Unit directions, shape (N, n)
        weights: Positive weights on the unit sphere, summing to
            omega_{n-1}
        exactness: Highest polynomial degree integrated exactly
        radius: Sphere radius
    """

    dim: int
    nodes: NDArray
    weights: NDArray
    exactness: int
    radius: float = 1.0

    def __post_init__(self):
        assert self.nodes.shape == (len(self.weights), self.dim), (
            "Nodes must be (N, dim)"
        )
        assert np.all(self.weights > 0), "Weights must be positive"
        expected = sphere_area(self.dim)
        total = math.fsum(self.weights.tolist())
        assert abs(total - expected) <= WEIGHT_SUM_RTOL * expected * 10, (
            f"Weights sum to {total}, expected {expected}"
        )

    @classmethod
    def gauss_product(
        cls, dim: int, nodes_per_angle: int, radius: float = 1.0
    ) -> "SphereQuadrature":
        """
        Build the product rule with ``nodes_per_angle`` polar nodes.

        Args:
            dim: Ambient dimension n >= 2
            nodes_per_angle: Polar node count N (azimuth gets 2N)
            radius: Sphere radius

        Returns:
            A rule exact up to degree 2N - 1

        Examples:
            >>> quad = SphereQuadrature.gauss_product(3, 4)
            >>> len(quad.weights)
            32
        """
        if dim < 2:
            raise ContractViolation(f"Sphere rule needs dim >= 2, got {dim}")
        if nodes_per_angle < 1:
            raise ContractViolation("nodes_per_angle must be positive")

        polar = [
            _polar_rule(nodes_per_angle, dim - 1 - k)
            for k in range(1, dim - 1)
        ]
        count = 2 * nodes_per_angle
        azimuth = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        azimuth_weight = 2.0 * math.pi / count

        directions = []
        weights = []
        for combo in itertools.product(
            *(range(nodes_per_angle) for _ in polar), range(count)
        ):
            x = np.empty(dim)
            w = azimuth_weight
            sin_prod = 1.0
            for k, idx in enumerate(combo[:-1]):
                t, wt = polar[k][0][idx], polar[k][1][idx]
                x[k] = sin_prod * t
                sin_prod *= math.sqrt(max(0.0, 1.0 - t * t))
                w *= wt
            phi = azimuth[combo[-1]]
            x[dim - 2] = sin_prod * math.cos(phi)
            x[dim - 1] = sin_prod * math.sin(phi)
            directions.append(x)
            weights.append(w)
        return cls(
            dim=dim,
            nodes=np.array(directions),
            weights=np.array(weights),
            exactness=2 * nodes_per_angle - 1,
            radius=radius,
        )

    def at_radius(self, radius: float) -> "SphereQuadrature":
        """The same rule on the sphere of another radius."""
        assert radius > 0, "Radius must be positive"
        return SphereQuadrature(
            self.dim, self.nodes, self.weights, self.exactness, radius
        )

    @property
    def points(self) -> NDArray:
        return self.radius * self.nodes

    @property
    def scaled_weights(self) -> NDArray:
        """Weights for the Euclidean surface measure at ``radius``."""
        return self.weights * self.radius ** (self.dim - 1)

    def integrate(self, values: NDArray) -> float:
        """Compensated quadrature sum over the sphere of ``radius``."""
        values = np.asarray(values, dtype=float)
        assert values.shape == self.weights.shape, "One value per node"
        return math.fsum((self.scaled_weights * values).tolist())


@dataclass(frozen=True)
class RadialQuadrature:
    """
    Composite Gauss-Legendre rule over geometric shells of [inner, outer].

    Args:
        nodes: Radial nodes, increasing
        weights: Matching weights
        edges: Shell boundaries, increasing, from inner to outer
    """

    nodes: NDArray
    weights: NDArray
    edges: NDArray

    @classmethod
    def geometric(
        cls,
        inner: float,
        outer: float,
        shells: int,
        nodes_per_shell: int,
    ) -> "RadialQuadrature":
        """
        Shells with geometrically growing width.

        An ``inner`` radius of 0 gets a first shell [0, outer / 2^(shells-1)]
        followed by doubling shells.

        Examples:
            >>> rule = RadialQuadrature.geometric(1.0, 8.0, 3, 4)
            >>> rule.edges.tolist()
            [1.0, 2.0, 4.0, 8.0]
        """
        if not 0 <= inner < outer:
            raise ContractViolation("Radial interval must satisfy 0 <= inner < outer")
        if shells < 1 or nodes_per_shell < 1:
            raise ContractViolation("Shell and node counts must be positive")
        if inner == 0.0:
            first = outer / 2 ** (shells - 1)
            edges = np.concatenate(
                [[0.0], first * 2.0 ** np.arange(shells)]
            )
        else:
            edges = np.geomspace(inner, outer, shells + 1)
        edges[-1] = outer

        t, w = np.polynomial.legendre.leggauss(nodes_per_shell)
        nodes, weights = [], []
        for a, b in itertools.pairwise(edges):
            nodes.append(0.5 * (b - a) * t + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
        return cls(np.concatenate(nodes), np.concatenate(weights), edges)

    def integrate(self, values: NDArray) -> float:
        values = np.asarray(values, dtype=float)
        assert values.shape == self.weights.shape, "One value per node"
        return math.fsum((self.weights * values).tolist())
