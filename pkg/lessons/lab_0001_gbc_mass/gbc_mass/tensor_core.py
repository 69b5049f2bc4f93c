"""
Generalized Kronecker deltas and antisymmetrized curvature contractions.

The Gauss-Bonnet curvature L_(q), the tensor P_(q) entering the GBC flux
and the Lovelock tensor G_(q) are all of the form

    delta^{upper}_{lower} * product of factors

summed over index strings. Because the delta vanishes unless ``lower`` is
a permutation of ``upper`` with distinct entries, the sum runs over
strictly increasing index subsets and the permutations of each subset only.
Factors that are antisymmetric in both index pairs (R_{ab}^{cd}, or the
B-pairings of the extrinsic module) allow a further reduction to perfect
matchings on the upper side and ordered pairs on the lower side.

The term tables depend only on the shape of the contraction, so they are
built once per (dim, pairs, free, tail) and cached.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .errors import ContractViolation, DomainError

logger = logging.getLogger(__name__)

SymmetryTag = Literal["none", "symmetric-2", "riemann-4"]

SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class MultiIndex:
    """
    An ordered string of tensor indices.

    Args:
        entries: Index values, each in [0, dim)
        dim: Dimension the indices range over

    Raises:
        ContractViolation: If an entry is out of range
    """

    entries: tuple[int, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(int(e) for e in self.entries))
        if self.dim <= 0:
            raise ContractViolation(f"dim must be positive, got {self.dim}")
        for e in self.entries:
            if not 0 <= e < self.dim:
                raise ContractViolation(
                    f"Index {e} out of range for dimension {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class DenseTensor:
    """
    Dense real components of a rank-r tensor over dimension n.

    The components array is stored read-only. ``signature`` records the
    index positions ('d' lower, 'u' upper), e.g. ``"dduu"`` for R_{ab}^{cd}.

    Args:
        dim: Dimension n
        rank: Number of indices
        components: Array of shape (n,) * rank
        symmetry_tag: Declared symmetry, validated on construction
        signature: Index positions, one letter per index

    Raises:
        ContractViolation: If the shape or declared symmetry does not hold
    """

    dim: int
    rank: int
    components: NDArray
    symmetry_tag: SymmetryTag = "none"
    signature: str = field(default="")

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        if self.dim <= 0 or self.rank < 0:
            raise ContractViolation("dim must be positive and rank >= 0")
        if comps.shape != (self.dim,) * self.rank:
            raise ContractViolation(
                f"Components shape {comps.shape} does not match "
                f"dim={self.dim}, rank={self.rank}"
            )
        signature = self.signature or "d" * self.rank
        if len(signature) != self.rank or set(signature) - {"u", "d"}:
            raise ContractViolation(f"Bad index signature {signature!r}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "signature", signature)

        residual = symmetry_residual(comps, self.symmetry_tag)
        if residual > SYMMETRY_RTOL:
            raise ContractViolation(
                f"Components violate {self.symmetry_tag} symmetry "
                f"(relative residual {residual:.3e})"
            )

    @classmethod
    def zeros(
        cls,
        dim: int,
        rank: int,
        symmetry_tag: SymmetryTag = "none",
        signature: str = "",
    ) -> "DenseTensor":
        return cls(
            dim, rank, np.zeros((dim,) * rank), symmetry_tag, signature
        )


def symmetry_residual(components: NDArray, tag: SymmetryTag) -> float:
    """
    Relative violation of a declared symmetry.

    Args:
        components: Tensor components
        tag: Symmetry to test

    Returns:
        max |violation| / max |component| (0.0 for a zero tensor)
    """
    if tag == "none":
        return 0.0
    scale = float(np.max(np.abs(components))) if components.size else 0.0
    if scale == 0.0:
        return 0.0
    if tag == "symmetric-2":
        if components.ndim != 2:
            raise ContractViolation("symmetric-2 requires a rank-2 tensor")
        worst = np.max(np.abs(components - components.T))
    else:
        if components.ndim != 4:
            raise ContractViolation("riemann-4 requires a rank-4 tensor")
        t = components
        worst = max(
            np.max(np.abs(t + t.transpose(1, 0, 2, 3))),
            np.max(np.abs(t + t.transpose(0, 1, 3, 2))),
            np.max(np.abs(t - t.transpose(2, 3, 0, 1))),
        )
    return float(worst) / scale


def permutation_sign(perm: tuple[int, ...]) -> int:
    """Sign of a permutation of 0..k-1 by inversion count."""
    inversions = sum(
        1
        for i in range(len(perm))
        for j in range(i + 1, len(perm))
        if perm[i] > perm[j]
    )
    return -1 if inversions % 2 else 1


def generalized_delta(
    upper: MultiIndex | tuple[int, ...] | list[int],
    lower: MultiIndex | tuple[int, ...] | list[int],
) -> int:
    """
    Evaluate the generalized Kronecker delta delta^{upper}_{lower}.

    Args:
        upper: Upper index string
        lower: Lower index string of the same length

    Returns:
        The sign of the permutation taking ``upper`` to ``lower``, or 0
        when ``upper`` repeats an index or ``lower`` is not a permutation
        of it

    Raises:
        ContractViolation: If the two strings differ in length or in
            declared dimension

    Examples:
        >>> generalized_delta((1, 2), (2, 1))
        -1
        >>> generalized_delta((1, 1), (1, 2))
        0
    """
    if isinstance(upper, MultiIndex) and isinstance(lower, MultiIndex):
        if upper.dim != lower.dim:
            raise ContractViolation("Upper and lower dimensions differ")
    up = upper.entries if isinstance(upper, MultiIndex) else tuple(upper)
    lo = lower.entries if isinstance(lower, MultiIndex) else tuple(lower)
    if len(up) != len(lo):
        raise ContractViolation(
            f"Arity mismatch: {len(up)} upper vs {len(lo)} lower indices"
        )
    if len(set(up)) != len(up) or sorted(up) != sorted(lo):
        return 0
    position = {value: k for k, value in enumerate(up)}
    return permutation_sign(tuple(position[v] for v in lo))


@dataclass(frozen=True)
class _DeltaTerms:
    """Flattened nonzero terms of one contraction shape."""

    upper: NDArray  # (terms, length) index values
    lower: NDArray  # (terms, length)
    weight: NDArray  # (terms,) sign times reduction multiplicity

    @property
    def size(self) -> int:
        return self.weight.shape[0]


def _matching_orders(length: int, start: int, pairs: int):
    """Upper orderings: pair slots hold perfect-matching representatives."""
    for perm in itertools.permutations(range(length)):
        firsts = [perm[start + 2 * k] for k in range(pairs)]
        if any(perm[start + 2 * k] > perm[start + 2 * k + 1] for k in range(pairs)):
            continue
        if firsts != sorted(firsts):
            continue
        yield perm


def _paired_orders(length: int, start: int, pairs: int):
    """Lower orderings: every pair slot increasing."""
    for perm in itertools.permutations(range(length)):
        if all(
            perm[start + 2 * k] < perm[start + 2 * k + 1] for k in range(pairs)
        ):
            yield perm


@lru_cache(maxsize=128)
def _delta_terms(dim: int, pairs: int, free: int, tail: bool) -> _DeltaTerms:
    """
    Build the term table for a contraction of a given shape.

    Slot layout is ``[free..., tail?, pair_1, ..., pair_m]``. Each term is
    one increasing subset of ``length`` distinct indices, one upper ordering
    and one lower ordering, weighted by the product of both permutation
    signs and the multiplicity removed by the reductions.
    """
    length = free + int(tail) + 2 * pairs
    if length > dim:
        empty = np.zeros((0, length), dtype=np.intp)
        return _DeltaTerms(empty, empty.copy(), np.zeros(0))

    start = free + int(tail)
    uppers = list(_matching_orders(length, start, pairs))
    lowers = list(_paired_orders(length, start, pairs))
    upper_perm = np.array(uppers, dtype=np.intp).reshape(-1, length)
    lower_perm = np.array(lowers, dtype=np.intp).reshape(-1, length)
    signs = np.outer(
        [permutation_sign(p) for p in uppers],
        [permutation_sign(p) for p in lowers],
    )
    multiplicity = 4**pairs * math.factorial(pairs)

    subsets = np.array(
        list(itertools.combinations(range(dim), length)), dtype=np.intp
    ).reshape(-1, length)
    n_sub, n_up, n_lo = subsets.shape[0], len(uppers), len(lowers)

    up = subsets[:, upper_perm]  # (n_sub, n_up, length)
    lo = subsets[:, lower_perm]  # (n_sub, n_lo, length)
    up = np.broadcast_to(up[:, :, None, :], (n_sub, n_up, n_lo, length))
    lo = np.broadcast_to(lo[:, None, :, :], (n_sub, n_up, n_lo, length))
    weight = np.broadcast_to(
        (multiplicity * signs)[None, :, :], (n_sub, n_up, n_lo)
    )
    logger.debug(
        "Built delta table dim=%d pairs=%d free=%d tail=%s: %d terms",
        dim,
        pairs,
        free,
        tail,
        weight.size,
    )
    return _DeltaTerms(
        np.ascontiguousarray(up.reshape(-1, length)),
        np.ascontiguousarray(lo.reshape(-1, length)),
        np.ascontiguousarray(weight.reshape(-1)).astype(float),
    )


def antisymmetrized_contraction(
    pair_factor: NDArray,
    pairs: int,
    free: int = 0,
    tail: NDArray | None = None,
) -> NDArray:
    """
    Contract ``pairs`` copies of a pair factor against a generalized delta.

    Computes

        out[u_1..u_f, l_1..l_f (, alpha)] =
            sum delta^{u_1..u_f t a_1 a_2 ..}_{l_1..l_f s b_1 b_2 ..}
                tail[t, s, alpha] * F[a_1, a_2, b_1, b_2] * ...

    where F must be antisymmetric in (a_1, a_2) and in (b_1, b_2) and
    invariant under the simultaneous swap of both pairs.

    Args:
        pair_factor: Array F of shape (n, n, n, n), upper slots first
        pairs: Number of F factors
        free: Number of uncontracted upper/lower index pairs (0, 1 or 2)
        tail: Optional factor V of shape (n, n, k) in the tail slot

    Returns:
        A scalar array for ``free == 0`` without tail, otherwise an array
        of shape (n,) * 2 * free (+ (k,) with a tail)
    """
    n = pair_factor.shape[0]
    assert pair_factor.shape == (n, n, n, n), "Pair factor must be rank 4"
    assert pairs >= 0 and free >= 0, "Counts must be non-negative"

    terms = _delta_terms(n, pairs, free, tail is not None)
    out_shape: tuple[int, ...] = (n,) * (2 * free)
    if tail is not None:
        out_shape += (tail.shape[2],)
    if terms.size == 0:
        return np.zeros(out_shape)

    up, lo = terms.upper, terms.lower
    start = free + (tail is not None)
    prod = terms.weight.copy()
    for k in range(pairs):
        a = start + 2 * k
        prod *= pair_factor[up[:, a], up[:, a + 1], lo[:, a], lo[:, a + 1]]

    if free == 0 and tail is None:
        return np.asarray(math.fsum(prod))

    flat = np.zeros(len(prod), dtype=np.intp)
    for k in range(free):
        flat = flat * n + up[:, k]
    for k in range(free):
        flat = flat * n + lo[:, k]
    bins = n ** (2 * free)

    if tail is None:
        return np.bincount(flat, weights=prod, minlength=bins).reshape(
            out_shape
        )
    vec = tail[up[:, free], lo[:, free], :]  # (terms, k)
    cols = [
        np.bincount(flat, weights=prod * vec[:, c], minlength=bins)
        for c in range(vec.shape[1])
    ]
    return np.stack(cols, axis=-1).reshape(out_shape)


def _check_order(dim: int, q: int, allow_zero: bool = False) -> None:
    if not isinstance(q, int | np.integer):
        raise ContractViolation(f"q must be an integer, got {q!r}")
    lowest = 0 if allow_zero else 1
    if q < lowest:
        raise DomainError(f"q must be >= {lowest}, got {q}")
    if 2 * q >= dim:
        raise DomainError(f"Order q={q} requires 2q < n, got n={dim}")


def _mixed(riemann_mixed: DenseTensor) -> NDArray:
    if riemann_mixed.rank != 4:
        raise ContractViolation("Riemann tensor must have rank 4")
    if riemann_mixed.signature != "dduu":
        raise ContractViolation(
            f"Unexpected Riemann signature {riemann_mixed.signature!r}"
        )
    # Slots of the pair factor are (upper, upper, lower, lower) of the
    # delta, i.e. the lower pair of R_{ab}^{cd} first.
    return np.asarray(riemann_mixed.components)


def gauss_bonnet_curvature(riemann_mixed: DenseTensor, q: int) -> float:
    """
    The q-th Gauss-Bonnet curvature L_(q).

    L_(q) = 2^-q delta^{a_1..a_2q}_{b_1..b_2q} prod R_{a a}^{b b}.
    L_(0) is 1 and L_(1) is the scalar curvature.

    Args:
        riemann_mixed: R_{ab}^{cd} at one point
        q: Order, 0 <= q with 2q < n

    Returns:
        The scalar L_(q)

    Raises:
        DomainError: If 2q >= n
    """
    _check_order(riemann_mixed.dim, q, allow_zero=True)
    if q == 0:
        return 1.0
    value = antisymmetrized_contraction(_mixed(riemann_mixed), pairs=q)
    return float(value) / 2**q


def p_tensor(
    riemann_mixed: DenseTensor, metric_inverse: DenseTensor, q: int
) -> DenseTensor:
    """
    The tensor P_(q)^{ijkl} of the GBC mass flux.

    P_(q)^{ijkl} = 2^-q delta^{ij a..}_{cd b..} prod R g^{ck} g^{dl}, with
    q-1 curvature factors. P_(1) = (g^{ik}g^{jl} - g^{il}g^{jk}) / 2.

    Args:
        riemann_mixed: R_{ab}^{cd} at one point
        metric_inverse: g^{ij} at the same point
        q: Order, 1 <= q with 2q < n

    Returns:
        A contravariant rank-4 tensor with Riemann symmetries
    """
    n = riemann_mixed.dim
    _check_order(n, q)
    ginv = np.asarray(metric_inverse.components)
    core = antisymmetrized_contraction(
        _mixed(riemann_mixed), pairs=q - 1, free=2
    )
    comps = np.einsum("ijcd,ck,dl->ijkl", core, ginv, ginv) / 2**q
    return DenseTensor(n, 4, comps, "riemann-4", signature="uuuu")


def lovelock_tensor(
    riemann_mixed: DenseTensor, metric: DenseTensor, q: int
) -> DenseTensor:
    """
    The q-th Lovelock tensor G_(q)ij.

    G_(q)ij = -2^-(q+1) g_ik delta^{k a_1..a_2q}_{j b_1..b_2q} prod R.
    G_(1) is the Einstein tensor and G_(0) = -g/2.

    Args:
        riemann_mixed: R_{ab}^{cd} at one point
        metric: g_ij at the same point
        q: Order, 0 <= q with 2q < n

    Returns:
        A symmetric covariant rank-2 tensor
    """
    n = riemann_mixed.dim
    _check_order(n, q, allow_zero=True)
    g = np.asarray(metric.components)
    if q == 0:
        return DenseTensor(n, 2, -0.5 * g, "symmetric-2")
    mixed = antisymmetrized_contraction(_mixed(riemann_mixed), pairs=q, free=1)
    comps = -(g @ mixed) / 2 ** (q + 1)
    return DenseTensor(n, 2, comps, "symmetric-2")


def riemann_contraction(upper: DenseTensor, lower: DenseTensor) -> float:
    """Full contraction T^{ijkl} S_{ijkl} of two rank-4 tensors."""
    assert upper.rank == 4 and lower.rank == 4, "Both tensors must be rank 4"
    return float(np.einsum("ijkl,ijkl->", upper.components, lower.components))
