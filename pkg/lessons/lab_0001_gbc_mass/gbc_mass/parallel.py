"""Order-preserving worker pool used for quadrature-node evaluation."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from math import fsum
from typing import TypeVar

import numpy as np
from numpy.typing import NDArray

T = TypeVar("T")
R = TypeVar("R")


def map_points(
    func: Callable[[T], R], items: Iterable[T], threads: int = 1
) -> list[R]:
    """
    Apply ``func`` to every item, optionally on a thread pool.

    Results come back in input order, so any reduction over them is
    independent of the thread count.

    Args:
        func: Pure function of one item
        items: Inputs
        threads: Worker count; 1 runs inline

    Returns:
        ``[func(item) for item in items]``
    """
    assert threads >= 1, "Thread count must be at least 1"
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def weighted_sum(weights: NDArray, values: Iterable[float]) -> float:
    """Compensated sum of weight * value."""
    products = np.asarray(weights, dtype=float) * np.asarray(
        list(values), dtype=float
    )
    return fsum(products.tolist())
