"""
Numerical helpers shared by the agents: compensated sums, budget checks,
counter-based seeding, stratified sampling and an order-preserving
parallel map.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

from ulab.core.errors import BudgetExceededError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_BUDGET = 10**9
TWO_PI = 2.0 * math.pi


def default_budget() -> float:
    return float(os.environ.get("ULAB_BUDGET", DEFAULT_BUDGET))


def default_workers() -> int:
    return int(os.environ.get("ULAB_WORKERS", "1"))


def check_budget(what: str, needed: float, budget: Optional[float] = None) -> None:
    limit = default_budget() if budget is None else budget
    if needed > limit:
        raise BudgetExceededError(what, needed, limit)


def e(x):
    """e(x) = exp(2πix), elementwise."""
    return np.exp(2j * np.pi * np.asarray(x, dtype=float))


def compensated_sum(values) -> complex:
    """Correctly rounded sum of a real or complex sequence, independent of chunking."""
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        return complex(math.fsum(arr.real.ravel()), math.fsum(arr.imag.ravel()))
    return math.fsum(arr.ravel())


def stratum_rng(seed: int, stratum: int) -> np.random.Generator:
    # Philox is counter based: stratum i always sees the same stream whatever
    # the evaluation order.
    return np.random.Generator(np.random.Philox(key=seed, counter=[stratum, 0, 0, 0]))


def stratified_points(X: int, samples: int, seed: int) -> List[int]:
    """One seeded integer point in each of `samples` equal strata of [X, 2X)."""
    points = []
    for i in range(samples):
        lo = X + (i * X) // samples
        hi = X + ((i + 1) * X) // samples
        u = stratum_rng(seed, i).random()
        points.append(lo + int(math.floor(u * (hi - lo))) if hi > lo else lo)
    return points


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """map() that may fan out over threads but always returns results in input order."""
    items = list(items)
    n = default_workers() if workers is None else workers
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def mean_and_stderr(values: Sequence[float]) -> tuple:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    mean = math.fsum(arr) / arr.size
    if arr.size == 1:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def log_stratified_points(X: int, samples: int, seed: int) -> List[int]:
    """One seeded point per stratum of [1, X) equal in the measure dx/x."""
    if X < 2:
        return [1] * samples
    log_x = math.log(X)
    points = []
    for i in range(samples):
        u = stratum_rng(seed, i).random()
        x = int(math.floor(math.exp((i + u) / samples * log_x)))
        points.append(min(max(x, 1), X - 1))
    return points
