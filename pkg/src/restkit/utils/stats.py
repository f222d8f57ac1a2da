import math
from typing import Sequence

import numpy as np


def percentile_interval(
    samples: Sequence[float] | np.ndarray, level: float = 0.95
) -> tuple[float, float]:
    """Equal-tailed percentile interval of bootstrap samples."""
    assert 0.0 < level < 1.0, f"ERROR: Invalid confidence level {level}"
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(np.asarray(samples, dtype=np.float64), [tail, 100.0 - tail])
    return float(low), float(high)


def standard_error(samples: Sequence[float] | np.ndarray) -> float:
    values = np.asarray(samples, dtype=np.float64)
    if values.size < 2:
        return math.inf
    return float(values.std(ddof=1) / math.sqrt(values.size))


def least_squares_slope(values: Sequence[float]) -> float:
    """Slope of the least-squares line through (i, values[i])."""
    y = np.asarray(values, dtype=np.float64)
    assert y.size >= 2, "ERROR: Need at least two points for a slope"
    x = np.arange(y.size, dtype=np.float64)
    x -= x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def tail_mean(values: Sequence[float], fraction: float = 0.1) -> float:
    """Mean of the last fraction of values (at least one)."""
    count = max(1, int(len(values) * fraction))
    return float(np.mean(np.asarray(values[-count:], dtype=np.float64)))
