"""Significance testing between experiment conditions."""

from typing import Sequence, Tuple

import numpy as np
from scipy.stats import ttest_ind

from errors import DegenerateError


def welch_test(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """
    Two-sided Welch t-test (unequal variances, Welch–Satterthwaite df).

    Returns:
        (t statistic, p-value)

    Raises:
        DegenerateError: a sample has fewer than 2 values, or both samples
            have zero variance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DegenerateError(f"Welch test needs >= 2 values per sample, got {a.size} and {b.size}")
    if np.var(a) == 0 and np.var(b) == 0:
        raise DegenerateError("both samples have zero variance")
    result = ttest_ind(a, b, equal_var=False)
    return float(result.statistic), float(result.pvalue)


def bonferroni(p_value: float, comparisons: int) -> float:
    return min(1.0, p_value * comparisons)
