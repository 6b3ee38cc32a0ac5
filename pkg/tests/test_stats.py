import numpy as np
import pytest

from errors import DegenerateError
from services.stats import bonferroni, welch_test


def test_textbook_example():
    t, p = welch_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert t == pytest.approx(-1.0, abs=1e-12)
    assert p == pytest.approx(0.3466, abs=1e-3)


def test_identical_samples():
    t, p = welch_test([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert t == pytest.approx(0.0, abs=1e-12)
    assert p == pytest.approx(1.0)


def test_well_separated_samples():
    rng = np.random.default_rng(0)
    _, p = welch_test(rng.normal(0, 1, 10), rng.normal(10, 1, 10))
    assert p < 1e-6


def test_degenerate_inputs():
    with pytest.raises(DegenerateError):
        welch_test([1.0, 1.0, 1.0], [2.0, 2.0])
    with pytest.raises(DegenerateError):
        welch_test([1.0], [2.0, 3.0])


def test_bonferroni_is_capped():
    assert bonferroni(0.01, 3) == pytest.approx(0.03)
    assert bonferroni(0.5, 3) == 1.0
