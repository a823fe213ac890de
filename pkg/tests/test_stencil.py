from fractions import Fraction

import numpy as np
import pytest

from greeklab.errors import DomainError
from greeklab.stencil import DifferenceScheme, central_diff_coefficients


@pytest.mark.parametrize("m,expected", [
    (1, {1: Fraction(1, 2)}),
    (2, {1: Fraction(2, 3), 2: Fraction(-1, 12)}),
    (3, {1: Fraction(3, 4), 2: Fraction(-3, 20), 3: Fraction(1, 60)}),
    (4, {1: Fraction(4, 5), 2: Fraction(-1, 5), 3: Fraction(4, 105), 4: Fraction(-1, 280)}),
])
def test_known_coefficients(m, expected):
    s = central_diff_coefficients(m)
    for l, a in expected.items():
        assert s.coefficients[l] == a and s.coefficients[-l] == -a


@pytest.mark.parametrize("m", range(1, 17))
def test_moment_conditions(m):
    # exact for polynomials up to degree 2m: sum a_l l^j = [j == 1]
    a = central_diff_coefficients(m).coefficients
    for j in range(0, 2 * m + 1):
        assert sum(c * Fraction(l) ** j for l, c in a.items()) == (1 if j == 1 else 0)


@pytest.mark.parametrize("m", [1, 3, 5])
def test_order_of_accuracy(m):
    s = central_diff_coefficients(m)
    errs = []
    for h in (0.2, 0.1):
        est = sum(w * np.sin(0.3 + l * h) for l, w in zip(s.offsets, s.weights)) / h
        errs.append(abs(est - np.cos(0.3)))
    assert errs[0] / errs[1] == pytest.approx(2 ** (2 * m), rel=0.2)


def test_domain():
    with pytest.raises(DomainError):
        central_diff_coefficients(0)
    with pytest.raises(DomainError):
        central_diff_coefficients(17)
    with pytest.raises(DomainError):
        DifferenceScheme(1, {0: Fraction(0), 1: Fraction(1, 2), -1: Fraction(1, 2)})


def test_positive_half():
    assert central_diff_coefficients(2).positive() == [(1, 2 / 3), (2, -1 / 12)]
