"""Central-difference stencils for first derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class DifferenceScheme:
    """2m-point central difference: f'(0) ~ sum_l a_l f(l), l = -m..m."""

    m: int
    coefficients: dict  # l -> Fraction

    def __post_init__(self):
        a = self.coefficients
        if a.get(0, 0) != 0 or any(a[l] != -a[-l] for l in a):
            raise DomainError("coefficients must be antisymmetric with a_0 = 0")

    @property
    def offsets(self) -> np.ndarray:
        return np.array([l for l in sorted(self.coefficients) if self.coefficients[l] != 0])

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(self.coefficients[l]) for l in self.offsets])

    def positive(self):
        """(l, a_l) for l = 1..m."""
        return [(l, float(self.coefficients[l])) for l in range(1, self.m + 1)]


def central_diff_coefficients(m: int) -> DifferenceScheme:
    """Exact coefficients a_l = (-1)^(l+1) (m!)^2 / (l (m-l)! (m+l)!)."""
    if not 1 <= m <= 16:
        raise DomainError("m must be in [1, 16]")
    a = {0: Fraction(0)}
    for l in range(1, m + 1):
        v = Fraction((-1) ** (l + 1) * factorial(m) ** 2, l * factorial(m - l) * factorial(m + l))
        a[l], a[-l] = v, -v
    return DifferenceScheme(m, a)
