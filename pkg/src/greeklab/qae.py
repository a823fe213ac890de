"""Amplitude-estimation primitives: the f <-> theta map, the ideal
phase-estimation output distribution, and the semi-classical (SQG)
finite-difference estimator built on top of them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DomainError, NormalizationError
from .market import PricingProblem
from .montecarlo import optimal_step, path_payoffs, simulate_paths

_TOL = 1e-12


def theta_of_f(f):
    """theta = arcsin(sqrt(f)) for f in [0, 1]."""
    f = np.asarray(f, dtype=float)
    if np.any(f < -_TOL) or np.any(f > 1 + _TOL):
        raise DomainError("f must lie in [0, 1]")
    return np.arcsin(np.sqrt(np.clip(f, 0.0, 1.0)))


def f_of_theta(theta):
    """f = sin(theta)^2 for theta in [0, pi/2]."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < -_TOL) or np.any(theta > np.pi / 2 + _TOL):
        raise DomainError("theta must lie in [0, pi/2]")
    return np.sin(theta) ** 2


@dataclass(frozen=True)
class AmplitudeEncoding:
    f_value: float
    theta: float

    @classmethod
    def from_f(cls, f: float) -> "AmplitudeEncoding":
        return cls(float(f), float(theta_of_f(f)))

    @classmethod
    def from_theta(cls, theta: float) -> "AmplitudeEncoding":
        return cls(float(f_of_theta(theta)), float(theta))


def phase_estimation_pmf(N: int, delta):
    """sin^2(N pi delta) / (N^2 sin^2(pi delta)), with value 1 at integer delta."""
    if N < 2:
        raise DomainError("N must be at least 2")
    d = np.asarray(delta, dtype=float)
    # distance to the nearest integer keeps the denominator well conditioned
    r = d - np.round(d)
    den = (N * np.sin(np.pi * r)) ** 2
    num = np.sin(N * np.pi * r) ** 2
    small = np.abs(r) < 1e-13
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1.0, num / np.where(small, 1.0, den))
    return out if out.ndim else float(out)


@dataclass
class PhaseDistribution:
    N: int
    probabilities: np.ndarray
    true_value: float

    def __post_init__(self):
        if abs(self.probabilities.sum() - 1.0) > 1e-10:
            raise DomainError("probabilities must sum to 1")

    def sample(self, shots: int, gen: np.random.Generator) -> np.ndarray:
        return gen.choice(self.N, size=shots, p=self.probabilities)


def phase_distribution(N: int, true_value: float) -> PhaseDistribution:
    """Distribution of the measured index when the phase register encodes
    ``true_value`` (in units of full turns, i.e. grid fraction)."""
    p = phase_estimation_pmf(N, np.arange(N) / N - true_value)
    return PhaseDistribution(N, p / p.sum(), float(true_value))


def qae_estimate_map(measured_index: int, N: int) -> float:
    """Map a measured index y to the amplitude estimate sin^2(pi y / N)."""
    if not 0 <= measured_index < N:
        raise DomainError("index out of range")
    return float(np.sin(np.pi * measured_index / N) ** 2)


def qae_distribution(f: float, N: int) -> np.ndarray:
    """Output distribution of canonical QAE for amplitude ``f``.

    The Grover operator has eigenphases +-theta/pi; the initial state has
    equal weight on both, so the readout is an even mixture of two
    phase-estimation peaks at y = +-N theta / pi (mod N).
    """
    th = float(theta_of_f(f)) / np.pi
    y = np.arange(N) / N
    p = 0.5 * (phase_estimation_pmf(N, y - th) + phase_estimation_pmf(N, y + th))
    return p / p.sum()


def grid_size(epsilon: float) -> int:
    """N = 2^ceil(log2(1/epsilon))."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    return int(2 ** int(np.ceil(np.log2(1.0 / epsilon) - 1e-12)))


def sqg_query_count(k: int, epsilon: float) -> int:
    """4k/epsilon with epsilon rounded to the grid: k Grover runs of N
    applications, 2 A-calls per application, 2x for the doubled oracle."""
    return 4 * k * grid_size(epsilon)


@dataclass
class SqgResult:
    greeks: np.ndarray  # problem units
    physical: np.ndarray
    query_count: int
    N: int
    h: float
    exact_expectations: np.ndarray  # E[difference quotient] before QAE
    shift: dict = field(default_factory=dict)
    measured_indices: np.ndarray | None = None


def sqg_greeks(problem: PricingProblem, epsilon: float, seed: int = 0, h: float | None = None,
               paths: int = 200_000, bound: float | None = None) -> SqgResult:
    """Semi-classical quantum gradient: QAE on the pathwise difference quotient.

    For each axis the per-path quotient q = (f(x+h/2) - f(x-h/2)) / h is
    mapped affinely into [0, 1] with a = (q + B) / (2B), where B bounds |q|.
    Since 0 <= f <= 1 pathwise, B = 1/h is always valid and is the default.
    E[a] is the amplitude handed to the emulated QAE (computed here with
    ``paths`` common-random-number paths); one QAE measurement is sampled
    and mapped back through sin^2 and the inverse shift.
    """
    N = grid_size(epsilon)
    h = optimal_step(epsilon, 2) if h is None else float(h)
    B = 1.0 / h if bound is None else float(bound)
    norm = problem.scale_factor / problem.payoff_cap
    batch = simulate_paths(problem.model, paths, seed, "sqg-paths")
    gen = rng.generator(seed, "sqg-qae")
    k = problem.k
    exact = np.zeros(k)
    est = np.zeros(k)
    idx = np.zeros(k, dtype=int)
    for i in range(k):
        off = np.zeros((2, k))
        off[0, i], off[1, i] = h / 2, -h / 2
        pay = norm * path_payoffs(problem, batch, off)
        q = (pay[0] - pay[1]) / h
        a = (q + B) / (2 * B)
        if a.min() < -1e-12 or a.max() > 1 + 1e-12:
            raise NormalizationError("difference amplitude leaves [0, 1]; increase the shift bound")
        exact[i] = q.mean()
        p = qae_distribution(float(np.clip(a.mean(), 0, 1)), N)
        idx[i] = gen.choice(N, p=p)
        est[i] = qae_estimate_map(int(idx[i]), N) * 2 * B - B
    return SqgResult(est, est * problem.to_physical, sqg_query_count(k, 1.0 / N), N, h, exact,
                     shift={"scale": 2 * B, "offset": -B}, measured_indices=idx)
