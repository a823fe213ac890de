"""Several expectations read out at once as the gradient of a function that is
linear in a weight vector c.

With f(c) = E[sum_i c_i f_i(S)] / D the gradient is (E[f_1], ..., E[f_k]) / D,
so a single gradient-estimation run returns all k expectation values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng
from .errors import AliasingError, DomainError, NormalizationError
from .gaw import GridSpec, gaw_query_count, marginals_of, phase_array, tensor_from_phase
from .market import PricingProblem, basket_problem
from .montecarlo import asset_paths, simulate_paths
from .stencil import central_diff_coefficients
from .surface import PriceField

_M1 = central_diff_coefficients(1)


@dataclass
class MultiObjective:
    """Per-path objective values (k, M), each in [0, 1], and the normalization D.

    ``values`` holds one row per objective on a common set of paths; the
    expectation of objective i is ``values[i].mean()``.
    """

    values: np.ndarray
    D: float = 1.0
    names: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.size == 0:
            raise DomainError("need at least one objective")
        if v.min() < 0 or v.max() > 1:
            raise NormalizationError("objective values must lie in [0, 1] pathwise")
        if self.D <= 0:
            raise DomainError("D must be positive")
        self.values = v
        if not self.names:
            self.names = tuple(f"f{i + 1}" for i in range(v.shape[0]))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def paths(self) -> int:
        return self.values.shape[1]

    def expectations(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def standard_errors(self) -> np.ndarray:
        M = self.paths
        return self.values.std(axis=1, ddof=1) / np.sqrt(M) if M > 1 else np.zeros(self.k)

    def check_normalization(self, half_width: float):
        """sum_i c_i f_i / D must stay in [-1, 1] for every |c_i| <= half_width."""
        worst = half_width * self.values.sum(axis=0).max() / self.D
        if worst > 1 + 1e-12:
            raise NormalizationError(f"|sum c_i f_i| / D reaches {worst:.4g} on the c-grid; raise D"
                                     f" to at least {self.D * worst:.4g}")


def constant_objectives(constants: Sequence[float], D: float = 1.0) -> MultiObjective:
    return MultiObjective(np.asarray(constants, dtype=float)[:, None], D)


def grid_half_width(grid: GridSpec) -> float:
    return float(np.max(np.abs(grid.offsets)))


def linear_readout_function(mo: MultiObjective, c, half_width: float | None = None) -> float:
    """f(c) = mean over paths of sum_i c_i f_i, divided by D.

    ``half_width`` is the c-grid extent to check the normalization against;
    by default the largest |c_i| of the argument itself.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (mo.k,):
        raise DomainError(f"c must have length {mo.k}")
    mo.check_normalization(float(np.max(np.abs(c))) if half_width is None else half_width)
    return float(c @ mo.values.mean(axis=1) / mo.D)


class LinearField(PriceField):
    """f(c) = c . mu / D on the c-grid (exactly linear, so any m works)."""

    def __init__(self, mu, D: float = 1.0):
        self.mu = np.asarray(mu, dtype=float)
        self.D = float(D)
        self.problem = None
        self.meta = {"method": "linear", "D": self.D}

    def values(self, offsets) -> np.ndarray:
        return np.atleast_2d(offsets) @ self.mu / self.D

    def grid(self, coords) -> np.ndarray:
        out = 0.0
        for ax, x in enumerate(coords):
            shape = [1] * len(coords)
            shape[ax] = len(x)
            out = out + np.reshape(np.asarray(x) * self.mu[ax] / self.D, shape)
        return np.broadcast_to(out, tuple(len(x) for x in coords)).copy()


@dataclass
class MultiObjResult:
    estimates: np.ndarray  # D * h / N, unsigned readout
    expectations: np.ndarray  # per-objective MC values
    standard_errors: np.ndarray
    marginals: list
    query_count: int
    N: int
    D: float
    params: dict = field(default_factory=dict)

    @property
    def resolution(self) -> float:
        return self.D / self.N


def multiobj_phase(mo: MultiObjective, grid: GridSpec) -> np.ndarray:
    return phase_array(LinearField(mo.expectations(), mo.D), grid, _M1)


def multiobj_gradient_readout(mo: MultiObjective, n: int, seed: int = 0, eps_phase: float = 0.0,
                              seeds: int = 1, allow_large: bool = False) -> MultiObjResult:
    """All k expectations from one m=1 gradient run on the c-grid of edge 1.

    The readout is taken unsigned (index h over N in [0, 1)): every E[f_i]/D
    is nonnegative, so this doubles the usable range compared with the
    signed gradient readout. Values within one grid step of 1 would wrap.
    """
    grid = GridSpec(mo.k, n, 1.0)
    grid.check_memory(allow_large)
    mo.check_normalization(grid_half_width(grid))
    mu = mo.expectations()
    if np.any(mu / mo.D >= 1 - 1.0 / grid.N):
        raise AliasingError(f"E[f_i]/D = {np.max(mu / mo.D):.4g} wraps around the unsigned readout;"
                            " raise D")
    phase = multiobj_phase(mo, grid)
    noise_seeds = [int(rng.stream_key(seed, f"noise-seed-{i}") >> 1) for i in range(seeds)]
    margs = None
    for s in noise_seeds:
        amp = np.fft.fftn(tensor_from_phase(phase, eps_phase, s), norm="ortho")
        probs = amp.real**2 + amp.imag**2
        m = marginals_of(probs / probs.sum())
        margs = m if margs is None else [a + b for a, b in zip(margs, m)]
    margs = [p / len(noise_seeds) for p in margs]
    est = np.array([np.argmax(p) / grid.N for p in margs]) * mo.D
    return MultiObjResult(est, mu, mo.standard_errors(), margs, gaw_query_count(_M1, grid, max(eps_phase, 1e-4)),
                          grid.N, mo.D, {"n": n, "l": 1.0, "m": 1, "eps_phase": eps_phase,
                                         "seeds": noise_seeds, "names": list(mo.names)})


# -- basket objectives ---------------------------------------------------------

BasketObjective = Callable[[np.ndarray, PricingProblem], np.ndarray]


def _basket_values(S, problem):
    return S.transpose(0, 2, 1) @ np.asarray(problem.payoff.weights)  # (M, T)


def knock_in_indicator(S, problem):
    return (_basket_values(S, problem).max(axis=1) > problem.payoff.barrier).astype(float)


def normalized_payoff(S, problem):
    b = _basket_values(S, problem)
    pay = problem.payoff
    disc = np.exp(-problem.model.rate * problem.model.maturity)
    g = disc * np.where(b.max(axis=1) > pay.barrier, np.maximum(b[:, -1] - pay.strike, 0.0), 0.0)
    return np.minimum(g / problem.payoff_cap, 1.0)


def normalized_terminal_basket(S, problem, cap: float | None = None):
    cap = 2 * problem.payoff.barrier if cap is None else cap
    return np.minimum(_basket_values(S, problem)[:, -1] / cap, 1.0)


BASKET_OBJECTIVES = {"knock_in": knock_in_indicator, "payoff": normalized_payoff,
                     "terminal_basket": normalized_terminal_basket}


def basket_objectives(paths: int = 100_000, seed: int = 0, D: float | None = None,
                      problem: PricingProblem | None = None, n: int = 6) -> MultiObjective:
    """Knock-in indicator, capped payoff / cap and terminal basket / (2 barrier).

    ``D`` defaults to the smallest value meeting the normalization on the
    c-grid of 2^n points.
    """
    problem = basket_problem() if problem is None else problem
    m = problem.model
    batch = simulate_paths(m, paths, seed, "multiobj-paths")
    S = asset_paths(batch, m.spots, m.vols, m.rate, m.maturity)
    vals = np.vstack([fn(S, problem) for fn in BASKET_OBJECTIVES.values()])
    if D is None:
        hw = grid_half_width(GridSpec(len(vals), n, 1.0))
        D = max(1.0, hw * float(vals.sum(axis=0).max()))
    return MultiObjective(vals, D, tuple(BASKET_OBJECTIVES), {"paths": paths, "seed": seed})
