"""Price fields: vectorized evaluation of the normalized price f over point
sets and over the separable grids used by the gradient emulators."""
from __future__ import annotations

import itertools
import time

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import DomainError
from .market import PricingProblem, bs_price, check_unit_interval, market_points


class PriceField:
    """Normalized price f(x0 + offset) for a problem."""

    problem: PricingProblem
    meta: dict

    def values(self, offsets) -> np.ndarray:
        raise NotImplementedError

    def grid(self, coords) -> np.ndarray:
        """f on the tensor grid ``coords[0] x coords[1] x ...`` (one 1-D
        array of offsets per axis)."""
        mesh = np.meshgrid(*coords, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return self.values(pts).reshape(mesh[0].shape)

    def gradient(self, h: float = 1e-5) -> np.ndarray:
        """Central-difference gradient of the field at the center."""
        k = self.problem.k
        off = np.vstack([np.eye(k) * h / 2, -np.eye(k) * h / 2])
        v = self.values(off)
        return (v[:k] - v[k:]) / h


class ClosedFormField(PriceField):
    """Black-Scholes prices of a single-asset call."""

    def __init__(self, problem: PricingProblem):
        if not problem.is_closed_form:
            raise DomainError("closed form needs a single-asset vanilla call")
        self.problem = problem
        self.meta = {"method": "closed-form"}

    def values(self, offsets) -> np.ndarray:
        p = self.problem
        pts = market_points(p, offsets)
        price = bs_price(pts.spots[:, 0], p.payoff.strike, pts.rate, pts.vols[:, 0], pts.maturity)
        f = p.scale_factor * price / p.payoff_cap
        check_unit_interval(f)
        return f

    def grid(self, coords) -> np.ndarray:
        # slab over the first axis to bound the temporary arrays
        shape = tuple(len(c) for c in coords)
        out = np.empty(shape)
        rest = np.meshgrid(*coords[1:], indexing="ij") if len(coords) > 1 else []
        rest = [r.ravel() for r in rest]
        for j, x in enumerate(coords[0]):
            pts = np.column_stack([np.full(rest[0].size if rest else 1, x)] + rest)
            out[j] = self.values(pts).reshape(shape[1:])
        return out


class MonteCarloField(PriceField):
    """Direct MC prices on common random numbers (one full run per point)."""

    def __init__(self, problem: PricingProblem, paths: int | None = None, seed: int | None = None):
        self.problem = problem
        self.paths = problem.mc_paths if paths is None else int(paths)
        self.seed = problem.seed if seed is None else int(seed)
        self.meta = {"method": "monte-carlo", "paths": self.paths, "seed": self.seed}

    def values(self, offsets) -> np.ndarray:
        from .montecarlo import mc_prices
        p = self.problem
        price, _ = mc_prices(p, offsets, self.paths, self.seed)
        f = p.scale_factor * price / p.payoff_cap
        check_unit_interval(f)
        return f


class ChebyshevField(PriceField):
    """Tensor Chebyshev interpolant of CRN Monte Carlo prices over a box.

    All nodes share the same paths, so the interpolant is a smooth version of
    the MC price surface with the same sampling realization as the benchmark.
    Grid evaluation is a per-axis basis contraction, which makes dense
    emulation grids cheap.
    """

    def __init__(self, problem: PricingProblem, half_width, nodes: int = 5,
                 paths: int | None = None, seed: int | None = None):
        self.problem = problem
        k = problem.k
        hw = np.broadcast_to(np.asarray(half_width, dtype=float), (k,)).copy()
        if np.any(hw <= 0):
            raise DomainError("half_width must be positive")
        self.half_width = hw
        self.nodes = int(nodes)
        t0 = time.perf_counter()
        x = np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)  # Chebyshev points of the 1st kind
        pts = np.array(list(itertools.product(*(x * w for w in hw))))
        base = MonteCarloField(problem, paths, seed)
        vals = base.values(pts).reshape((nodes,) * k)
        # values -> coefficients along each axis (V is the Chebyshev-Vandermonde matrix)
        Vinv = np.linalg.inv(C.chebvander(x, nodes - 1))
        coef = vals
        for ax in range(k):
            coef = np.moveaxis(np.tensordot(Vinv, coef, axes=([1], [ax])), 0, ax)
        self.coef = coef
        self.node_values = vals
        self.meta = {"method": "chebyshev", "nodes": self.nodes, "half_width": hw.tolist(),
                     "paths": base.paths, "seed": base.seed,
                     "fit_seconds": round(time.perf_counter() - t0, 3)}

    def _basis(self, ax: int, x) -> np.ndarray:
        u = np.asarray(x, dtype=float) / self.half_width[ax]
        if np.any(np.abs(u) > 1 + 1e-9):
            raise DomainError("offset outside the interpolation box")
        return C.chebvander(u, self.nodes - 1)

    def values(self, offsets) -> np.ndarray:
        off = np.atleast_2d(np.asarray(offsets, dtype=float))
        out = np.zeros(off.shape[0])
        B = [self._basis(ax, off[:, ax]) for ax in range(self.problem.k)]
        for idx in itertools.product(range(self.nodes), repeat=self.problem.k):
            term = np.full(off.shape[0], self.coef[idx])
            for ax, j in enumerate(idx):
                term = term * B[ax][:, j]
            out += term
        check_unit_interval(out)
        return out

    def grid(self, coords) -> np.ndarray:
        t = self.coef
        for ax, c in enumerate(coords):
            t = np.moveaxis(np.tensordot(self._basis(ax, c), t, axes=([1], [ax])), 0, ax)
        check_unit_interval(t)
        return t

    def gradient(self, h: float = 0.0) -> np.ndarray:
        """Exact derivative of the interpolant at the center."""
        n = self.nodes
        b0 = C.chebvander(np.zeros(1), n - 1)[0]
        db0 = np.array([C.chebval(0.0, C.chebder(np.eye(n)[j])) for j in range(n)])
        g = np.zeros(self.problem.k)
        for ax in range(self.problem.k):
            t = self.coef
            for other in range(self.problem.k):
                # contracting the leading axis each time walks through all axes in order
                t = np.tensordot(db0 if other == ax else b0, t, axes=([0], [0]))
            g[ax] = float(t) / self.half_width[ax]
        return g


def price_field(problem: PricingProblem, half_width=None, method: str = "auto", **kw) -> PriceField:
    """Pick the evaluator: closed form for vanilla calls, Chebyshev-smoothed
    MC over the stencil box for path-dependent payoffs."""
    if method == "auto":
        method = "closed-form" if problem.is_closed_form else "chebyshev"
    if method == "closed-form":
        return ClosedFormField(problem)
    if method == "monte-carlo":
        return MonteCarloField(problem, kw.get("paths"), kw.get("seed"))
    if method == "chebyshev":
        if half_width is None:
            raise DomainError("chebyshev field needs the box half-width")
        return ChebyshevField(problem, half_width, **kw)
    raise DomainError(f"unknown price field method {method!r}")
