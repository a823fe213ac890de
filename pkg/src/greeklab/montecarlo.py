"""Monte Carlo path generation, pricing and the classical finite-difference
greek estimators (independent sampling and common random numbers)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import rng
from .errors import BudgetError, DomainError, ResourceError
from .market import GbmModel, PricingProblem, discounted_payoff, market_points

# largest normals matrix we are willing to hold (float64 entries)
MEMORY_CAP_ELEMENTS = 200_000_000


@dataclass
class PathBatch:
    """Standard-normal increments for ``count`` paths.

    ``normals`` has shape (count, assets * steps); row r holds path r's
    draws in asset-major order. ``start`` is the index of the first path in
    the underlying counter-based stream.
    """

    count: int
    normals: np.ndarray
    seed: int
    times: tuple
    maturity: float
    n_assets: int
    stream: str = "paths"
    start: int = 0

    @property
    def z(self) -> np.ndarray:
        return self.normals.reshape(self.count, self.n_assets, len(self.times))


def simulate_paths(model: GbmModel, M: int, seed: int, stream: str = "paths", start: int = 0,
                   memory_cap: int = MEMORY_CAP_ELEMENTS) -> PathBatch:
    """Draw the normals for paths ``start .. start+M-1`` of a named stream.

    Asset levels are produced lazily by :func:`asset_paths`, which steps the
    exact lognormal solution between observation dates.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    width = model.n_assets * model.n_steps
    if M * width > memory_cap:
        raise ResourceError(f"{M} paths x {width} draws exceeds the memory cap of {memory_cap} values")
    z = rng.normals(seed, start, start + M, width, name=stream)
    return PathBatch(M, z, seed, model.observation_times, model.maturity, model.n_assets, stream, start)


def growth_factors(z: np.ndarray, times, base_maturity: float, vols, rate: float,
                   maturity: float) -> np.ndarray:
    """exp((r - s^2/2) t + s W(t)) on the observation dates, shape (M, d, steps).

    Dates scale with ``maturity / base_maturity`` so a maturity bump moves
    every monitoring date proportionally while reusing the same normals.
    """
    t = np.asarray(times) * (maturity / base_maturity)
    dt = np.diff(t, prepend=0.0)
    W = np.cumsum(z * np.sqrt(dt), axis=-1)
    vols = np.asarray(vols, dtype=float)[:, None]
    return np.exp((rate - 0.5 * vols**2) * t + vols * W)


def asset_paths(batch: PathBatch, spots, vols, rate: float, maturity: float) -> np.ndarray:
    """Asset levels S_i(t_j), shape (M, d, steps)."""
    G = growth_factors(batch.z, batch.times, batch.maturity, vols, rate, maturity)
    return np.asarray(spots, dtype=float)[:, None] * G


def _point_groups(pts):
    """Group evaluation points that share (vols, rate, maturity)."""
    keys = np.column_stack([pts.vols, pts.rate, pts.maturity])
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    return uniq, inv.ravel()


def _group_payoffs(problem, G, spots, rate, maturity):
    """Discounted payoffs (P, M) for spot vectors ``spots`` (P, d) sharing G."""
    disc = np.exp(-rate * maturity)
    pay = problem.payoff
    M, d, T = G.shape
    if hasattr(pay, "barrier"):
        # (M*T, d) @ (d, P) keeps the heavy lifting in BLAS
        basket = (G.transpose(0, 2, 1).reshape(M * T, d) @ (spots * np.asarray(pay.weights)).T)
        basket = basket.reshape(M, T, -1)
        knocked = basket.max(axis=1) > pay.barrier
        out = np.where(knocked, np.maximum(basket[:, -1, :] - pay.strike, 0.0), 0.0)
        return disc * out.T
    return disc * np.maximum(spots[:, :1] * G[None, :, 0, -1] - pay.strike, 0.0)


def path_payoffs(problem: PricingProblem, batch: PathBatch, offsets) -> np.ndarray:
    """Per-path discounted payoffs (P, M) at each offset, on common paths."""
    pts = market_points(problem, offsets)
    uniq, inv = _point_groups(pts)
    d = problem.model.n_assets
    out = np.empty((len(inv), batch.count))
    for g, key in enumerate(uniq):
        sel = np.flatnonzero(inv == g)
        G = growth_factors(batch.z, batch.times, batch.maturity, key[:d], key[d], key[d + 1])
        out[sel] = _group_payoffs(problem, G, pts.spots[sel], key[d], key[d + 1])
    return out


def mc_prices(problem: PricingProblem, offsets, M: int, seed: int, chunk: int = 8192,
              stream: str = "paths"):
    """Raw MC prices and standard errors at many offsets on common paths.

    Paths are processed in fixed chunks in a fixed order, so results are
    bitwise reproducible for a given seed.
    """
    pts = market_points(problem, offsets)
    uniq, inv = _point_groups(pts)
    d = problem.model.n_assets
    P = len(inv)
    s1 = np.zeros(P)
    s2 = np.zeros(P)
    # keep the (points x chunk x steps) basket array modest
    per = max(1, 2**23 // max(1, chunk * problem.model.n_steps))
    for start in range(0, M, chunk):
        n = min(chunk, M - start)
        batch = simulate_paths(problem.model, n, seed, stream, start)
        for g, key in enumerate(uniq):
            sel = np.flatnonzero(inv == g)
            G = growth_factors(batch.z, batch.times, batch.maturity, key[:d], key[d], key[d + 1])
            for lo in range(0, len(sel), per):
                s = sel[lo:lo + per]
                pay = _group_payoffs(problem, G, pts.spots[s], key[d], key[d + 1])
                s1[s] += pay.sum(axis=1)
                s2[s] += (pay**2).sum(axis=1)
    mean = s1 / M
    var = np.maximum(s2 / M - mean**2, 0.0) * M / max(M - 1, 1)
    return mean, np.sqrt(var / M)


def mc_price(problem: PricingProblem, batch: PathBatch, offset=None) -> dict:
    """Sample mean of discounted payoffs and its standard error (price units)."""
    off = np.zeros((1, problem.k)) if offset is None else np.atleast_2d(offset)
    pay = path_payoffs(problem, batch, off)[0]
    se = pay.std(ddof=1) / np.sqrt(batch.count) if batch.count > 1 else 0.0
    return {"price": float(pay.mean()), "std_error": float(se)}


# -- finite differences --------------------------------------------------------

@dataclass(frozen=True)
class FdScheme:
    """Order p (1 forward, 2 central), step h and MC convergence rate q."""

    p: int = 2
    h: float = 0.01
    q: float = 0.5

    def __post_init__(self):
        if self.p not in (1, 2) or self.q not in (0.5, 1.0) or self.h <= 0:
            raise DomainError("need p in {1,2}, q in {1/2,1}, h > 0")


def optimal_step(epsilon: float, p: int) -> float:
    """Step minimizing the sample cost of a p-th order difference: (eps/(p+1))^(1/p)."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    return (epsilon / (p + 1)) ** (1.0 / p)


def success_quantile(success: float) -> float:
    """Two-sided standard-normal quantile z with P(|Z| <= z) = success."""
    return float(ndtri(0.5 + 0.5 * success))


@dataclass
class CfdResult:
    greeks: np.ndarray  # problem units: d f / d offset
    physical: np.ndarray  # d price / d parameter
    std_errors: np.ndarray
    paths_per_axis: np.ndarray
    total_paths: int
    payoff_evaluations: int
    h: float
    crn: bool
    seed: int
    epsilon: float
    z: float
    noise_tolerance: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        for i, ax in enumerate(self.meta.get("axes", range(len(self.greeks)))):
            yield {"axis": ax, "estimate": self.greeks[i], "physical": self.physical[i],
                   "std_error": self.std_errors[i], "paths": int(self.paths_per_axis[i]),
                   "h": self.h, "crn": self.crn, "seed": self.seed}


def _bump_pair(problem, i, h):
    off = np.zeros((2, problem.k))
    off[0, i], off[1, i] = h / 2, -h / 2
    return off


def cfd_greeks(problem: PricingProblem, epsilon: float, crn: bool = True, seed: int = 0,
               h: float | None = None, success: float = 0.85, pilot_paths: int = 20_000,
               max_paths: int = 50_000_000, chunk: int = 65_536) -> CfdResult:
    """Central-difference greeks with a sample count sized for the target.

    Error model: |bias| <= h^2 and the statistical error must fit in
    ``epsilon - h^2``; with the Gaussian approximation each axis gets
    M = (z * sd / (epsilon - h^2))^2 paths, where sd is the pilot standard
    deviation of the per-path difference quotient (CRN) or sqrt(var+ + var-)/h
    for independent draws. Gradients are in the problem's units, i.e.
    d f / d offset with f = c * price / payoff_cap.

    ``total_paths`` counts distinct simulated paths: under CRN both bumped
    payoffs of an axis share one path set; without CRN each bumped price
    draws its own. ``payoff_evaluations`` counts path-payoffs (2 per path
    and axis under CRN).
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    h = optimal_step(epsilon, 2) if h is None else float(h)
    tol = epsilon - h**2
    if tol <= 0:
        raise DomainError("step too large: bias budget h^2 exceeds epsilon")
    z = success_quantile(success)
    norm = problem.scale_factor / problem.payoff_cap
    k = problem.k

    pilot = simulate_paths(problem.model, pilot_paths, seed, "cfd-pilot")
    M = np.zeros(k, dtype=np.int64)
    for i in range(k):
        pay = norm * path_payoffs(problem, pilot, _bump_pair(problem, i, h))
        if crn:
            sd = np.std((pay[0] - pay[1]) / h, ddof=1)
        else:
            sd = np.sqrt(pay[0].var(ddof=1) + pay[1].var(ddof=1)) / h
        M[i] = max(2, int(np.ceil((z * sd / tol) ** 2)))
    total = int(M.sum() if crn else 2 * M.sum())
    if total > max_paths:
        raise BudgetError(f"{total} paths needed, budget is {max_paths}")

    est = np.zeros(k)
    se = np.zeros(k)
    for i in range(k):
        off = _bump_pair(problem, i, h)
        s1 = np.zeros(2)
        s2 = np.zeros(2)
        sd1 = sd2 = 0.0
        # stream per axis (and per side without CRN); chunked for memory
        for start in range(0, int(M[i]), chunk):
            n = min(chunk, int(M[i]) - start)
            if crn:
                b = simulate_paths(problem.model, n, seed, f"cfd-axis{i}", start)
                pay = norm * path_payoffs(problem, b, off)
                q = (pay[0] - pay[1]) / h
                sd1 += q.sum()
                sd2 += (q**2).sum()
            else:
                for side in range(2):
                    b = simulate_paths(problem.model, n, seed, f"cfd-axis{i}-side{side}", start)
                    pay = norm * path_payoffs(problem, b, off[side:side + 1])[0]
                    s1[side] += pay.sum()
                    s2[side] += (pay**2).sum()
        m = int(M[i])
        if crn:
            est[i] = sd1 / m
            se[i] = np.sqrt(max(sd2 / m - est[i] ** 2, 0.0) / (m - 1))
        else:
            mean = s1 / m
            var = np.maximum(s2 / m - mean**2, 0.0) * m / (m - 1)
            est[i] = (mean[0] - mean[1]) / h
            se[i] = np.sqrt(var.sum() / m) / h
    return CfdResult(est, est * problem.to_physical, se, M, total, int(2 * M.sum()), h, crn,
                     seed, epsilon, z, tol, meta={"axes": list(problem.bump_axes),
                                                  "pilot_paths": pilot_paths,
                                                  "path_count_convention": "distinct simulated paths"})


@dataclass
class Benchmark:
    """Reference price and greeks from a large common-random-numbers run."""

    price: float
    price_se: float
    gradient: np.ndarray  # problem units
    gradient_se: np.ndarray
    physical: np.ndarray
    paths: int
    seed: int
    h: float


def mc_benchmark(problem: PricingProblem, paths: int | None = None, seed: int | None = None,
                 h: float = 0.05) -> Benchmark:
    """Price and central-difference greeks (step h in normalized units) on
    one shared path set; the default is the problem's 10^6-path setting."""
    paths = problem.mc_paths if paths is None else int(paths)
    seed = problem.seed if seed is None else int(seed)
    k = problem.k
    off = np.vstack([np.zeros(k), np.eye(k) * h / 2, -np.eye(k) * h / 2])
    norm = problem.scale_factor / problem.payoff_cap
    s1 = np.zeros(2 * k + 1)
    s2 = np.zeros(k)
    p1 = p2 = 0.0
    for start in range(0, paths, 65_536):
        n = min(65_536, paths - start)
        b = simulate_paths(problem.model, n, seed, "paths", start)
        pay = path_payoffs(problem, b, off)
        s1 += pay.sum(axis=1)
        p2 += (pay[0] ** 2).sum()
        q = norm * (pay[1:k + 1] - pay[k + 1:]) / h
        s2 += (q**2).sum(axis=1)
    mean = s1 / paths
    price = mean[0]
    grad = norm * (mean[1:k + 1] - mean[k + 1:]) / h
    grad_se = np.sqrt(np.maximum(s2 / paths - grad**2, 0) / (paths - 1))
    price_se = np.sqrt(max(p2 / paths - price**2, 0) / (paths - 1))
    return Benchmark(float(price), float(price_se), grad, grad_se, grad * problem.to_physical,
                     paths, seed, h)
