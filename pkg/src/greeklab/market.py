"""Market models, payoffs, closed-form Black-Scholes values and the
normalized price function used by every gradient estimator."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, NormalizationError

_AXIS_RE = re.compile(r"^(spot|vol)(?:_(\d+))?$|^(rate|maturity)$")


@dataclass(frozen=True)
class GbmModel:
    """Independent geometric Brownian motions observed on fixed dates.

    Parameters
    ----------
    spots, vols : sequence of float
        Initial prices and annualized volatilities, one per asset.
    rate : float
        Continuously compounded risk-free rate.
    maturity : float
        Time to expiry in years.
    observation_times : sequence of float, optional
        Monitoring dates; defaults to ``(maturity,)``.
    """

    spots: tuple
    vols: tuple
    rate: float
    maturity: float
    observation_times: tuple = ()

    def __post_init__(self):
        spots = tuple(float(s) for s in np.atleast_1d(self.spots))
        vols = tuple(float(v) for v in np.atleast_1d(self.vols))
        obs = tuple(float(t) for t in self.observation_times) or (float(self.maturity),)
        object.__setattr__(self, "spots", spots)
        object.__setattr__(self, "vols", vols)
        object.__setattr__(self, "observation_times", obs)
        if len(spots) != len(vols):
            raise DomainError("spots and vols must have the same length")
        if min(spots) <= 0:
            raise DomainError("spots must be positive")
        # zero volatility is allowed: it gives the deterministic test model
        if min(vols) < 0:
            raise DomainError("vols must be nonnegative")
        if self.maturity <= 0:
            raise DomainError("maturity must be positive")
        t = np.asarray(obs)
        if t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise DomainError("observation_times must be positive and strictly increasing")
        if t[-1] > self.maturity * (1 + 1e-12):
            raise DomainError("last observation time exceeds maturity")

    @property
    def n_assets(self) -> int:
        return len(self.spots)

    @property
    def n_steps(self) -> int:
        return len(self.observation_times)


@dataclass(frozen=True)
class VanillaCall:
    strike: float

    def __post_init__(self):
        if self.strike <= 0:
            raise DomainError("strike must be positive")


@dataclass(frozen=True)
class KnockInBasket:
    """Pays max(w.S(T) - K, 0) if w.S(t) > B on any observation date."""

    strike: float
    barrier: float
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.strike <= 0 or self.barrier <= 0:
            raise DomainError("strike and barrier must be positive")
        w = np.asarray(self.weights)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be nonnegative and finite")


@dataclass(frozen=True)
class PricingProblem:
    """Model + payoff + the normalization that maps offsets to f in [0, 1].

    ``offset`` vectors are expressed in normalized units: the physical bump
    of axis ``i`` is ``offset[i] * axis_scales[i]``. The normalized price is
    ``scale_factor * price / payoff_cap``.
    """

    model: GbmModel
    payoff: VanillaCall | KnockInBasket
    bump_axes: tuple
    payoff_cap: float = 1.0
    scale_factor: float = 1.0
    axis_scales: tuple = ()
    mc_paths: int = 1_000_000
    seed: int = 2024
    name: str = ""

    def __post_init__(self):
        axes = tuple(self.bump_axes)
        object.__setattr__(self, "bump_axes", axes)
        scales = tuple(float(s) for s in self.axis_scales) or (1.0,) * len(axes)
        object.__setattr__(self, "axis_scales", scales)
        if len(axes) < 1:
            raise DomainError("need at least one bump axis")
        if len(scales) != len(axes) or min(scales) <= 0:
            raise DomainError("axis_scales must be positive, one per axis")
        if self.payoff_cap <= 0 or self.scale_factor < 0:
            raise DomainError("payoff_cap must be positive and scale_factor nonnegative")
        if isinstance(self.payoff, KnockInBasket) and len(self.payoff.weights) != self.model.n_assets:
            raise DomainError("basket weights must match the number of assets")
        for a in axes:
            _parse_axis(a, self.model.n_assets)

    @property
    def k(self) -> int:
        return len(self.bump_axes)

    @property
    def is_closed_form(self) -> bool:
        return isinstance(self.payoff, VanillaCall) and self.model.n_assets == 1

    @property
    def to_physical(self) -> np.ndarray:
        """Factor turning a normalized-unit gradient into d(price)/d(param)."""
        if self.scale_factor == 0:
            return np.full(self.k, np.nan)
        return self.payoff_cap / (self.scale_factor * np.asarray(self.axis_scales))

    def with_(self, **kw) -> "PricingProblem":
        return replace(self, **kw)


def _parse_axis(name: str, n_assets: int):
    m = _AXIS_RE.match(name)
    if not m:
        raise DomainError(f"unknown bump axis {name!r}")
    if m.group(3):
        return m.group(3), None
    idx = int(m.group(2)) - 1 if m.group(2) else 0
    if not 0 <= idx < n_assets:
        raise DomainError(f"axis {name!r} refers to a missing asset")
    return m.group(1), idx


@dataclass
class MarketPoints:
    """Broadcast market parameters for P evaluation points."""

    spots: np.ndarray  # (P, d)
    vols: np.ndarray  # (P, d)
    rate: np.ndarray  # (P,)
    maturity: np.ndarray  # (P,)


def market_points(problem: PricingProblem, offsets) -> MarketPoints:
    """Apply normalized offsets (P, k) to the base model."""
    off = np.atleast_2d(np.asarray(offsets, dtype=float))
    if off.shape[1] != problem.k:
        raise DomainError(f"expected {problem.k} offset coordinates, got {off.shape[1]}")
    P = off.shape[0]
    m = problem.model
    spots = np.tile(np.asarray(m.spots), (P, 1))
    vols = np.tile(np.asarray(m.vols), (P, 1))
    rate = np.full(P, m.rate)
    mat = np.full(P, m.maturity)
    for i, (name, s) in enumerate(zip(problem.bump_axes, problem.axis_scales)):
        kind, idx = _parse_axis(name, m.n_assets)
        bump = off[:, i] * s
        if kind == "spot":
            spots[:, idx] += bump
        elif kind == "vol":
            vols[:, idx] += bump
        elif kind == "rate":
            rate += bump
        else:
            mat += bump
    if np.any(spots <= 0) or np.any(vols < 0) or np.any(mat <= 0):
        raise DomainError("offset moves the model outside its domain (check axis_scales)")
    return MarketPoints(spots, vols, rate, mat)


# -- closed form ---------------------------------------------------------------

def _check_bs(S, K, sigma, T):
    for name, v in (("S", S), ("K", K), ("sigma", sigma), ("T", T)):
        if np.any(np.asarray(v) <= 0):
            raise DomainError(f"{name} must be positive")


def _d1d2(S, K, r, sigma, T):
    sq = sigma * np.sqrt(T)
    d1 = (np.log(S / K) + (r + 0.5 * sigma**2) * T) / sq
    return d1, d1 - sq


def bs_price(S, K, r, sigma, T):
    """Black-Scholes call price; vectorized over numpy inputs."""
    _check_bs(S, K, sigma, T)
    d1, d2 = _d1d2(S, K, r, sigma, T)
    # ndtr is the double-precision normal CDF (Cephes erf/erfc)
    return S * ndtr(d1) - K * np.exp(-r * T) * ndtr(d2)


def bs_greeks(S, K, r, sigma, T) -> dict:
    """Analytic delta, rho, vega and theta (= dC/dT, not -dC/dT)."""
    _check_bs(S, K, sigma, T)
    d1, d2 = _d1d2(S, K, r, sigma, T)
    disc = np.exp(-r * T)
    pdf1 = np.exp(-0.5 * d1**2) / np.sqrt(2 * np.pi)
    return {
        "delta": ndtr(d1),
        "rho": K * T * disc * ndtr(d2),
        "vega": S * pdf1 * np.sqrt(T),
        "theta": S * pdf1 * sigma / (2 * np.sqrt(T)) + r * K * disc * ndtr(d2),
    }


GREEK_OF_AXIS = {"spot": "delta", "rate": "rho", "vol": "vega", "maturity": "theta"}


def analytic_gradient(problem: PricingProblem) -> np.ndarray:
    """Exact d(price)/d(param) along each bump axis of a vanilla problem."""
    if not problem.is_closed_form:
        raise DomainError("analytic greeks need a single-asset vanilla call")
    m = problem.model
    g = bs_greeks(m.spots[0], problem.payoff.strike, m.rate, m.vols[0], m.maturity)
    return np.array([g[GREEK_OF_AXIS[_parse_axis(a, 1)[0]]] for a in problem.bump_axes])


def normalized_gradient(problem: PricingProblem, physical) -> np.ndarray:
    return np.asarray(physical, dtype=float) / problem.to_physical


# -- payoffs on simulated paths ------------------------------------------------

def discounted_payoff(problem: PricingProblem, assets: np.ndarray, rate, maturity) -> np.ndarray:
    """Discounted payoff for asset paths ``assets`` of shape (..., d, steps)."""
    pay = problem.payoff
    disc = np.exp(-np.asarray(rate) * np.asarray(maturity))
    if isinstance(pay, VanillaCall):
        return disc * np.maximum(assets[..., 0, -1] - pay.strike, 0.0)
    basket = np.einsum("i,...it->...t", np.asarray(pay.weights), assets)
    knocked = (basket > pay.barrier).any(axis=-1)
    return disc * np.where(knocked, np.maximum(basket[..., -1] - pay.strike, 0.0), 0.0)


# -- normalized price ----------------------------------------------------------

def normalized_price(problem: PricingProblem, offset=None) -> float:
    """f(x0 + offset) = c * E[g] / payoff_cap.

    Vanilla problems use the closed form; basket problems use the Monte
    Carlo engine with ``problem.mc_paths`` paths and ``problem.seed``.
    """
    off = np.zeros(problem.k) if offset is None else np.asarray(offset, dtype=float)
    val = float(normalized_prices(problem, off[None, :])[0])
    return val


def normalized_prices(problem: PricingProblem, offsets) -> np.ndarray:
    """Vectorized :func:`normalized_price` over rows of ``offsets``."""
    if problem.is_closed_form:
        pts = market_points(problem, offsets)
        price = bs_price(pts.spots[:, 0], problem.payoff.strike, pts.rate,
                         pts.vols[:, 0], pts.maturity)
    else:
        from .montecarlo import mc_prices
        price = mc_prices(problem, offsets, problem.mc_paths, problem.seed)[0]
    f = problem.scale_factor * np.asarray(price) / problem.payoff_cap
    check_unit_interval(f)
    return f


def check_unit_interval(f, upper: float = 1.0):
    f = np.asarray(f)
    if f.size and (np.nanmin(f) < 0 or np.nanmax(f) > upper or np.isnan(f).any()):
        raise NormalizationError(
            f"normalized price outside [0, {upper:g}] (range {np.nanmin(f):.4g}..{np.nanmax(f):.4g});"
            " increase payoff_cap or reduce scale_factor")


# -- presets -------------------------------------------------------------------

VANILLA_AXES = ("spot", "rate", "vol", "maturity")
# normalized offset of 1 moves spot by 10, rate by 0.5, vol by 0.1, T by 0.05
VANILLA_SCALES = (10.0, 0.5, 0.1, 0.05)


def vanilla_problem(k: int = 4, payoff_cap: float = 20.0, axis_scales: Sequence[float] | None = None,
                    c: float = 1.0) -> PricingProblem:
    """European call at (S, r, sigma, T) = (99.5, 1%, 20%, 0.1), K = 100."""
    model = GbmModel(spots=(99.5,), vols=(0.2,), rate=0.01, maturity=0.1)
    scales = tuple(axis_scales) if axis_scales is not None else VANILLA_SCALES[:k]
    return PricingProblem(model, VanillaCall(100.0), VANILLA_AXES[:k], payoff_cap, c,
                          scales, name=f"vanilla-k{k}")


BASKET_AXES = ("spot_1", "spot_2", "spot_3", "vol_1")
BASKET_SCALES = (1.0, 1.0, 1.0, 0.5)


def basket_model() -> GbmModel:
    T = 3.0
    return GbmModel(spots=(2.0, 2.0, 2.0), vols=(0.2, 0.2, 0.1), rate=0.01, maturity=T,
                    observation_times=tuple(T / 5 * i for i in range(1, 6)))


BASKET_PAYOFF = KnockInBasket(strike=1.0, barrier=2.5, weights=(0.5, 0.3, 0.2))


def barrier_free_price(model: GbmModel, payoff: KnockInBasket, paths: int = 200_000,
                       seed: int = 7) -> float:
    """Pilot MC price of the basket call without the knock-in condition."""
    from .montecarlo import simulate_paths, asset_paths
    batch = simulate_paths(model, paths, seed)
    S = asset_paths(batch, model.spots, model.vols, model.rate, model.maturity)
    basket = S[:, :, -1] @ np.asarray(payoff.weights)
    return float(np.exp(-model.rate * model.maturity) * np.maximum(basket - payoff.strike, 0).mean())


def basket_problem(payoff_cap: float | None = None, axis_scales: Sequence[float] | None = None,
                   c: float = 1.0, mc_paths: int = 1_000_000, seed: int = 2024,
                   raw: bool = False) -> PricingProblem:
    """Three-asset knock-in basket with bump axes (spot_1, spot_2, spot_3, vol_1).

    ``raw=True`` gives the unnormalized problem (cap 1, unit scales) whose
    gradients are plain price sensitivities; the classical baselines use it.
    """
    model = basket_model()
    if raw:
        cap, scales = 1.0, (1.0,) * 4
    else:
        cap = payoff_cap if payoff_cap is not None else 4.0 * barrier_free_price(model, BASKET_PAYOFF)
        scales = tuple(axis_scales) if axis_scales is not None else BASKET_SCALES
    return PricingProblem(model, BASKET_PAYOFF, BASKET_AXES, cap, c, scales, mc_paths, seed,
                          name="basket-raw" if raw else "basket")
