"""Maximum-likelihood post-processing of phase-estimation samples with
likelihood-ratio confidence intervals."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DomainError
from .qae import phase_estimation_pmf

SENTINEL = -1e3  # per-sample floor for log p
_GOLDEN = (np.sqrt(5) - 1) / 2


def chi2_quantile_1df(p: float) -> float:
    """Quantile of chi-square with one degree of freedom: (Phi^-1((1+p)/2))^2."""
    if not 0 < p < 1:
        raise DomainError("p must be in (0, 1)")
    return float(ndtri(0.5 + 0.5 * p) ** 2)


def _counts(samples, N):
    s = np.asarray(samples, dtype=int)
    if s.size == 0:
        raise DomainError("need at least one sample")
    if s.min() < 0 or s.max() >= N:
        raise DomainError("sample indices must lie in [0, N)")
    return np.bincount(s, minlength=N)


def _fold(d):
    return d - np.floor(d + 0.5)


def _loglik_counts(counts, N, g):
    """Vectorized over g (any shape); counts has length N."""
    g = np.asarray(g, dtype=float)
    idx = np.flatnonzero(counts)
    d = _fold(idx[:, None] / N - g.reshape(1, -1))
    p = phase_estimation_pmf(N, d)
    with np.errstate(divide="ignore"):
        lp = np.maximum(np.log(p), SENTINEL)
    return (counts[idx][:, None] * lp).sum(axis=0).reshape(g.shape)


def log_likelihood(samples, N: int, g: float) -> float:
    """sum_i ln p(x_i | g) with Delta = x_i/N - g folded to [-1/2, 1/2)."""
    return float(_loglik_counts(_counts(samples, N), N, g))


@dataclass
class MleResult:
    estimate: float
    ci_low: float
    ci_high: float
    confidence_level: float
    shots: int
    log_likelihood_at_max: float
    multimodal: bool = False

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("estimate", "ci_low", "ci_high", "confidence_level",
                                               "shots", "log_likelihood_at_max", "multimodal")}


def _golden_max(fn, a, b, tol=1e-12, iters=200):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _bisect(fn, inside, outside, level, tol=1e-12):
    """Point between ``inside`` (fn >= level) and ``outside`` (fn < level)."""
    for _ in range(200):
        if abs(outside - inside) < tol:
            break
        mid = 0.5 * (inside + outside)
        if fn(mid) >= level:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def mle_fit(samples, N: int, confidence_level: float = 0.68) -> MleResult:
    """Argmax of the likelihood over g in [-1/2, 1/2) and its LR interval.

    Scan at resolution 1/(16N), refine the three best scan points by golden
    section within one scan step, then take the interval spanned by the level
    set log L >= log L(g^) - q/2 within one grid step of the optimum, with
    endpoints refined by bisection.
    """
    counts = _counts(samples, N)
    fn = lambda g: float(_loglik_counts(counts, N, g))
    step = 1.0 / (16 * N)
    grid = -0.5 + step * np.arange(16 * N)
    L = _loglik_counts(counts, N, grid)
    # local maxima of the periodic scan, best first
    peaks = np.flatnonzero((L >= np.roll(L, 1)) & (L >= np.roll(L, -1)))
    top = peaks[np.argsort(L[peaks])[::-1][:3]] if peaks.size else np.argsort(L)[::-1][:3]
    best_g, best_L = None, -np.inf
    for i in top:
        g, v = _golden_max(fn, grid[i] - step, grid[i] + step)
        if v > best_L:
            best_g, best_L = g, v
    best_g = float(_fold(best_g))
    level = best_L - chi2_quantile_1df(confidence_level) / 2

    # hull of the level set within one grid step of the optimum; near grid
    # points the likelihood splits into two lobes around the sampled index
    fine = best_g + np.linspace(-1.0 / N, 1.0 / N, 64 * 2 + 1)
    Lf = _loglik_counts(counts, N, fine)
    above = np.flatnonzero(Lf >= level)
    i0, i1 = above.min(), above.max()
    lo = _bisect(fn, fine[i0], fine[i0 - 1], level) if i0 > 0 else fine[0]
    hi = _bisect(fn, fine[i1], fine[i1 + 1], level) if i1 < len(fine) - 1 else fine[-1]
    # a dip below the level inside the hull, or high points elsewhere, is flagged
    inner = Lf[i0:i1 + 1] < level
    off = _fold(grid - best_g)
    multimodal = bool(inner.any() or np.any(L[np.abs(off) > 1.0 / N + step] >= level))
    if multimodal:
        warnings.warn("likelihood level set is disconnected; the interval spans the lobes next to the MLE")
    return MleResult(best_g, min(lo, best_g), max(hi, best_g), confidence_level,
                     int(counts.sum()), float(best_L), multimodal)
