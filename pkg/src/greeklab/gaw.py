"""Emulation of the high-order phase-oracle gradient algorithm.

The phase register over a k-dimensional grid is filled classically with the
oracle phases, perturbed by uniform phase noise, and transformed with a
k-dimensional inverse DFT; the squared moduli are the measurement
distribution before readout.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng
from .errors import AliasingError, DomainError, InfeasibleError, ResourceError
from .market import PricingProblem
from .resources import n_o
from .stencil import DifferenceScheme, central_diff_coefficients
from .surface import PriceField, price_field

# tensor entries we are willing to allocate (complex128): 2^26 ~ 1 GiB
MEMORY_CAP_ENTRIES = 2**26
MAX_QUBITS = 26


@dataclass(frozen=True)
class GridSpec:
    """k axes of N = 2^n points spaced l/N, symmetric about the center."""

    k: int
    n: int
    l: float
    center: tuple = ()
    axis_scales: tuple = ()

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise DomainError("k and n must be positive")
        if self.l <= 0:
            raise DomainError("edge length l must be positive")
        object.__setattr__(self, "center", tuple(self.center) or (0.0,) * self.k)
        object.__setattr__(self, "axis_scales", tuple(self.axis_scales) or (1.0,) * self.k)

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def S(self) -> float:
        return self.N / self.l

    @property
    def offsets(self) -> np.ndarray:
        """delta_j = (j - (N-1)/2) * l / N."""
        j = np.arange(self.N)
        return (j - (self.N - 1) / 2) * self.l / self.N

    @property
    def size(self) -> int:
        return self.N**self.k

    def signed(self) -> np.ndarray:
        """Signed readout value h~ for every index h."""
        h = np.arange(self.N)
        return np.where(h < self.N // 2, h, h - self.N)

    def check_memory(self, allow_large: bool = False, cap: int | None = None):
        """Refuse tensors above ``cap`` entries (module default 2^26, i.e. n*k > 26)."""
        cap = MEMORY_CAP_ENTRIES if cap is None else cap
        if not allow_large and self.size > cap:
            raise ResourceError(f"tensor of 2^{self.n * self.k} entries exceeds the memory cap;"
                                " pass allow_large=True or use the factorized mode")


def stencil_reach(grid: GridSpec, scheme: DifferenceScheme) -> float:
    """Largest |l * delta_j| over the stencil, in normalized offset units."""
    return scheme.m * grid.l * (grid.N - 1) / (2 * grid.N)


def phase_array(fld: PriceField, grid: GridSpec, scheme: DifferenceScheme) -> np.ndarray:
    """Noise-free oracle phase 2 pi S sum_l a_l f(x0 + l delta_j) on the grid.

    Uses f(x0 - l delta_j) = F_l[N-1-j] (grid symmetry), so only the m
    positive stencil copies are evaluated.
    """
    delta = grid.offsets
    acc = None
    for l, a in scheme.positive():
        F = fld.grid([l * delta + c for c in grid.center])
        term = a * (F - np.flip(F))
        acc = term if acc is None else acc + term
    return 2 * np.pi * grid.S * acc


def phase_noise(shape, eps_phase: float, seed: int, stream: str = "phase-noise") -> np.ndarray:
    """eta_j ~ U[-eps, eps] per entry, from a counter-based stream."""
    if eps_phase == 0:
        return np.zeros(shape)
    return rng.generator(seed, stream).uniform(-eps_phase, eps_phase, size=shape)


def tensor_from_phase(phase: np.ndarray, eps_phase: float = 0.0, seed: int = 0,
                      stream: str = "phase-noise") -> np.ndarray:
    eta = phase_noise(phase.shape, eps_phase, seed, stream)
    out = np.exp(1j * (phase + eta))
    out /= np.sqrt(phase.size)
    return out


def build_phase_tensor(problem: PricingProblem, grid: GridSpec, scheme: DifferenceScheme,
                       eps_phase: float, seed: int, fld: PriceField | None = None,
                       allow_large: bool = False) -> np.ndarray:
    """Normalized state (1/sqrt(N^k)) exp(2 pi i S sum_l a_l f(x0 + l delta_j) + i eta_j)."""
    grid.check_memory(allow_large)
    if fld is None:
        fld = default_field(problem, grid, scheme)
    return tensor_from_phase(phase_array(fld, grid, scheme), eps_phase, seed)


def default_field(problem: PricingProblem, grid: GridSpec, scheme: DifferenceScheme,
                  **kw) -> PriceField:
    reach = stencil_reach(grid, scheme) + max(abs(c) for c in grid.center)
    return price_field(problem, half_width=reach * (1 + 1e-9), **kw)


@dataclass
class GradientRunResult:
    marginals: list  # k arrays of N probabilities
    estimates: np.ndarray  # physical units (d price / d parameter)
    normalized: np.ndarray  # readout h~/N of the modal index
    success_probs: np.ndarray | None
    query_count: int | None
    params: dict = field(default_factory=dict)
    total_probability: float = 1.0
    success_se: np.ndarray | None = None

    def marginal_rows(self, to_physical=None, reference=None):
        N = len(self.marginals[0])
        h = np.arange(N)
        s = np.where(h < N // 2, h, h - N)
        for ax, p in enumerate(self.marginals):
            for j in np.argsort(s):
                row = {"axis": ax, "index": int(j), "signed": int(s[j]), "value": s[j] / N,
                       "probability": float(p[j])}
                if to_physical is not None:
                    row["physical"] = s[j] / N * float(to_physical[ax])
                if reference is not None:
                    row["reference"] = float(reference[ax])
                yield row


def marginals_of(probs: np.ndarray) -> list:
    k = probs.ndim
    return [probs.sum(axis=tuple(a for a in range(k) if a != ax)) for ax in range(k)]


def success_probability(marginal: np.ndarray, reference: float, eps: float | None = None) -> float:
    """Mass on readouts within eps (default 1/N) of the reference value."""
    N = len(marginal)
    eps = 1.0 / N if eps is None else eps
    h = np.arange(N)
    s = np.where(h < N // 2, h, h - N) / N
    return float(marginal[np.abs(s - reference) <= eps + 1e-12].sum())


def inverse_qft_readout(tensor: np.ndarray, reference=None, to_physical=None,
                        query_count: int | None = None, params: dict | None = None) -> GradientRunResult:
    """k-dimensional inverse DFT, squared moduli, per-axis marginals and modal readout.

    The readout of axis i is h~/N (signed index over N), which equals the
    gradient of f in normalized offset units because S = N/l cancels the
    grid spacing l/N. ``to_physical`` converts to price sensitivities.
    """
    amp = np.fft.fftn(tensor, norm="ortho")
    probs = amp.real**2 + amp.imag**2
    del amp
    total = float(probs.sum())
    probs /= total
    margs = marginals_of(probs)
    return _readout(margs, total, reference, to_physical, query_count, params)


def _readout(margs, total, reference, to_physical, query_count, params):
    N = len(margs[0])
    h = np.arange(N)
    s = np.where(h < N // 2, h, h - N)
    norm_est = np.array([s[np.argmax(p)] / N for p in margs])
    phys = norm_est * (np.asarray(to_physical) if to_physical is not None else 1.0)
    succ = None
    if reference is not None:
        succ = np.array([success_probability(p, r) for p, r in zip(margs, reference)])
    return GradientRunResult(margs, phys, norm_est, succ, query_count, dict(params or {}), total)


def gaw_query_count(scheme: DifferenceScheme, grid: GridSpec, eps_phase: float,
                    beta: float = 0.5) -> int:
    """N_o for the grid's S = N/l."""
    return n_o(scheme, grid.S, eps_phase, beta)


def check_nyquist(reference, N: int, what: str = "gradient"):
    ref = np.asarray(reference, dtype=float)
    edge = 0.5 - 1.0 / N
    bad = np.flatnonzero(np.abs(ref) >= edge)
    if bad.size:
        raise AliasingError(f"reference {what} {ref[bad]} is within one grid step of the Nyquist"
                            f" edge 1/2 (N={N}); shrink axis_scales or raise payoff_cap")


def run_gaw(problem: PricingProblem, grid: GridSpec, scheme: DifferenceScheme, eps_phase: float = 1e-4,
            seeds: Sequence[int] | int = 30, reference=None, fld: PriceField | None = None,
            mode: str = "joint", allow_large: bool = False, seed: int = 0) -> GradientRunResult:
    """Emulate the algorithm over several phase-noise seeds.

    ``reference`` is the true gradient in normalized units (d f / d offset).
    Marginals are averaged over seeds; success probabilities are reported as
    the seed mean with its standard error.
    """
    if isinstance(seeds, int):
        seeds = [int(rng.stream_key(seed, f"noise-seed-{i}") >> 1) for i in range(seeds)]
    if reference is not None:
        check_nyquist(reference, grid.N)
    if fld is None:
        fld = default_field(problem, grid, scheme)
    t0 = time.perf_counter()
    if mode == "joint":
        grid.check_memory(allow_large)
        phase = phase_array(fld, grid, scheme)
        runs = [inverse_qft_readout(tensor_from_phase(phase, eps_phase, s), reference) for s in seeds]
    elif mode == "factorized":
        runs = [_factorized_run(fld, grid, scheme, eps_phase, s, reference) for s in seeds]
    else:
        raise DomainError(f"unknown mode {mode!r}")
    margs = [np.mean([r.marginals[ax] for r in runs], axis=0) for ax in range(grid.k)]
    res = _readout(margs, float(np.mean([r.total_probability for r in runs])), reference,
                   problem.to_physical,
                   gaw_query_count(scheme, grid, eps_phase) if eps_phase > 0 else None,
                   {"m": scheme.m, "l": grid.l, "n": grid.n, "eps_phase": eps_phase,
                    "seeds": list(seeds), "mode": mode, "field": fld.meta,
                    "seconds": round(time.perf_counter() - t0, 3)})
    if reference is not None:
        sp = np.array([r.success_probs for r in runs])
        res.success_probs = sp.mean(axis=0)
        res.success_se = sp.std(axis=0, ddof=1) / np.sqrt(len(runs)) if len(runs) > 1 else np.zeros(grid.k)
    return res


def _factorized_run(fld, grid, scheme, eps_phase, seed, reference):
    """Per-axis 1-D emulation with the other coordinates pinned to x0 (approximate)."""
    margs = []
    delta = grid.offsets
    for ax in range(grid.k):
        acc = np.zeros(grid.N)
        for l, a in scheme.positive():
            pts = np.zeros((grid.N, grid.k)) + np.asarray(grid.center)
            pts[:, ax] += l * delta
            F = fld.values(pts)
            acc += a * (F - F[::-1])
        t = tensor_from_phase(2 * np.pi * grid.S * acc, eps_phase, seed, f"phase-noise-{ax}")
        amp = np.fft.fft(t, norm="ortho")
        margs.append(np.abs(amp) ** 2 / np.sum(np.abs(amp) ** 2))
    return _readout(margs, 1.0, reference, None, None, None)


def l_ladder(lo: float = 0.05, hi: float = 1.5, ratio: float = 1.1) -> np.ndarray:
    """Geometric ladder of edge lengths."""
    n = int(np.floor(np.log(hi / lo) / np.log(ratio))) + 1
    return lo * ratio ** np.arange(n)


@dataclass
class SearchResult:
    m: int
    l: float
    N_o: int
    success_probs: np.ndarray
    table: list


def search_parameters(problem: PricingProblem, n: int, target_success: float, reference,
                      m_values=(1, 2, 3, 4), ladder=None, seeds: int = 5, eps_phase: float = 1e-4,
                      field_factory: Callable | None = None, mode: str = "joint",
                      allow_large: bool = False, seed: int = 0) -> SearchResult:
    """Minimize N_o over (m, l) subject to every axis reaching ``target_success``.

    For each m the ladder is scanned from the largest l downward and the
    first feasible l is kept (N_o decreases with l). Points whose stencil
    leaves the model domain count as infeasible.
    """
    ladder = l_ladder() if ladder is None else np.asarray(ladder)
    table = []
    best = None
    for m in m_values:
        scheme = central_diff_coefficients(m)
        for l in sorted(ladder, reverse=True):
            grid = GridSpec(problem.k, n, float(l))
            q = gaw_query_count(scheme, grid, eps_phase)
            if best is not None and q >= best.N_o:
                continue  # cannot improve; smaller l only costs more
            try:
                fld = field_factory(grid, scheme) if field_factory else default_field(problem, grid, scheme)
                res = run_gaw(problem, grid, scheme, eps_phase, seeds, reference, fld, mode,
                              allow_large, seed)
            except (DomainError, ValueError) as exc:
                table.append({"m": m, "l": float(l), "N_o": q, "feasible": False, "note": str(exc)[:80]})
                continue
            ok = bool(np.all(res.success_probs >= target_success))
            table.append({"m": m, "l": float(l), "N_o": q, "feasible": ok,
                          "min_success": float(res.success_probs.min())})
            if ok:
                if best is None or q < best.N_o:
                    best = SearchResult(m, float(l), q, res.success_probs, table)
                break
    if best is None:
        raise InfeasibleError("no feasible parameters on the ladder")
    best.table = table
    return best
