"""Simulation-free quantum gradient emulation.

The oracle acts on theta = arcsin(sqrt(f)) instead of f, needs no
Hamiltonian simulation, and carries a sign ambiguity (the Grover eigenphases
come in +- pairs) which a dummy axis with known slope resolves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import AliasingError, AmbiguityError, DomainError
from .gaw import (GridSpec, GradientRunResult, _readout, check_nyquist, marginals_of,
                  stencil_reach, success_probability, tensor_from_phase)
from .market import PricingProblem
from .qae import qae_distribution, theta_of_f
from .stencil import central_diff_coefficients
from .surface import PriceField, price_field

_M1 = central_diff_coefficients(1)


@dataclass(frozen=True)
class SfqgConfig:
    """Grid, bound D on |d theta/dx_i| and optional sign-resolving dummy axis.

    ``dummy_slope`` is the theta-gradient given to the extra axis; the default
    0.25*D reads out at index N/4.
    """

    grid: GridSpec
    D: float = 1.0
    scale4_ok: bool = True
    dummy_slope: float | None = None

    def __post_init__(self):
        if self.D <= 0:
            raise DomainError("D must be positive")

    @property
    def S(self) -> float:
        return self.grid.N / (self.D * self.grid.l)

    @property
    def slope(self) -> float:
        return 0.25 * self.D if self.dummy_slope is None else self.dummy_slope


def combination_amplitude(f_plus, f_minus):
    """sqrt(f+) sqrt(1-f-) - sqrt(1-f+) sqrt(f-) = sin(theta(+x) - theta(-x)).

    Both inputs must be at most 1/4 so that the 4f-scaled probability oracle
    stays valid.
    """
    fp = np.asarray(f_plus, dtype=float)
    fm = np.asarray(f_minus, dtype=float)
    if np.any(fp > 0.25 + 1e-15) or np.any(fm > 0.25 + 1e-15) or np.any(fp < 0) or np.any(fm < 0):
        raise DomainError("combination oracle needs 0 <= f <= 1/4 at every stencil point")
    amp = np.sqrt(fp) * np.sqrt(1 - fm) - np.sqrt(1 - fp) * np.sqrt(fm)
    ref = np.sin(np.arcsin(np.sqrt(fp)) - np.arcsin(np.sqrt(fm)))
    if np.max(np.abs(amp - ref), initial=0.0) > 1e-12:
        raise AssertionError("combination amplitude disagrees with the sine identity")
    return amp if amp.ndim else float(amp)


def theta_difference(fld: PriceField, grid: GridSpec) -> np.ndarray:
    """(theta(x0+delta_j) - theta(x0-delta_j)) on the grid via the combination amplitude."""
    F = fld.grid([grid.offsets + c for c in grid.center])
    return np.arcsin(combination_amplitude(F, np.flip(F)))


def sfqg_phase(fld: PriceField, config: SfqgConfig) -> np.ndarray:
    """Noise-free phase 2 pi S (theta(x) - theta(-x)) / 2, with S = N/(D l).

    With a dummy axis the tensor gains one trailing dimension carrying the
    known theta-slope.
    """
    g = config.grid
    return 2 * np.pi * config.S * theta_difference(fld, g) / 2


def add_dummy_axis(phase: np.ndarray, config: SfqgConfig) -> np.ndarray:
    """Append the dummy axis: phase += 2 pi S * slope * delta."""
    d = config.grid.offsets
    extra = 2 * np.pi * config.S * config.slope * d
    return phase[..., None] + extra


def sfqg_phase_tensor(problem: PricingProblem, config: SfqgConfig, eps_phase: float, seed: int,
                      fld: PriceField | None = None, dummy: bool = False) -> np.ndarray:
    """Normalized state exp(2 pi i S (theta(x) - theta(-x))/2 + i eta) / sqrt(N^k)."""
    config.grid.check_memory()
    fld = default_theta_field(problem, config) if fld is None else fld
    phase = sfqg_phase(fld, config)
    if dummy:
        phase = add_dummy_axis(phase, config)
    return tensor_from_phase(phase, eps_phase, seed)


def default_theta_field(problem: PricingProblem, config: SfqgConfig) -> PriceField:
    reach = stencil_reach(config.grid, _M1) + max(abs(c) for c in config.grid.center)
    return price_field(problem, half_width=reach * (1 + 1e-9))


def chain_rule_to_f(theta_grads, theta0: float) -> np.ndarray:
    """df/dx = dtheta/dx * sin(2 theta0)."""
    if not 0 <= theta0 <= np.pi / 2 + 1e-15:
        raise DomainError("theta0 must lie in [0, pi/2]")
    return np.asarray(theta_grads, dtype=float) * np.sin(2 * theta0)


def resolve_sign(run_with_dummy: GradientRunResult, slope_readout: float | None = None) -> int:
    """+1 if the dummy axis (last marginal) reads positive, else -1.

    ``slope_readout`` is the dummy's expected readout h~/N (default 1/4);
    if the masses near +slope and -slope differ by less than 10 percent the
    branch is ambiguous.
    """
    p = run_with_dummy.marginals[-1]
    N = len(p)
    s = 0.25 if slope_readout is None else slope_readout
    plus = success_probability(p, s)
    minus = success_probability(p, -s)
    if abs(plus - minus) < 0.1:
        raise AmbiguityError(f"dummy axis is ambiguous (mass {plus:.3f} vs {minus:.3f})")
    h = np.argmax(p)
    signed = h if h < N // 2 else h - N
    return 1 if signed > 0 else -1


def sfqg_query_count(grid: GridSpec, D: float = 1.0) -> dict:
    """Grover applications S = N/(D l), plus the A-call and width conventions."""
    S = int(round(grid.N / (D * grid.l)))
    return {"grover": S, "a_calls": 2 * S, "register_width_factor": 2}


def estimate_D(fld: PriceField, h: float = 0.1, factor: float = 2.4) -> float:
    """Pilot bound on |d theta / dx_i| from a coarse 2-point difference.

    ``factor`` > 2 keeps every readout N dtheta/D inside (-N/2, N/2).
    """
    k = fld.problem.k
    off = np.vstack([np.eye(k) * h / 2, -np.eye(k) * h / 2])
    th = theta_of_f(fld.values(off))
    return factor * float(np.max(np.abs(th[:k] - th[k:]) / h))


@dataclass
class SfqgRunResult:
    theta_run: GradientRunResult  # branch-resolved theta readout
    sign: int
    theta0: float
    theta_grads: np.ndarray  # modal readout * D, sign corrected
    f_grads: np.ndarray  # chain-ruled, problem units
    physical: np.ndarray
    query: dict
    reference_theta: np.ndarray | None = None
    success_probs: np.ndarray | None = None
    success_se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def run_sfqg(problem: PricingProblem, config: SfqgConfig, eps_phase: float = 1e-4,
             seeds=30, reference_f=None, fld: PriceField | None = None, seed: int = 0,
             branch: int = 1, theta0_mode: str = "exact", theta0_shots: int = 1) -> SfqgRunResult:
    """Emulate the algorithm with a dummy axis on one Grover-eigenphase branch.

    ``branch=-1`` emulates the negative-phase branch (conjugated tensor);
    the dummy axis then reads negative and resolve_sign flips the estimates.
    ``reference_f`` is the true f-gradient (normalized units), converted to
    theta-gradients with the exact theta0 for success statistics, which are
    computed on the sign-resolved readout in units of dtheta/D.
    """
    g = config.grid
    if isinstance(seeds, int):
        seeds = [int(rng.stream_key(seed, f"noise-seed-{i}") >> 1) for i in range(seeds)]
    fld = default_theta_field(problem, config) if fld is None else fld
    f0 = float(fld.values(np.zeros((1, problem.k)))[0])
    if f0 > 0.25:
        raise DomainError("f(x0) exceeds 1/4; rescale the payoff before the combination oracle")
    theta0_exact = float(theta_of_f(f0))
    ref_theta = None
    if reference_f is not None:
        ref_theta = np.asarray(reference_f) / np.sin(2 * theta0_exact)
        check_nyquist(ref_theta / config.D, g.N, "theta-gradient / D")
    if config.slope / config.D >= 0.5 - 1.0 / g.N:
        raise AliasingError("dummy slope too close to the Nyquist edge")
    base = add_dummy_axis(sfqg_phase(fld, config), config)
    if branch < 0:
        base = -base
    gk = GridSpec(g.k + 1, g.n, g.l)
    gk.check_memory()
    runs = []
    for s in seeds:
        t = tensor_from_phase(base, eps_phase, s)
        amp = np.fft.fftn(t, norm="ortho")
        probs = amp.real**2 + amp.imag**2
        runs.append(marginals_of(probs / probs.sum()))
    margs = [np.mean([r[ax] for r in runs], axis=0) for ax in range(g.k + 1)]
    raw = _readout(margs, 1.0, None, None, None, None)
    sign = resolve_sign(raw, config.slope / config.D)
    # sign-resolved marginals: mirror every axis on the negative branch
    fixed = margs if sign > 0 else [np.roll(np.flip(p), 1) for p in margs]
    ref_units = None if ref_theta is None else np.append(ref_theta / config.D, config.slope / config.D)
    run = _readout(fixed, 1.0, ref_units, None, None,
                   {"n": g.n, "l": g.l, "D": config.D, "eps_phase": eps_phase, "seeds": list(seeds),
                    "field": fld.meta})
    succ = se = None
    if ref_theta is not None:
        per_seed = []
        for r in runs:
            rr = r if sign > 0 else [np.roll(np.flip(p), 1) for p in r]
            per_seed.append([success_probability(rr[ax], ref_units[ax]) for ax in range(g.k)])
        per_seed = np.array(per_seed)
        succ = per_seed.mean(axis=0)
        se = per_seed.std(axis=0, ddof=1) / np.sqrt(len(runs)) if len(runs) > 1 else np.zeros(g.k)
    theta_grads = run.normalized[:g.k] * config.D
    if theta0_mode == "exact":
        theta0 = theta0_exact
    elif theta0_mode == "measured":
        # canonical QAE on the pricing oracle (4N-point register); modal outcome of the shots
        Nq = 4 * g.N
        y = rng.generator(seed, "theta0-shots").choice(Nq, size=theta0_shots, p=qae_distribution(f0, Nq))
        y = np.minimum(y, Nq - y)  # both eigenphase branches give the same estimate
        theta0 = float(np.pi * np.bincount(y, minlength=Nq).argmax() / Nq)
    else:
        raise DomainError(f"unknown theta0_mode {theta0_mode!r}")
    fg = chain_rule_to_f(theta_grads, theta0)
    return SfqgRunResult(run, sign, theta0, theta_grads, fg, fg * problem.to_physical,
                         sfqg_query_count(g, config.D), ref_theta, succ, se,
                         {"theta0_exact": theta0_exact, "theta0_mode": theta0_mode})


def naive_product_marginals(fld: PriceField, config: SfqgConfig) -> list:
    """Readout of the uncorrected product of the +x and -x Grover oracles.

    The product carries four incoherent branches with phases
    +-(theta(x) - theta(-x)) and +-(theta(x) + theta(-x)); the sum terms are
    nearly constant over the grid and put a spurious peak at zero.
    """
    g = config.grid
    F = fld.grid([g.offsets + c for c in g.center])
    tp, tm = theta_of_f(F), theta_of_f(np.flip(F))
    out = None
    for comb in (tp - tm, tm - tp, tp + tm, -(tp + tm)):
        t = tensor_from_phase(2 * np.pi * config.S * comb / 2)
        amp = np.fft.fftn(t, norm="ortho")
        m = marginals_of(np.abs(amp) ** 2)
        out = m if out is None else [a + b for a, b in zip(out, m)]
    return [p / 4 for p in out]
