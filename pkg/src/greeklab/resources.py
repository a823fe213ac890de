"""Closed-form query-cost and advantage calculators."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .stencil import DifferenceScheme, central_diff_coefficients


def lambert_w(x: float) -> float:
    """Principal branch W0 on x >= 0 by Halley iteration."""
    if x < 0 or math.isnan(x):
        raise DomainError("lambert_w is implemented for x >= 0")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x < math.e:
        w = math.log1p(x) * (1 - math.log1p(math.log1p(x)) / (2 + math.log1p(x)))
    else:
        L1 = math.log(x)
        L2 = math.log(L1)
        w = L1 - L2 + L2 / L1
    for _ in range(100):
        ew = math.exp(w)
        fw = w * ew - x
        step = fw / (ew * (w + 1) - (w + 2) * fw / (2 * w + 2))
        w -= step
        if abs(step) <= 1e-15 * max(1.0, abs(w)):
            break
    return w


@dataclass(frozen=True)
class HamSimQuery:
    """Coherent Hamiltonian simulation of time t to phase accuracy eps_phase."""

    t: float
    eps_phase: float
    beta: float = 0.5

    def __post_init__(self):
        if self.eps_phase <= 0:
            raise DomainError("eps_phase must be positive")
        if not 0 < self.beta < 1:
            raise DomainError("beta must be in (0, 1)")


def r_fn(tau: float, eps: float) -> float:
    """r(tau, eps) = |tau| exp(W(ln(1/eps) / |tau|))."""
    tau = abs(tau)
    if tau == 0:
        return 0.0
    return tau * math.exp(lambert_w(math.log(1 / eps) / tau))


def gamma_fn(eps: float, delta: float) -> int:
    """Two-term maximum in the phase-accuracy overhead, rounded up as displayed."""
    w1 = lambert_w(8 / (math.pi * eps**2))
    w2 = lambert_w(512 / (math.e**2 * math.pi * eps**2))
    a = math.e / delta * math.sqrt(w1 * w2)
    b = math.sqrt(2) * lambert_w(8 * math.sqrt(2) / (math.sqrt(math.pi) * delta * eps) * math.sqrt(w1))
    return 2 * math.ceil(max(a, b)) + 1


def n_u(query: HamSimQuery) -> int:
    """N_U(t, eps, beta) = 2 floor(r(e|t|/(2 beta), 5 eps/24) / 2) + gamma(eps/3, 1-beta) + 1."""
    q = query
    r = r_fn(math.e * abs(q.t) / (2 * q.beta), 5 * q.eps_phase / 24)
    return int(2 * math.floor(r / 2) + gamma_fn(q.eps_phase / 3, 1 - q.beta) + 1)


# Accounting that reproduces every published N_o: the phase term with
# coefficient a is simulated for time t = 2 S |a| (phase in units of pi), and
# each U query costs two A-calls (A and its inverse).
A_CALLS_PER_U = 2


def simulation_time(S: float, a: float) -> float:
    return 2.0 * S * abs(a)


def n_o(scheme: DifferenceScheme, S: float, eps_phase: float, beta: float = 0.5) -> int:
    """Total A-oracle calls for the 2m-point phase oracle."""
    if S <= 0:
        raise DomainError("S must be positive")
    total = 0
    for l in scheme.offsets:
        a = float(scheme.coefficients[int(l)])
        total += A_CALLS_PER_U * n_u(HamSimQuery(simulation_time(S, a), eps_phase, beta))
    return total


def smoothness_params(k: int, epsilon: float, c: float = 1.0) -> dict:
    """Order m = ceil(ln(c sqrt(k)/eps)) and spacing l of the smoothness theorem."""
    if k < 1 or epsilon <= 0 or epsilon >= c:
        raise DomainError("need k >= 1 and 0 < epsilon < c")
    m = math.ceil(math.log(c * math.sqrt(k) / epsilon))
    cmk = c * m * math.sqrt(k)
    inv_l = 9 * cmk * (81 * 8 * 42 * math.pi * cmk / epsilon) ** (1 / (2 * m))
    return {"m": m, "l": 1 / inv_l}


def register_size(epsilon: float) -> int:
    return int(2 ** math.ceil(math.log2(1 / epsilon) - 1e-12))


def theoretical_query_count(k: int, epsilon: float, c: float = 1.0, eps_phase: float = 1e-4,
                            beta: float = 0.5) -> dict:
    """N_o for the theorem's (m, l) with N = 2^ceil(log2(1/eps))."""
    p = smoothness_params(k, epsilon, c)
    N = register_size(epsilon)
    S = N / p["l"]
    return {**p, "N": N, "S": S,
            "N_o": n_o(central_diff_coefficients(p["m"]), S, eps_phase, beta)}


def asymptotic_table(k: int, epsilon: float) -> dict:
    """Order-of-magnitude oracle counts with unit constants.

    GAW uses the theorem's (m, l) and the N_o accounting above with
    eps_phase = epsilon, c = 1 and N = 1/epsilon.
    """
    if k < 1 or epsilon <= 0:
        raise DomainError("need k >= 1 and epsilon > 0")
    out = {"CFD": k / epsilon**3, "CFD-CRN": k / epsilon**2, "SQG": k / epsilon}
    if epsilon < 1:
        p = smoothness_params(k, epsilon)
        S = (1 / epsilon) / p["l"]
        out["GAW"] = float(n_o(central_diff_coefficients(p["m"]), S, epsilon))
    else:
        out["GAW"] = 1.0
    return out


@dataclass(frozen=True)
class AdvantageInput:
    total_t_depth: float
    classical_runtime: float
    qpus: int = 1

    def __post_init__(self):
        if self.total_t_depth <= 0 or self.classical_runtime <= 0 or self.qpus < 1:
            raise DomainError("all advantage inputs must be positive")


def advantage_clock_rate(inp: AdvantageInput) -> dict:
    """Logical clock rate needed to match the classical runtime."""
    serial = inp.total_t_depth / inp.classical_runtime
    return {"serial_rate_hz": serial, "per_qpu_rate_hz": serial / inp.qpus}
