import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greeklab.errors import DomainError
from greeklab.market import basket_problem
from greeklab.qae import (AmplitudeEncoding, f_of_theta, grid_size, phase_distribution, phase_estimation_pmf,
                          qae_distribution, qae_estimate_map, sqg_greeks, sqg_query_count, theta_of_f)


@given(st.floats(0, 1))
def test_theta_round_trip(f):
    assert f_of_theta(theta_of_f(f)) == pytest.approx(f, abs=1e-12)


def test_theta_domain():
    with pytest.raises(DomainError):
        theta_of_f(1.1)
    with pytest.raises(DomainError):
        f_of_theta(2.0)
    e = AmplitudeEncoding.from_f(0.25)
    assert e.theta == pytest.approx(np.pi / 6)


@pytest.mark.parametrize("N", [2, 16, 64, 1024])
def test_pmf_limits_and_normalization(N):
    assert phase_estimation_pmf(N, 0.0) == 1.0
    assert phase_estimation_pmf(N, 3.0) == 1.0
    assert phase_estimation_pmf(N, 1e-12) == pytest.approx(1.0, abs=1e-9)
    for g in (0.0, 0.123, -0.4, 0.5):
        p = phase_estimation_pmf(N, np.arange(N) / N - g)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)


def test_pmf_vanishes_off_grid_for_exact_phase():
    p = phase_distribution(16, 3 / 16).probabilities
    assert p[3] == pytest.approx(1.0) and np.allclose(np.delete(p, 3), 0, atol=1e-20)


@given(st.floats(0.0, 1.0))
@settings(max_examples=50)
def test_qae_distribution_symmetric(f):
    p = qae_distribution(f, 32)
    assert p.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(p[1:], p[1:][::-1], atol=1e-12)


def test_qae_map():
    assert qae_estimate_map(0, 16) == 0.0
    assert qae_estimate_map(8, 16) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        qae_estimate_map(16, 16)


@pytest.mark.parametrize("eps,N", [(0.0625, 16), (0.02, 64), (0.1, 16), (1.0, 1)])
def test_grid_size(eps, N):
    assert grid_size(eps) == N


def test_sqg_query_count():
    assert sqg_query_count(4, 0.0625) == 256


def test_sqg_estimates_track_exact_quotient():
    r = sqg_greeks(basket_problem(mc_paths=10_000), 0.0625, seed=3, paths=20_000)
    assert r.query_count == 256 and r.N == 16
    # one QAE measurement per axis, errors scale with the 2B amplitude range
    assert np.all(np.abs(r.greeks - r.exact_expectations) <= 2 * r.shift["scale"] * np.pi / r.N)
