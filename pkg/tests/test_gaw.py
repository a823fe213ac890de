import numpy as np
import pytest

from greeklab.errors import AliasingError, DomainError, ResourceError
from greeklab.gaw import (GridSpec, check_nyquist, gaw_query_count, inverse_qft_readout, l_ladder,
                          marginals_of, phase_array, run_gaw, search_parameters, success_probability,
                          tensor_from_phase)
from greeklab.market import analytic_gradient, normalized_gradient, vanilla_problem
from greeklab.qae import phase_estimation_pmf
from greeklab.stencil import central_diff_coefficients
from greeklab.surface import PriceField


class Linear(PriceField):
    """f(x) = c + g.x, for which every stencil is exact."""

    def __init__(self, g, c=0.3):
        self.g = np.asarray(g, dtype=float)
        self.c = c
        self.problem = None
        self.meta = {"method": "linear"}

    def values(self, offsets):
        return self.c + np.atleast_2d(offsets) @ self.g


def test_grid_geometry():
    g = GridSpec(2, 3, 0.5)
    assert g.N == 8 and g.S == 16 and g.size == 64
    np.testing.assert_allclose(g.offsets, (np.arange(8) - 3.5) / 16)
    np.testing.assert_array_equal(g.signed(), [0, 1, 2, 3, -4, -3, -2, -1])
    with pytest.raises(DomainError):
        GridSpec(0, 3, 0.5)
    with pytest.raises(DomainError):
        GridSpec(1, 3, -1.0)


def test_memory_guard():
    with pytest.raises(ResourceError):
        GridSpec(5, 6, 0.5).check_memory()
    GridSpec(5, 6, 0.5).check_memory(allow_large=True)
    with pytest.raises(ResourceError):
        GridSpec(2, 6, 0.5).check_memory(cap=1000)


@pytest.mark.parametrize("k,n", [(1, 6), (2, 4), (3, 3)])
def test_dft_unitarity(k, n, gen):
    t = gen.normal(size=(2**n,) * k) + 1j * gen.normal(size=(2**n,) * k)
    t /= np.linalg.norm(t)
    amp = np.fft.fftn(t, norm="ortho")
    assert abs(np.sum(np.abs(amp) ** 2) - 1) < 1e-9
    np.testing.assert_allclose(np.fft.ifftn(amp, norm="ortho"), t, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_linear_function_readout_is_exact(m):
    # noise-free phases of a linear f factorize into per-axis phase-estimation pmfs
    grad = np.array([0.13, -0.271, 0.05])
    g = GridSpec(3, 4, 0.4)
    phase = phase_array(Linear(grad), g, central_diff_coefficients(m))
    res = inverse_qft_readout(tensor_from_phase(phase))
    for ax in range(3):
        expect = phase_estimation_pmf(g.N, np.arange(g.N) / g.N - grad[ax])
        np.testing.assert_allclose(res.marginals[ax], expect, atol=1e-8)


def test_readout_on_grid_point_is_certain():
    grad = np.array([3 / 16, -5 / 16])
    g = GridSpec(2, 4, 0.5)
    res = inverse_qft_readout(tensor_from_phase(phase_array(Linear(grad), g, central_diff_coefficients(1))),
                              reference=grad)
    np.testing.assert_allclose(res.normalized, grad)
    np.testing.assert_allclose(res.success_probs, 1.0)


def test_success_probability_window():
    p = np.zeros(16)
    p[[2, 3, 4, 5]] = 0.25
    assert success_probability(p, 3.5 / 16) == pytest.approx(0.5)
    assert success_probability(p, 3 / 16) == pytest.approx(0.75)


def test_marginals():
    probs = np.random.default_rng(0).random((4, 4, 4))
    probs /= probs.sum()
    for ax, m in enumerate(marginals_of(probs)):
        assert m.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(marginals_of(probs)[1], probs.sum(axis=(0, 2)))


def test_nyquist_check():
    check_nyquist([0.4, -0.3], 16)
    with pytest.raises(AliasingError):
        check_nyquist([0.45], 16)


def test_noise_is_seeded():
    ph = np.zeros((8, 8))
    a = tensor_from_phase(ph, 1e-2, 1)
    np.testing.assert_array_equal(a, tensor_from_phase(ph, 1e-2, 1))
    assert not np.array_equal(a, tensor_from_phase(ph, 1e-2, 2))
    assert np.max(np.abs(np.angle(a))) <= 1e-2 + 1e-15


def test_query_count_independent_of_k():
    s = central_diff_coefficients(1)
    assert len({gaw_query_count(s, GridSpec(k, 4, 0.25), 1e-4) for k in (1, 2, 4, 8)}) == 1


@pytest.mark.parametrize("mode", ["joint", "factorized"])
def test_vanilla_k2_numerical_row(mode):
    p = vanilla_problem(2)
    ref = normalized_gradient(p, analytic_gradient(p))
    r = run_gaw(p, GridSpec(2, 6, 0.65), central_diff_coefficients(1), 1e-4, 5, ref, mode=mode)
    assert r.query_count == 1976
    assert np.all(r.success_probs >= 0.80)
    np.testing.assert_allclose(r.estimates, analytic_gradient(p), atol=p.to_physical.max() / 64)


def test_modes_agree_for_separable_k1():
    p = vanilla_problem(1)
    ref = normalized_gradient(p, analytic_gradient(p))
    s = central_diff_coefficients(2)
    # noise streams differ between modes, so compare noise-free
    a = run_gaw(p, GridSpec(1, 6, 0.6), s, 0.0, 1, ref, mode="joint")
    b = run_gaw(p, GridSpec(1, 6, 0.6), s, 0.0, 1, ref, mode="factorized")
    np.testing.assert_allclose(a.marginals[0], b.marginals[0], atol=1e-12)


def test_unknown_mode():
    p = vanilla_problem(1)
    with pytest.raises(DomainError):
        run_gaw(p, GridSpec(1, 4, 0.5), central_diff_coefficients(1), seeds=1, mode="other")


def test_ladder():
    lad = l_ladder()
    assert lad[0] == pytest.approx(0.05) and lad[-1] <= 1.5
    np.testing.assert_allclose(lad[1:] / lad[:-1], 1.1)


def test_search_vanilla_k2():
    p = vanilla_problem(2)
    ref = normalized_gradient(p, analytic_gradient(p))
    lad = l_ladder(0.3, 1.5)
    s = search_parameters(p, 6, 0.80, ref, m_values=(1, 2), ladder=lad, seeds=3)
    feasible = [r for r in s.table if r["feasible"]]
    assert feasible and s.N_o == min(r["N_o"] for r in feasible)
    assert np.all(s.success_probs >= 0.80)
    # N_o falls with l, so within m the chosen l is the largest feasible one
    for r in s.table:
        if r["m"] == s.m and r["l"] > s.l:
            assert not r["feasible"]


def test_basket_gaw_row(basket, basket_bench, basket_grid, basket_field):
    r = run_gaw(basket, basket_grid, central_diff_coefficients(1), 1e-4, 10, basket_bench.gradient,
                fld=basket_field)
    assert r.query_count == 1600
    assert np.all(r.success_probs >= 0.80)
