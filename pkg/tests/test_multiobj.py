import numpy as np
import pytest

from greeklab.errors import AliasingError, DomainError, NormalizationError
from greeklab.gaw import GridSpec, inverse_qft_readout, tensor_from_phase
from greeklab.market import basket_problem
from greeklab.montecarlo import asset_paths, simulate_paths
from greeklab.multiobj import (BASKET_OBJECTIVES, MultiObjective, basket_objectives, constant_objectives,
                               linear_readout_function, multiobj_gradient_readout, multiobj_phase)
from greeklab.qae import phase_estimation_pmf


def test_linear_function_basics():
    mo = MultiObjective(np.array([[0.2, 0.4], [1.0, 0.0]]))
    assert linear_readout_function(mo, [0.0, 0.0]) == 0.0
    assert linear_readout_function(mo, [0.5, 0.0]) == pytest.approx(0.15)
    one = MultiObjective(np.array([[0.1, 0.3, 0.5]]))
    assert linear_readout_function(one, [1.0]) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        linear_readout_function(mo, [0.1])


def test_validation():
    with pytest.raises(NormalizationError):
        MultiObjective(np.array([[1.2]]))
    with pytest.raises(DomainError):
        MultiObjective(np.array([[0.2]]), D=0.0)
    with pytest.raises(NormalizationError):
        linear_readout_function(MultiObjective(np.ones((3, 2))), [0.45, 0.45, 0.45])


def test_constants():
    r = multiobj_gradient_readout(constant_objectives([0.2, 0.7]), 6)
    assert np.all(np.abs(r.estimates - [0.2, 0.7]) <= 1 / 64)


def test_zero_objectives_read_zero():
    r = multiobj_gradient_readout(constant_objectives([0.0, 0.0, 0.0]), 4)
    np.testing.assert_array_equal(r.estimates, 0.0)
    for p in r.marginals:
        assert p[0] == pytest.approx(1.0)


def test_aliasing():
    with pytest.raises(AliasingError):
        multiobj_gradient_readout(constant_objectives([0.995]), 6)


@pytest.mark.parametrize("mu", [[0.2, 0.7], [0.013, 0.5, 0.31]])
def test_joint_readout_factorizes(mu):
    mo = constant_objectives(mu, D=len(mu) / 2)
    g = GridSpec(len(mu), 4, 1.0)
    res = inverse_qft_readout(tensor_from_phase(multiobj_phase(mo, g)))
    for ax, m in enumerate(res.marginals):
        np.testing.assert_allclose(m, phase_estimation_pmf(16, np.arange(16) / 16 - mu[ax] / mo.D), atol=1e-8)


def test_query_count_independent_of_k():
    q = {multiobj_gradient_readout(constant_objectives([0.1] * k, D=k), 4).query_count for k in (1, 2, 3)}
    assert len(q) == 1


@pytest.fixture(scope="module")
def basket_mo():
    return basket_objectives(paths=50_000, seed=4)


def test_random_weights_match_direct_mc(basket_mo):
    # direct estimate: each objective on its own independent path set
    p = basket_problem(mc_paths=10_000)
    direct, se = [], []
    for i, fn in enumerate(BASKET_OBJECTIVES.values()):
        b = simulate_paths(p.model, 50_000, 100 + i, "direct")
        v = fn(asset_paths(b, p.model.spots, p.model.vols, p.model.rate, p.model.maturity), p)
        direct.append(v.mean())
        se.append(v.std(ddof=1) / np.sqrt(v.size))
    c = np.random.default_rng(9).uniform(-0.3, 0.3, 3)
    combo = c @ np.array(direct) / basket_mo.D
    se_c = np.sqrt((c**2) @ (np.array(se) ** 2 + basket_mo.standard_errors() ** 2)) / basket_mo.D
    assert abs(linear_readout_function(basket_mo, c) - combo) <= 3 * se_c


def test_basket_readout(basket_mo):
    r = multiobj_gradient_readout(basket_mo, 6, eps_phase=1e-4)
    assert np.all(np.abs(r.estimates - r.expectations) <= r.resolution)


def test_larger_D_costs_resolution():
    mu = [0.3, 0.15]
    errs = []
    for D in (1.0, 4.0):
        r = multiobj_gradient_readout(constant_objectives(mu, D), 5)
        errs.append(np.abs(r.estimates - mu).max())
        assert r.resolution == pytest.approx(D / 32)
    assert errs[1] >= errs[0]
