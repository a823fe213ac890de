import numpy as np
import pytest

from greeklab.errors import DomainError
from greeklab.market import analytic_gradient, basket_problem, normalized_gradient, vanilla_problem
from greeklab.surface import ChebyshevField, ClosedFormField, MonteCarloField, price_field


def test_closed_form_grid_matches_pointwise():
    fld = ClosedFormField(vanilla_problem(3))
    coords = [np.linspace(-0.1, 0.1, 4), np.linspace(-0.2, 0.2, 3), np.linspace(-0.3, 0.3, 5)]
    G = fld.grid(coords)
    mesh = np.stack(np.meshgrid(*coords, indexing="ij"), -1).reshape(-1, 3)
    np.testing.assert_allclose(G.ravel(), fld.values(mesh), rtol=1e-14)


def test_closed_form_gradient():
    p = vanilla_problem()
    g = price_field(p).gradient(1e-5)
    np.testing.assert_allclose(g, normalized_gradient(p, analytic_gradient(p)), atol=1e-8)


def test_chebyshev_reproduces_node_values_and_smooth_functions():
    # the interpolant of the closed form converges spectrally on a small box
    p = vanilla_problem(2)
    cf = ClosedFormField(p)

    class Exact(MonteCarloField):
        def values(self, offsets):
            return cf.values(offsets)

    import greeklab.surface as S
    orig = S.MonteCarloField
    S.MonteCarloField = Exact
    try:
        ch = ChebyshevField(p, 0.1, nodes=7)
    finally:
        S.MonteCarloField = orig
    pts = np.random.default_rng(0).uniform(-0.1, 0.1, (50, 2))
    np.testing.assert_allclose(ch.values(pts), cf.values(pts), atol=1e-7)
    np.testing.assert_allclose(ch.gradient(), cf.gradient(1e-6), atol=1e-6)
    G = ch.grid([np.linspace(-0.1, 0.1, 3)] * 2)
    np.testing.assert_allclose(G, cf.grid([np.linspace(-0.1, 0.1, 3)] * 2), atol=1e-7)


def test_chebyshev_box():
    p = basket_problem(mc_paths=2000)
    ch = ChebyshevField(p, 0.1, nodes=3)
    with pytest.raises(DomainError):
        ch.values([[0.2, 0, 0, 0]])
    assert ch.meta["method"] == "chebyshev"


def test_basket_field_tracks_direct_mc(basket_field, basket):
    pts = np.array([[0.05, -0.05, 0.02, 0.1], [-0.1, 0.1, -0.1, -0.05]])
    direct = MonteCarloField(basket).values(pts)
    np.testing.assert_allclose(basket_field.values(pts), direct, atol=3e-4)


def test_field_dispatch():
    assert isinstance(price_field(vanilla_problem()), ClosedFormField)
    with pytest.raises(DomainError):
        price_field(basket_problem(mc_paths=100))
    with pytest.raises(DomainError):
        price_field(vanilla_problem(), method="bogus")
