import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from stefan_limit.grid import (Grid1D, ScalarField, SpaceBump, SpaceTimeField, SupportError,
                               TestFunction, Window, bump, bump_d1, bump_d2, central_dx,
                               cumulative_trapezoid, dictionary, field_from_csv, field_to_csv,
                               integrate_block, integrate_space, integrate_space_time,
                               integrate_time, l2_norm, laplacian, pair_space_time,
                               space_time_l2_norm, sup_norm)
from stefan_limit.solver import BoundarySpec, EndpointBC


def test_grid_basics():
    g = Grid1D()
    assert g.h == pytest.approx(0.005) and g.dt == pytest.approx(2.5e-4)
    assert g.shape == (4001, 401)
    assert g.x[0] == -1.0 and g.x[-1] == 1.0 and g.t[-1] == 1.0
    assert g.level_of(0.5) == 2000


@pytest.mark.parametrize("kw", [dict(n_cells=0), dict(n_cells=7), dict(n_steps=0),
                                dict(x_lo=1.0, x_hi=0.0), dict(t_end=0.0)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        Grid1D(**kw)


def test_field_validation():
    g = Grid1D(n_cells=8, n_steps=4)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(5))
    with pytest.raises(ValueError):
        SpaceTimeField(g, np.full(g.shape, np.nan))


def test_laplacian_examples():
    g = Grid1D(-1, 1, 200, 1, 10)
    assert sup_norm(laplacian(ScalarField(g, np.full(201, 3.0))).values) == 0.0
    lap = laplacian(ScalarField(g, g.x ** 2)).values
    np.testing.assert_allclose(lap[1:-1], 2.0, rtol=1e-9)
    lap = laplacian(ScalarField(g, np.sin(np.pi * g.x))).values
    err = np.abs(lap[1:-1] + np.pi ** 2 * np.sin(np.pi * g.x[1:-1])).max()
    assert err <= 2 * np.pi ** 4 * g.h ** 2 / 12


def test_laplacian_dirichlet_ghost():
    g = Grid1D(0, 1, 10, 1, 10)
    bc = BoundarySpec(EndpointBC.dirichlet(1.0), EndpointBC.dirichlet(1.0))
    lap = laplacian(ScalarField(g, np.ones(11)), bc).values
    assert np.all(lap == 0.0)


@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_laplacian_reflection_symmetry(vals):
    g = Grid1D(-1, 1, 16, 1, 4)
    half = np.array(vals)
    f = np.concatenate([half, half[-2::-1]])
    lap = laplacian(ScalarField(g, f)).values
    lap_rev = laplacian(ScalarField(g, f[::-1])).values
    np.testing.assert_allclose(lap_rev, lap[::-1], atol=1e-9)


def test_bump_derivatives_against_symbolic():
    s = sp.symbols("s")
    b = sp.exp(-1 / (1 - s ** 2))
    d1, d2 = sp.lambdify(s, sp.diff(b, s)), sp.lambdify(s, sp.diff(b, s, 2))
    pts = np.linspace(-0.99, 0.99, 41)
    np.testing.assert_allclose(bump_d1(pts), [d1(p) for p in pts], rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(bump_d2(pts), [d2(p) for p in pts], rtol=1e-12, atol=1e-300)
    assert bump(1.0) == 0.0 and bump_d1(-1.2) == 0.0 and bump_d2(1.0) == 0.0


def test_test_function_partials_by_finite_differences():
    g = Grid1D(-1, 1, 400, 1, 400)
    eta = TestFunction(0.1, 0.5, 0.4, 0.3, amplitude=2.0)
    e = eta.eta(g)

    def close(fd, exact):
        # second-order differences: error a small fraction of the derivative scale
        assert np.abs(fd - exact).max() <= 2e-2 * np.abs(exact).max()

    close(np.gradient(e, g.dt, axis=0)[1:-1], eta.eta_t(g)[1:-1])
    close(np.gradient(e, g.h, axis=1)[:, 1:-1], eta.eta_x(g)[:, 1:-1])
    close((e[:, :-2] - 2 * e[:, 1:-1] + e[:, 2:]) / g.h ** 2, eta.eta_xx(g)[:, 1:-1])


def test_block_restriction_is_exact():
    g = Grid1D()
    eta = TestFunction(0.2, 0.4, 0.15, 0.08)
    b = eta.block(g)
    full = integrate_space_time(g, eta.eta_xx(g))
    assert integrate_block(g, eta.eta_xx(g, b), b) == pytest.approx(full, rel=1e-12)
    np.testing.assert_array_equal(eta.eta(g, b), eta.eta(g)[b])


def test_bump_quadrature_against_refined_reference():
    """Trapezoid quadrature of each dictionary bump vs a 10x refined one."""
    g = Grid1D()
    fine = Grid1D(g.x_lo, g.x_hi, 10 * g.n_cells, g.t_end, 10 * g.n_steps)
    for eta in dictionary(Window.default_for(g)):
        # product structure: integrate each factor on its own axis
        coarse = (integrate_space(g, bump((g.x - eta.xc) / eta.rx))
                  * float(np.trapezoid(bump((g.t - eta.tc) / eta.rt), dx=g.dt)))
        ref = (integrate_space(fine, bump((fine.x - eta.xc) / eta.rx))
               * float(np.trapezoid(bump((fine.t - eta.tc) / eta.rt), dx=fine.dt)))
        assert abs(coarse - ref) <= 1e-6 * abs(ref)
        assert integrate_space_time(g, eta.eta(g)) == pytest.approx(coarse, rel=1e-12)


def test_pairing_examples():
    g = Grid1D()
    eta = TestFunction(0.0, 0.5, 0.3, 0.16)
    assert pair_space_time(SpaceTimeField(g, np.zeros(g.shape)), eta) == 0.0
    ones = SpaceTimeField(g, np.ones(g.shape))
    assert abs(pair_space_time(ones, eta, "t")) <= g.h ** 2 + g.dt ** 2
    # wider bump: the second x-derivative integrates to zero up to quadrature error
    assert abs(pair_space_time(ones, eta, "xx")) <= 10 * (g.h ** 2 + g.dt ** 2)
    coarse = Grid1D(n_cells=100, n_steps=1000)
    fine_err = abs(pair_space_time(ones, eta, "xx"))
    assert fine_err < abs(pair_space_time(SpaceTimeField(coarse, np.ones(coarse.shape)), eta, "xx"))


def test_pairing_support_error():
    g = Grid1D()
    with pytest.raises(SupportError):
        pair_space_time(SpaceTimeField(g, np.zeros(g.shape)), TestFunction(0.9, 0.5, 0.2, 0.1))


def test_integrate_time_examples():
    g = Grid1D(0, 1, 8, 1, 100)
    c = SpaceTimeField(g, np.full(g.shape, 3.0))
    assert integrate_time(c, 2, 0.0, 0.5) == pytest.approx(1.5)
    lin = SpaceTimeField(g, np.repeat(g.t[:, None], 9, axis=1))
    assert integrate_time(lin, 4, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert integrate_time(lin, 4, 0.3, 0.3) == 0.0
    with pytest.raises(ValueError):
        integrate_time(lin, 0, 0.6, 0.2)


def test_cumulative_trapezoid_exact_on_linear():
    t = np.linspace(0, 1, 11)[:, None]
    out = cumulative_trapezoid(t, 0.1, start=3)
    np.testing.assert_allclose(out[3:, 0], (t[3:, 0] ** 2 - t[3, 0] ** 2) / 2, atol=1e-15)
    assert np.all(out[:4] == 0.0)


def test_norms():
    g = Grid1D(0, 1, 100, 1, 10)
    assert sup_norm(np.zeros(5)) == 0.0 and sup_norm(np.array([-2.0, 1.0])) == 2.0
    f = ScalarField(g, np.sin(np.pi * g.x))
    assert l2_norm(f) == pytest.approx(math.sqrt(0.5), rel=1e-4)
    st_f = SpaceTimeField(g, np.ones(g.shape))
    assert space_time_l2_norm(st_f) == pytest.approx(1.0)


def test_central_dx_exact_on_linear():
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(central_dx(3 * x + 1, 0.1), 3.0)


def test_window_and_dictionary():
    g = Grid1D()
    w = Window.default_for(g)
    assert (w.x_lo, w.x_hi, w.t_lo, w.t_hi) == pytest.approx((-0.75, 0.75, 0.1, 0.9))
    dic = dictionary(w)
    assert len(dic) == 18
    for eta in dic:
        eta.check_inside(w.x_lo, w.x_hi, w.t_lo, w.t_hi)
    assert len(dictionary(w, 4, (0.1, 0.15, 0.18))) == 48
    with pytest.raises(ValueError):
        dictionary(w, 3, (0.3,))
    with pytest.raises(ValueError):
        Window(-2, 0, 0.1, 0.5).check_inside(g)


def test_space_bump():
    g = Grid1D()
    b = SpaceBump(0.0, 0.5)
    assert b.eta(g).max() == pytest.approx(math.exp(-1))
    with pytest.raises(SupportError):
        b.check_inside(-0.2, 1.0)


def test_csv_round_trip_and_stride():
    g = Grid1D(0, 1, 8, 1, 10)
    vals = np.random.default_rng(3).normal(size=g.shape)
    x, t, back = field_from_csv(field_to_csv(SpaceTimeField(g, vals)))
    np.testing.assert_array_equal(back, vals)
    np.testing.assert_array_equal(x, g.x)
    np.testing.assert_array_equal(t, g.t)
    _, t3, v3 = field_from_csv(field_to_csv(SpaceTimeField(g, vals), stride=3))
    np.testing.assert_array_equal(t3, g.t[[0, 3, 6, 9, 10]])
    np.testing.assert_array_equal(v3, vals[[0, 3, 6, 9, 10]])
