import numpy as np
import pytest

from stefan_limit import presets
from stefan_limit.benchmarks import heat_mode
from stefan_limit.grid import Grid1D, ScalarField, SpaceBump
from stefan_limit.nonlinearity import NonlinearitySpec as F
from stefan_limit.nonlinearity import alpha_eps
from stefan_limit.solver import (APrioriBoundViolation, BoundarySpec, CflViolation, EndpointBC,
                                 NewtonDiverged, NewtonParams, ProblemSpec, comparison_check,
                                 energy_identity_residual, solve, solve_explicit_oracle,
                                 step_implicit)

# Frozen from the first oracle runs (observed value in the comment).
C_HEAT_ORACLE = 0.25       # implicit vs explicit, heat mode: 0.18 (dt + h^2)
C_KINK_ORACLE = 0.2        # mixed-sign data, first order in h: 0.12 h
C_LOGISTIC = 0.05          # logistic ODE vs closed form: 0.024 dt
C_ENERGY = 0.25            # energy identity on the heat mode: 0.17 (dt + h^2)

DIRICHLET0 = BoundarySpec(EndpointBC.dirichlet(0.0), EndpointBC.dirichlet(0.0))


def heat_spec(g):
    u0 = heat_mode(g.x, 0.0, 1, g.x_hi - g.x_lo, g.x_lo)
    u0[0] = u0[-1] = 0.0
    return ProblemSpec(g, 1.0, F.zero(), u0, DIRICHLET0, 1.0)


@pytest.mark.parametrize("eps", [1.0, 0.1, 1e-4])
def test_constants_are_steady(eps):
    g = Grid1D(-1, 1, 32, 1, 10)
    for c in (0.0, 0.7):
        spec = ProblemSpec(g, eps, F.zero(), np.full(33, c), BoundarySpec(), 1.0)
        assert np.all(step_implicit(np.full(33, c), spec).values == c)
    spec = ProblemSpec(g, eps, F.zero(), np.full(33, -0.5), BoundarySpec(), 1.0)
    out = step_implicit(ScalarField(g, np.full(33, -0.5 * eps)), spec).values
    np.testing.assert_allclose(out, -0.5 * eps, rtol=0, atol=1e-14)


def test_heat_mode_step_convergence():
    for n in (100, 200):
        g = Grid1D(0, 1, n, 0.1, n)
        r = solve(heat_spec(g))
        X, T = np.meshgrid(g.x, g.t)
        err = np.abs(r.u.values - heat_mode(X, T)).max()
        assert err <= 2.5 * (g.h ** 2 + g.dt)


@pytest.mark.parametrize("eps", [1.0, 0.1, 1e-3])
def test_trivial_solutions(eps):
    g = Grid1D(-1, 1, 40, 1, 200)
    assert np.all(solve(ProblemSpec(g, eps, F.zero(), np.zeros(41), BoundarySpec(), 1.0)).u.values == 0)
    r = solve(ProblemSpec(g, eps, F.zero(), -np.ones(41), BoundarySpec(), 1.0))
    np.testing.assert_allclose(r.u.values, -1.0, rtol=0, atol=1e-12)


def test_logistic_ode_closed_form():
    g = Grid1D(-1, 1, 16, 1, 1000)
    r = solve(ProblemSpec(g, 0.1, F.logistic(1.0), np.full(17, 0.5), BoundarySpec(), 1.0))
    exact = 1.0 / (1.0 + np.exp(-g.t))
    assert np.abs(r.u.values - exact[:, None]).max() <= C_LOGISTIC * g.dt


def _oracle_pair(spec):
    return solve(spec).u.values, solve_explicit_oracle(spec).values


@pytest.mark.parametrize("n", [25, 50, 100])
def test_explicit_oracle_smooth(n):
    h = 2.0 / n
    g = Grid1D(-1, 1, n, 0.5, int(round(0.5 / (h * h / 4))))
    a, b = _oracle_pair(heat_spec(g))
    assert np.abs(a - b).max() <= C_HEAT_ORACLE * (g.dt + g.h ** 2)
    logistic = ProblemSpec(g, 0.5, F.logistic(1.0), np.full(n + 1, 0.5), BoundarySpec(), 1.0)
    a, b = _oracle_pair(logistic)
    assert np.abs(a - b).max() <= 1e-12
    for eps in (1.0, 0.1, 1e-3):
        z = ProblemSpec(g, eps, F.zero(), np.zeros(n + 1), BoundarySpec(), 1.0)
        assert np.all(solve_explicit_oracle(z).values == 0.0)
        m = ProblemSpec(g, eps, F.zero(), -np.ones(n + 1), BoundarySpec(), 1.0)
        np.testing.assert_allclose(solve_explicit_oracle(m).values, -1.0, rtol=0, atol=1e-12)


def test_explicit_oracle_mixed_sign():
    """Across the kink at u = 0 the two schemes agree to first order in h."""
    errs = []
    for n in (25, 50, 100):
        h = 2.0 / n
        g = Grid1D(-1, 1, n, 0.5, int(round(0.5 / (h * h / 4))))
        spec = ProblemSpec(g, 0.5, F.linear_decay(1.0), presets.melting(g, width=0.5),
                           BoundarySpec(), 1.0)
        a, b = _oracle_pair(spec)
        errs.append(np.abs(a - b).max())
        assert errs[-1] <= C_KINK_ORACLE * g.h
    assert errs[2] < errs[0]


def test_explicit_oracle_cfl():
    g = Grid1D(0, 1, 100, 1, 100)  # dt = 0.01 >> h^2 / 2
    with pytest.raises(CflViolation):
        solve_explicit_oracle(heat_spec(g))


def test_newton_iteration_budget():
    g = Grid1D(-1, 1, 100, 1, 400)
    r = solve(ProblemSpec(g, 1e-3, F.linear_decay(1.0), presets.melting(g), BoundarySpec(), 1.0))
    assert r.newton_iterations.max() <= min(NewtonParams().max_iter, g.n_cells + 3)
    assert r.stats()["newton.total_iter"] == str(int(r.newton_iterations.sum()))


def test_newton_budget_exhaustion_is_reported():
    g = Grid1D(-1, 1, 100, 1, 100)
    spec = ProblemSpec(g, 1e-3, F.zero(), presets.melting(g), BoundarySpec(), 1.0)
    with pytest.raises(NewtonDiverged) as info:
        solve(spec, NewtonParams(tol=1e-14, max_iter=1))
    assert info.value.level is not None


@pytest.mark.parametrize("f", [F.zero(), F.logistic(2.0)])
def test_a_priori_bound(f, rng):
    g = Grid1D(-1, 1, 60, 1, 300)
    for _ in range(5):
        lo = 0.0 if f.kind == "logistic" else -1.0
        u0 = rng.uniform(lo, 1.0, 61)
        r = solve(ProblemSpec(g, 0.01, f, u0, BoundarySpec(), 1.0))
        assert r.u.values.max() <= 1.0 + 1e-9 and r.u.values.min() >= lo - 1e-9


def test_bound_violation_detected():
    # logistic growth drives negative data downward without bound
    g = Grid1D(-1, 1, 20, 1, 200)
    spec = ProblemSpec(g, 0.01, F.logistic(5.0), np.full(21, -0.9), BoundarySpec(), 1.0)
    with pytest.raises(APrioriBoundViolation):
        solve(spec)


def test_problem_validation():
    g = Grid1D(-1, 1, 20, 1, 20)
    with pytest.raises(ValueError):
        ProblemSpec(g, 0.1, F.zero(), np.full(21, 2.0), BoundarySpec(), 1.0)
    with pytest.raises(ValueError):
        ProblemSpec(g, 0.1, F.zero(), np.zeros(21), BoundarySpec(EndpointBC.dirichlet(1.0)), 1.0)
    with pytest.raises(ValueError):
        ProblemSpec(g, 1.5, F.zero(), np.zeros(21))
    with pytest.raises(ValueError):
        EndpointBC("robin")


def test_dirichlet_values_held():
    g = Grid1D(0, 2, 80, 0.5, 200)
    bc = BoundarySpec(EndpointBC.dirichlet(1.0), EndpointBC.dirichlet(-1.0))
    u0 = np.where(g.x < 0.5, 1.0 - g.x / 0.5, -1.0)
    u0[0] = 1.0
    r = solve(ProblemSpec(g, 0.01, F.zero(), u0, bc, 1.0))
    assert np.all(r.u.values[:, 0] == 1.0)
    np.testing.assert_allclose(r.u.values[:, -1], -1.0, rtol=1e-15)
    np.testing.assert_allclose(r.v.values, alpha_eps(r.u.values, 0.01), rtol=1e-14, atol=1e-300)


def test_energy_identity():
    g = Grid1D()
    eta = SpaceBump(0.0, 0.5)
    zero = solve(ProblemSpec(Grid1D(n_cells=40, n_steps=40), 0.1, F.zero(), np.zeros(41)))
    assert energy_identity_residual(zero, eta) == 0.0
    const = solve(ProblemSpec(g, 0.1, F.zero(), np.full(401, 0.7)))
    assert energy_identity_residual(const, eta) <= 1e-12
    res = []
    for n in (100, 200, 400):
        gg = Grid1D(-1, 1, n, 0.2, 10 * n)
        res.append(energy_identity_residual(solve(heat_spec(gg)), eta))
        assert res[-1] <= C_ENERGY * (gg.dt + gg.h ** 2)
    assert res[0] > res[1] > res[2]


def test_comparison_examples(rng):
    g = Grid1D(-1, 1, 60, 1, 300)
    a = solve(ProblemSpec(g, 0.1, F.zero(), np.full(61, 0.3)))
    assert comparison_check(a, a).violations == 0
    lo = solve(ProblemSpec(g, 0.1, F.zero(), np.full(61, 0.2)))
    rep = comparison_check(lo, a)
    assert rep.ok and rep.min_gap == pytest.approx(0.1)
    base = 0.4 + 0.3 * np.cos(np.pi * g.x)
    bump = 0.2 * np.exp(-((g.x - rng.uniform(-0.5, 0.5)) / 0.2) ** 2)
    f = F.logistic(1.0)
    r_lo = solve(ProblemSpec(g, 0.01, f, base, BoundarySpec(), 1.0))
    r_hi = solve(ProblemSpec(g, 0.01, f, np.minimum(base + bump, 1.0), BoundarySpec(), 1.0))
    assert comparison_check(r_lo, r_hi).ok
    with pytest.raises(ValueError):
        comparison_check(r_hi, r_lo)
