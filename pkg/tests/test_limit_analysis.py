import math

import numpy as np
import pytest

from stefan_limit import presets
from stefan_limit.grid import Grid1D, Window
from stefan_limit.limit_analysis import (EpsilonSweep, default_epsilons, eventually_nonincreasing,
                                         gradient_l2_convergence, negative_ode_residual,
                                         positive_part_cauchy, run_sweep, solve_all,
                                         weak_star_pairings)
from stefan_limit.nonlinearity import NonlinearitySpec as F
from stefan_limit.solver import BoundarySpec, ProblemSpec, solve
from stefan_limit.transforms import compute_v
from stefan_limit.verdict import Thresholds, verify_sweep

SMALL = Grid1D(-1, 1, 80, 0.5, 200)


def spec(u0, f=None, g=SMALL, eps=0.1, bound=1.0):
    return ProblemSpec(g, eps, f or F.zero(), u0, BoundarySpec(), bound)


def test_default_epsilons():
    e = default_epsilons()
    assert len(e) == 7 and e[0] == 0.1
    assert e[-1] == pytest.approx(1.37e-4, rel=2e-3)
    assert all(b < a for a, b in zip(e, e[1:]))


@pytest.mark.parametrize("eps", [[0.1, 0.01], [0.1, 0.1, 0.01], [0.01, 0.1, 0.001], [1.5, 0.1, 0.01],
                                 [0.1, 0.0, -1.0]])
def test_sweep_validation(eps):
    with pytest.raises(ValueError):
        EpsilonSweep(spec(presets.constant(SMALL)), eps)


def test_sweep_window_must_fit():
    with pytest.raises(ValueError):
        EpsilonSweep(spec(presets.constant(SMALL)), [0.1, 0.01, 0.001], Window(-2, 0, 0.1, 0.4))


def test_eventually_nonincreasing():
    assert eventually_nonincreasing([5, 1, 3, 2, 1])
    assert not eventually_nonincreasing([3, 2, 1, 2])


def test_constant_positive_sweep_is_eps_free():
    rep = run_sweep(EpsilonSweep(spec(presets.constant(SMALL, 0.5)), [0.1, 0.01, 0.001]))
    assert np.all(rep.cauchy_sup <= 1e-12)
    assert np.all(rep.pairing_table == 0.0)
    assert weak_star_pairings(rep)[0] == 0.0
    assert positive_part_cauchy(rep).status == "PASS"


def test_ice_sweep_all_negative():
    """u == -1 stays frozen: u+ = 0 for every eps and the ODE residual vanishes."""
    g = SMALL
    rep = run_sweep(EpsilonSweep(spec(presets.constant(g, -1.0)), [0.1, 0.01, 0.001]))
    assert np.all(rep.cauchy_sup == 0.0)
    assert np.all(rep.grad_l2 == 0.0)
    for r in rep.runs:
        res = negative_ode_residual(r, 0, g.n_steps)
        assert np.all(np.isfinite(res)) and np.nanmax(res) <= 1e-12
    v = verify_sweep(rep, Thresholds())
    assert v.clauses["iii"].status == "PASS"


def test_positive_preset_ode_not_applicable():
    g = SMALL
    rep = run_sweep(EpsilonSweep(spec(presets.constant(g, 0.5)), [0.1, 0.01, 0.001]))
    for r in rep.runs:
        assert np.all(np.isnan(negative_ode_residual(r, 0, g.n_steps)))
    v = verify_sweep(rep, Thresholds())
    assert v.clauses["iii"].status == "N/A"
    assert v.passed


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_linear_decay_ode_closed_form(c):
    """Ice under f = -c u relaxes as u0 exp(-c t) exactly in the ODE; residual O(dt + eps)."""
    g = Grid1D(-1, 1, 80, 1.0, 400)
    u0 = -0.5 - 0.3 * np.cos(np.pi * g.x) ** 2
    r = solve(spec(u0, F.linear_decay(c), g, eps=1e-3))
    res = negative_ode_residual(r, 0, g.n_steps)
    assert np.all(np.isfinite(res))
    assert np.nanmax(res) <= 3 * (1e-3 + g.dt)
    exact = u0 * math.exp(-c * g.t_end)
    assert np.abs(r.u.values[-1] - exact).max() <= 3 * (1e-3 + c * g.dt)


def test_ode_residual_level_validation():
    r = solve(spec(presets.constant(SMALL, -1.0)))
    with pytest.raises(ValueError):
        negative_ode_residual(r, 10, 10)
    with pytest.raises(ValueError):
        negative_ode_residual(r, 0, SMALL.n_steps + 1)


def test_ode_residual_masks_liquid_neighbourhood():
    r = solve(spec(presets.melting(SMALL), eps=0.01))
    res = negative_ode_residual(r, 0, SMALL.n_steps)
    assert np.all(np.isnan(res[SMALL.x < 0.1]))
    assert np.isfinite(res[SMALL.x > 0.97]).all()


def test_positive_part_gap_bound(rng):
    """|u+ - v| <= Lambda eps on solver runs for every eps in a sweep."""
    g = SMALL
    u0 = presets.tent(g)
    for r in solve_all([spec(u0, eps=e) for e in (0.1, 0.01, 0.001)]):
        gap = np.abs(np.maximum(r.u.values, 0) - compute_v(r.u, r.eps).values)
        assert gap.max() <= 1.0 * r.eps * (1 + 1e-12)


def test_parallel_matches_serial():
    specs = [spec(presets.melting(SMALL), eps=e) for e in (0.1, 0.01)]
    a = solve_all(specs)
    b = solve_all(specs, parallelism=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.u.values, y.u.values)


def test_gradient_convergence_shapes():
    rep = run_sweep(EpsilonSweep(spec(presets.melting(SMALL)), [0.1, 0.01, 0.001]))
    eta = rep.sweep.dictionary()[0]
    gc = gradient_l2_convergence(rep, eta)
    assert gc.energy.shape == gc.identity_residual.shape == gc.distance.shape == (3,)
    assert gc.distance[-1] == 0.0
    assert np.all(gc.energy >= 0)
    assert rep.pairing_table.shape == rep.grad_l2.shape == (18, 3)
