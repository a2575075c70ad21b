"""Shared sweeps (expensive, so session scoped) and the acceptance summary printer."""

import time

import numpy as np
import pytest

from stefan_limit import presets
from stefan_limit.benchmarks import NeumannSolution
from stefan_limit.grid import Grid1D, Window
from stefan_limit.limit_analysis import EpsilonSweep, default_epsilons, run_sweep
from stefan_limit.nonlinearity import NonlinearitySpec
from stefan_limit.solver import BoundarySpec, EndpointBC, ProblemSpec, solve
from stefan_limit.verdict import Thresholds, verify_sweep

ACCEPTANCE_LINES = []
BUILD_SECONDS = {}   # fixture name -> wall time, so criteria can report shared cost


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def build_seconds():
    return BUILD_SECONDS


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def default_grid():
    return Grid1D()


def neumann_grid():
    return Grid1D(0.0, 2.0, 400, 1.0, 3600, t_start=0.1)


def melting_spec(f=None, eps=0.1):
    g = default_grid()
    return ProblemSpec(g, eps, f or NonlinearitySpec.zero(), presets.melting(g), BoundarySpec(), 1.0)


def neumann_spec(eps=0.1, u_b=1.0, latent=1.0):
    g = neumann_grid()
    sol = NeumannSolution(u_b, latent)
    bc = BoundarySpec(EndpointBC("dirichlet", (g.t_start,), (u_b,)),
                      EndpointBC("dirichlet", (g.t_start,), (-latent,)))
    return ProblemSpec(g, eps, NonlinearitySpec.zero(), sol.initial_data(g), bc, 1.0)


def _timed(name, fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    BUILD_SECONDS[name] = time.perf_counter() - t0
    return out


def _sweep(spec):
    return run_sweep(EpsilonSweep(spec, default_epsilons(), Window.default_for(spec.grid)))


@pytest.fixture(scope="session")
def melting_report():
    return _timed("melting_report", _sweep, melting_spec())


@pytest.fixture(scope="session")
def melting_verdict(melting_report):
    return _timed("melting_verdict", verify_sweep, melting_report, Thresholds())


@pytest.fixture(scope="session")
def melting_decay_report():
    return _timed("melting_decay_report", _sweep, melting_spec(NonlinearitySpec.linear_decay(1.0)))


@pytest.fixture(scope="session")
def melting_decay_verdict(melting_decay_report):
    return _timed("melting_decay_verdict", verify_sweep, melting_decay_report, Thresholds())


@pytest.fixture(scope="session")
def neumann_report():
    return _timed("neumann_report", _sweep, neumann_spec())


@pytest.fixture(scope="session")
def neumann_verdict(neumann_report):
    return _timed("neumann_verdict", verify_sweep, neumann_report, Thresholds())


@pytest.fixture(scope="session")
def neumann_fine_run():
    return _timed("neumann_fine_run", solve, neumann_spec(1e-4))


@pytest.fixture(scope="session")
def melting_fine_run():
    return _timed("melting_fine_run", solve, melting_spec(eps=1e-4))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
