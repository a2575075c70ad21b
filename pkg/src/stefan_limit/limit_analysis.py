"""eps-sweeps and the convergence diagnostics computed from them.

Unknown weak-* limits are never compared against directly; the finest-eps run
stands in for the limit and every verdict is a Cauchy or stabilization check.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import TestFunction, Window, central_dx, dictionary, integrate_block
from .nonlinearity import eval_f, negative_part, positive_part
from .solver import NewtonParams, ProblemSpec, Run, solve
from .stefan_verify import default_delta

log = logging.getLogger(__name__)


def default_epsilons(n: int = 7, first: float = 0.1, ratio: float = 3.0) -> list[float]:
    return [first * ratio ** -k for k in range(n)]


@dataclass
class EpsilonSweep:
    base_spec: ProblemSpec
    epsilons: list = field(default_factory=default_epsilons)
    window: Window | None = None
    n_centers: int = 3
    radius_fracs: tuple = (0.1, 0.2)
    parallelism: int = 1

    def __post_init__(self):
        eps = [float(e) for e in self.epsilons]
        if len(eps) < 3:
            raise ValueError("a sweep needs at least 3 epsilons")
        if any(not (0 < e <= 1) for e in eps):
            raise ValueError("every epsilon must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        self.epsilons = eps
        if self.window is None:
            self.window = Window.default_for(self.base_spec.grid)
        self.window.check_inside(self.base_spec.grid)

    @property
    def grid(self):
        return self.base_spec.grid

    def dictionary(self) -> list[TestFunction]:
        return dictionary(self.window, self.n_centers, self.radius_fracs)


@dataclass
class SweepReport:
    sweep: EpsilonSweep
    runs: list
    cauchy_sup: np.ndarray          # len K-1
    pairing_table: np.ndarray       # (n_eta, K): <u^-, phi>
    grad_l2: np.ndarray             # (n_eta, K): int int |d_x u+|^2 eta^2

    @property
    def epsilons(self):
        return self.sweep.epsilons

    @property
    def limit_proxy(self) -> Run:
        return self.runs[-1]

    def manifests(self) -> list[dict]:
        return [{**r.spec.describe(), **r.stats(), "wall_time": f"{r.wall_time:.3f}"} for r in self.runs]


def _solve_one(args):
    spec, params = args
    return solve(spec, params)


def solve_all(specs, params: NewtonParams = NewtonParams(), parallelism: int = 1) -> list[Run]:
    """Solve independent problems, optionally in worker processes; order is preserved."""
    jobs = [(s, params) for s in specs]
    if parallelism <= 1 or len(jobs) == 1:
        return [_solve_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_solve_one, jobs))


def window_sup_distance(a: np.ndarray, b: np.ndarray, grid, window: Window) -> float:
    return float(np.max(np.abs(window.restrict(grid, a - b))))


def run_sweep(sweep: EpsilonSweep, params: NewtonParams = NewtonParams(), runs=None) -> SweepReport:
    """Solve every eps (unless ``runs`` is given) and assemble the cross-eps tables."""
    if runs is None:
        specs = [sweep.base_spec.with_eps(e) for e in sweep.epsilons]
        runs = solve_all(specs, params, sweep.parallelism)
    g = sweep.grid
    plus = [positive_part(r.u.values) for r in runs]
    cauchy = np.array([window_sup_distance(a, b, g, sweep.window) for a, b in zip(plus, plus[1:])])
    dic = sweep.dictionary()
    blocks = [eta.block(g) for eta in dic]
    etas = [eta.eta(g, b) for eta, b in zip(dic, blocks)]
    minus = [negative_part(r.u.values) for r in runs]
    pair = np.array([[integrate_block(g, m[b] * e, b) for m in minus]
                     for e, b in zip(etas, blocks)])
    grads = [central_dx(p, g.h) for p in plus]
    gl2 = np.array([[integrate_block(g, d[b] ** 2 * e ** 2, b) for d in grads]
                    for e, b in zip(etas, blocks)])
    return SweepReport(sweep, runs, cauchy, pair, gl2)


# ---------------------------------------------------------------- verdicts

@dataclass
class Verdict:
    status: str   # PASS, FAIL or N/A
    value: float
    threshold: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"


def eventually_nonincreasing(seq, tail: int = 3, tol: float = 1e-10) -> bool:
    """The last ``tail`` entries never increase by more than ``tol``."""
    s = np.asarray(seq, dtype=float)[-tail:]
    return bool(np.all(np.diff(s) <= tol))


def positive_part_cauchy(report: SweepReport, threshold: float = 0.02) -> Verdict:
    c = report.cauchy_sup
    ok = eventually_nonincreasing(c) and c[-1] <= threshold
    return Verdict("PASS" if ok else "FAIL", float(c[-1]), threshold,
                   "cauchy_sup=" + ",".join(f"{x:.3e}" for x in c))


def weak_star_pairings(report: SweepReport) -> tuple[float, np.ndarray]:
    """Largest change of any pairing between the last two eps, and the per-step maxima."""
    steps = np.max(np.abs(np.diff(report.pairing_table, axis=1)), axis=0)
    return float(steps[-1]), steps


def ode_buffer(grid, eps: float, t: float) -> float:
    # width of the eps-diffusion layer ahead of the front, plus two cells
    return 2.0 * grid.h + 6.0 * math.sqrt(eps * max(t - grid.t_start, 0.0))


def negative_ode_residual(run: Run, s_level: int, t_level: int, delta: float | None = None,
                          buffer: float | None = None) -> np.ndarray:
    """|u(t) - u(s) - int_s^t f(u)| at nodes kept below ``delta`` up to ``t``; NaN elsewhere.

    A node qualifies when every node within ``buffer`` of it stayed below delta
    on [t_start, t]; the default buffer is the eps-diffusion reach, outside of
    which u_t = f(u) + O(eps).
    """
    g = run.grid
    if not (0 <= s_level < t_level <= g.n_steps):
        raise ValueError("need 0 <= s < t <= n_steps")
    delta = default_delta(run.eps) if delta is None else delta
    buffer = ode_buffer(g, run.eps, g.t[t_level]) if buffer is None else buffer
    u = run.u.values
    touched = np.any(u[:t_level + 1] >= delta, axis=0)
    reach = int(math.ceil(buffer / g.h - 1e-9))
    blocked = touched.copy()
    for j in np.flatnonzero(touched):
        blocked[max(0, j - reach):j + reach + 1] = True
    fu = eval_f(run.spec.f, u[s_level:t_level + 1])
    wts = np.full(t_level - s_level + 1, g.dt)
    wts[0] = wts[-1] = 0.5 * g.dt
    res = np.abs(u[t_level] - u[s_level] - wts @ fu)
    return np.where(blocked, np.nan, res)


@dataclass
class GradientConvergence:
    energy: np.ndarray             # per eps: int int |d_x u+|^2 eta^2
    identity_residual: np.ndarray  # per eps
    distance: np.ndarray           # per eps: int int |d_x u+ - d_x u*+|^2 eta^2


def identity_residual(run: Run, eta: TestFunction, dx: np.ndarray | None = None) -> float:
    """int int [-(u+)^2 eta eta_t + |u+_x|^2 eta^2 + 2 eta u+ u+_x eta_x - f(u+) u+ eta^2]."""
    g = run.grid
    blk = eta.block(g)
    up = positive_part(run.u.values)
    dx = (central_dx(up, g.h) if dx is None else dx)[blk]
    up = up[blk]
    e, et, ex = eta.eta(g, blk), eta.eta_t(g, blk), eta.eta_x(g, blk)
    integrand = (-up ** 2 * e * et + dx ** 2 * e ** 2 + 2.0 * e * up * dx * ex
                 - eval_f(run.spec.f, up) * up * e ** 2)
    return integrate_block(g, integrand, blk)


def gradient_l2_convergence(report: SweepReport, eta: TestFunction, grads=None) -> GradientConvergence:
    g = report.sweep.grid
    w = report.sweep.window
    eta.check_inside(w.x_lo, w.x_hi, w.t_lo, w.t_hi)
    blk = eta.block(g)
    e2 = eta.eta(g, blk) ** 2
    if grads is None:
        grads = [central_dx(positive_part(r.u.values), g.h) for r in report.runs]
    energy = np.array([integrate_block(g, d[blk] ** 2 * e2, blk) for d in grads])
    ident = np.array([identity_residual(r, eta, d) for r, d in zip(report.runs, grads)])
    dist = np.array([integrate_block(g, (d[blk] - grads[-1][blk]) ** 2 * e2, blk) for d in grads])
    return GradientConvergence(energy, ident, dist)
