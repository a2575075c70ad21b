"""Time stepping for du/dt = (alpha_eps(u))_xx + f(u).

The production scheme works in enthalpy form, d beta_eps(v)/dt = v_xx + f(beta_eps(v)),
backward Euler in the diffusion and forward Euler in the reaction. Each step is
a piecewise-linear tridiagonal system solved by semi-smooth Newton. An explicit
u-form scheme is kept only as an independent oracle.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid1D, ScalarField, SpaceBump, SpaceTimeField, integrate_space
from .nonlinearity import (NonlinearitySpec, alpha_eps, beta_eps, beta_eps_slope,
                           check_epsilon, eval_f, negative_part, positive_part)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Base class for failures while time stepping."""


class NewtonDiverged(SolverError):
    def __init__(self, residual: float, iterations: int, level: int | None = None):
        self.residual = residual
        self.iterations = iterations
        self.level = level
        where = "" if level is None else f" at time level {level}"
        super().__init__(f"Newton hit {iterations} iterations{where}; residual {residual:.3e}")


class NonFiniteState(SolverError):
    pass


class APrioriBoundViolation(SolverError):
    pass


class CflViolation(SolverError):
    pass


# ---------------------------------------------------------------- boundary data

@dataclass(frozen=True)
class EndpointBC:
    """Either ``neumann_zero`` or a Dirichlet trace, piecewise linear in time."""

    kind: str = "neumann_zero"
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("neumann_zero", "dirichlet"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "dirichlet":
            if len(self.times) == 0 or len(self.times) != len(self.values):
                raise ValueError("dirichlet trace needs matching times and values")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("dirichlet trace must be finite")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ValueError("dirichlet trace times must increase")

    @classmethod
    def dirichlet(cls, value: float) -> "EndpointBC":
        return cls("dirichlet", (0.0,), (float(value),))

    def value(self, t: float) -> float:
        if self.kind != "dirichlet":
            raise ValueError("neumann end has no trace value")
        return float(np.interp(t, self.times, self.values))

    def describe(self, side: str) -> dict:
        out = {f"bc.{side}": self.kind}
        if self.kind == "dirichlet":
            out[f"bc.{side}.trace"] = ";".join(f"{t!r}:{v!r}" for t, v in zip(self.times, self.values))
        return out


@dataclass(frozen=True)
class BoundarySpec:
    left: EndpointBC = field(default_factory=EndpointBC)
    right: EndpointBC = field(default_factory=EndpointBC)

    def check_compatible(self, u0: np.ndarray, t0: float, tol: float = 1e-12):
        for end, val in ((self.left, u0[0]), (self.right, u0[-1])):
            if end.kind == "dirichlet" and abs(end.value(t0) - val) > tol:
                raise ValueError(f"dirichlet trace {end.value(t0)} incompatible with "
                                 f"initial value {val} at the boundary")

    def describe(self) -> dict:
        return {**self.left.describe("left"), **self.right.describe("right")}


# ---------------------------------------------------------------- problem

@dataclass(frozen=True)
class NewtonParams:
    tol: float = 1e-11
    max_iter: int = 50

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("Newton tol must be > 0 and max_iter >= 1")


@dataclass(frozen=True)
class ProblemSpec:
    grid: Grid1D
    eps: float
    f: NonlinearitySpec
    u0: np.ndarray
    bc: BoundarySpec = field(default_factory=BoundarySpec)
    bound: float = 1.0  # the a-priori sup bound Lambda

    def __post_init__(self):
        check_epsilon(self.eps)
        u0 = np.asarray(self.u0.values if isinstance(self.u0, ScalarField) else self.u0,
                        dtype=float)
        ScalarField(self.grid, u0)
        if self.bound <= 0:
            raise ValueError("a-priori bound must be positive")
        if np.max(np.abs(u0)) > self.bound * (1 + 1e-12):
            raise ValueError(f"|u0| = {np.max(np.abs(u0))} exceeds the a-priori bound {self.bound}")
        self.bc.check_compatible(u0, self.grid.t_start)
        object.__setattr__(self, "u0", u0)

    def with_eps(self, eps: float) -> "ProblemSpec":
        return ProblemSpec(self.grid, eps, self.f, self.u0, self.bc, self.bound)

    @property
    def bound_interval(self) -> tuple[float, float]:
        return -self.bound, max(self.bound, 1.0)

    def describe(self) -> dict:
        return {**self.grid.describe(), "eps": repr(self.eps), **self.f.describe(),
                **self.bc.describe(), "bound": repr(self.bound)}


@dataclass
class Run:
    """A completed solve: u and v on every level plus Newton statistics."""

    spec: ProblemSpec
    u: SpaceTimeField
    v: SpaceTimeField
    newton_iterations: np.ndarray
    wall_time: float = 0.0

    @property
    def grid(self) -> Grid1D:
        return self.spec.grid

    @property
    def eps(self) -> float:
        return self.spec.eps

    def stats(self) -> dict:
        it = self.newton_iterations
        return {"newton.max_iter_used": str(int(it.max()) if it.size else 0),
                "newton.total_iter": str(int(it.sum())),
                "newton.mean_iter": f"{float(it.mean()) if it.size else 0.0:.6g}"}


# ---------------------------------------------------------------- implicit scheme

def _diffusion_bands(grid: Grid1D, bc: BoundarySpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonals of dt * (-Laplacian), with Dirichlet rows blanked."""
    n = grid.n_cells + 1
    r = grid.dt / grid.h ** 2
    diag = np.full(n, 2.0 * r)
    lower = np.full(n - 1, -r)  # A[i+1, i]
    upper = np.full(n - 1, -r)  # A[i, i+1]
    if bc.left.kind == "neumann_zero":
        upper[0] = -2.0 * r
    else:
        diag[0] = 0.0
        upper[0] = 0.0
    if bc.right.kind == "neumann_zero":
        lower[-1] = -2.0 * r
    else:
        diag[-1] = 0.0
        lower[-1] = 0.0
    return lower, diag, upper


def _apply_bands(lower, diag, upper, v):
    out = diag * v
    out[:-1] += upper * v[1:]
    out[1:] += lower * v[:-1]
    return out


def _step(v_now: np.ndarray, spec: ProblemSpec, params: NewtonParams, t_next: float,
          bands=None) -> tuple[np.ndarray, int]:
    eps = spec.eps
    lower, diag, upper = bands if bands is not None else _diffusion_bands(spec.grid, spec.bc)
    u_now = beta_eps(v_now, eps)
    rhs = u_now + spec.grid.dt * eval_f(spec.f, u_now)
    dir_lo = spec.bc.left.kind == "dirichlet"
    dir_hi = spec.bc.right.kind == "dirichlet"
    if dir_lo:
        rhs[0] = alpha_eps(spec.bc.left.value(t_next), eps)
    if dir_hi:
        rhs[-1] = alpha_eps(spec.bc.right.value(t_next), eps)

    def residual(v):
        r = beta_eps(v, eps) + _apply_bands(lower, diag, upper, v) - rhs
        # Dirichlet rows read v - alpha(g)
        if dir_lo:
            r[0] = v[0] - rhs[0]
        if dir_hi:
            r[-1] = v[-1] - rhs[-1]
        return r

    v = v_now.copy()
    ab = np.zeros((3, v.size))
    ab[0, 1:] = upper
    ab[2, :-1] = lower
    r = residual(v)
    res = float(np.max(np.abs(r)))
    it = 0
    while res > params.tol:
        if it >= params.max_iter:
            raise NewtonDiverged(res, it)
        jd = beta_eps_slope(v, eps) + diag
        if dir_lo:
            jd[0] = 1.0
        if dir_hi:
            jd[-1] = 1.0
        ab[1] = jd
        v = v - solve_banded((1, 1), ab, r, check_finite=False)
        if not np.all(np.isfinite(v)):
            raise NonFiniteState("Newton produced non-finite values")
        r = residual(v)
        res = float(np.max(np.abs(r)))
        it += 1
    return v, it


def step_implicit(v_now: ScalarField | np.ndarray, spec: ProblemSpec,
                  params: NewtonParams = NewtonParams(), t_next: float | None = None) -> ScalarField:
    """One backward-Euler step of the enthalpy form, warm-started from ``v_now``."""
    vals = np.asarray(v_now.values if isinstance(v_now, ScalarField) else v_now, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteState("input state is not finite")
    t_next = spec.grid.t_start + spec.grid.dt if t_next is None else t_next
    v, _ = _step(vals, spec, params, t_next)
    return ScalarField(spec.grid, v)


def _check_bound(u: np.ndarray, spec: ProblemSpec, level: int, slack: float = 1e-9):
    lo, hi = spec.bound_interval
    umin, umax = float(u.min()), float(u.max())
    if umin < lo - slack or umax > hi + slack:
        raise APrioriBoundViolation(
            f"solution range [{umin:.6g}, {umax:.6g}] leaves [{lo}, {hi}] at level {level}")


def solve(spec: ProblemSpec, params: NewtonParams = NewtonParams(), check_bound: bool = True) -> Run:
    """Integrate over the whole grid horizon; returns u = beta_eps(v) and v on every level."""
    g = spec.grid
    t0 = time.perf_counter()
    u = np.empty(g.shape)
    v = np.empty(g.shape)
    its = np.zeros(g.n_steps, dtype=int)
    u[0] = spec.u0
    v[0] = alpha_eps(spec.u0, spec.eps)
    bands = _diffusion_bands(g, spec.bc)
    for n in range(g.n_steps):
        try:
            v[n + 1], its[n] = _step(v[n], spec, params, g.t[n + 1], bands)
        except NewtonDiverged as exc:
            raise NewtonDiverged(exc.residual, exc.iterations, n + 1) from None
        except NonFiniteState as exc:
            raise NonFiniteState(f"{exc} at time level {n + 1}") from None
        u[n + 1] = beta_eps(v[n + 1], spec.eps)
        if check_bound:
            _check_bound(u[n + 1], spec, n + 1)
    wall = time.perf_counter() - t0
    log.debug("solved eps=%g in %.2fs, %d Newton iterations", spec.eps, wall, its.sum())
    return Run(spec, SpaceTimeField(g, u), SpaceTimeField(g, v), its, wall)


def solve_explicit_oracle(spec: ProblemSpec) -> SpaceTimeField:
    """Forward Euler in u-form; only for cross-checking :func:`solve`."""
    g = spec.grid
    if g.dt > g.h ** 2 / (2.0 * max(1.0, spec.eps)) * (1 + 1e-12):
        raise CflViolation(f"dt={g.dt} exceeds h^2/2 = {g.h ** 2 / 2}")
    r = g.dt / g.h ** 2
    u = np.empty(g.shape)
    u[0] = spec.u0
    for n in range(g.n_steps):
        a = alpha_eps(u[n], spec.eps)
        lap = np.empty_like(a)
        lap[1:-1] = a[:-2] - 2.0 * a[1:-1] + a[2:]
        lap[0] = 2.0 * (a[1] - a[0])
        lap[-1] = 2.0 * (a[-2] - a[-1])
        u[n + 1] = u[n] + r * lap + g.dt * eval_f(spec.f, u[n])
        if spec.bc.left.kind == "dirichlet":
            u[n + 1, 0] = spec.bc.left.value(g.t[n + 1])
        if spec.bc.right.kind == "dirichlet":
            u[n + 1, -1] = spec.bc.right.value(g.t[n + 1])
        if not np.all(np.isfinite(u[n + 1])):
            raise NonFiniteState(f"explicit oracle blew up at level {n + 1}")
    return SpaceTimeField(g, u)


# ---------------------------------------------------------------- monitors

def energy_identity_residual(run: Run, eta: SpaceBump) -> float:
    """Largest per-step mismatch in the localized L^2 energy identity.

    Left side: difference quotient of (1/2) int u^2 eta^2. Right side, taken at
    the new level (reaction at the old one, as in the scheme):
    -int |(u+ eta)_x|^2 + int (u+)^2 eta_x^2 - eps int |(u- eta)_x|^2
    + eps int (u-)^2 eta_x^2 + int f(u) u eta^2. Gradients are cell differences.
    """
    g = run.grid
    eta.check_inside(g.x_lo, g.x_hi)
    e = eta.eta(g)
    u = run.u.values
    eps = run.eps
    h = g.h

    def cell_sq_int(a):
        # midpoint rule of a_x^2 over cells, for every level
        return np.sum(np.diff(a, axis=-1) ** 2, axis=-1) / h

    up, um = positive_part(u), negative_part(u)
    # int (w)^2 eta_x^2 with the same cell differences as the gradient term
    def weighted(a):
        am = 0.5 * (a[:, 1:] + a[:, :-1])
        return np.sum(am ** 2 * (np.diff(e) ** 2) / h, axis=-1)

    energy = 0.5 * integrate_space(g, u ** 2 * e ** 2)
    lhs = np.diff(energy) / g.dt
    rhs_all = (-cell_sq_int(up * e) + weighted(up)
               - eps * cell_sq_int(um * e) + eps * weighted(um))
    react = integrate_space(g, eval_f(run.spec.f, u[:-1]) * u[1:] * e ** 2)
    rhs = rhs_all[1:] + react
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


@dataclass
class ComparisonReport:
    violations: int
    worst_gap: float
    min_gap: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def comparison_check(run_lo: Run, run_hi: Run, tol: float = 1e-9) -> ComparisonReport:
    """Count space-time nodes where the lower run rises above the upper one."""
    a, b = run_lo.spec, run_hi.spec
    if a.grid != b.grid or a.eps != b.eps or a.f != b.f:
        raise ValueError("comparison needs runs sharing grid, eps and f")
    if np.any(a.u0 > b.u0 + tol):
        raise ValueError("initial data are not ordered")
    gap = run_hi.u.values - run_lo.u.values
    bad = gap < -tol
    return ComparisonReport(int(bad.sum()), float(max(0.0, -gap.min())), float(gap.min()))
