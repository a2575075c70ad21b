"""Uniform 1-D space-time lattice, discrete calculus and bump test functions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    x_lo: float = -1.0
    x_hi: float = 1.0
    n_cells: int = 400
    t_end: float = 1.0
    n_steps: int = 4000
    t_start: float = 0.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValueError(f"n_cells must be an integer >= 8, got {self.n_cells!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")
        if not self.x_hi > self.x_lo:
            raise ValueError("need x_hi > x_lo")
        if not self.t_end > self.t_start:
            raise ValueError("need t_end > t_start")

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_lo + np.arange(self.n_cells + 1) * self.h

    @cached_property
    def t(self) -> np.ndarray:
        return self.t_start + np.arange(self.n_steps + 1) * self.dt

    @property
    def shape(self) -> tuple[int, int]:
        """(time levels, nodes), the layout of every space-time array."""
        return (self.n_steps + 1, self.n_cells + 1)

    def level_of(self, t: float) -> int:
        """Index of the time level nearest to ``t``."""
        if t < self.t_start - 1e-12 or t > self.t_end + 1e-12:
            raise ValueError(f"time {t} outside [{self.t_start}, {self.t_end}]")
        return int(round((t - self.t_start) / self.dt))

    def describe(self) -> dict:
        return {
            "grid.x_lo": repr(self.x_lo), "grid.x_hi": repr(self.x_hi),
            "grid.n_cells": str(self.n_cells), "grid.t_start": repr(self.t_start),
            "grid.t_end": repr(self.t_end), "grid.n_steps": str(self.n_steps),
        }


@dataclass(frozen=True)
class ScalarField:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells + 1,):
            raise ValueError(f"field has {vals.shape} entries, grid needs {self.grid.n_cells + 1}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class SpaceTimeField:
    """Values indexed ``[level, node]``; row 0 is the initial time."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", vals)

    def level(self, n: int) -> ScalarField:
        return ScalarField(self.grid, self.values[n])


# ---------------------------------------------------------------- operators

def laplacian(field: ScalarField, bc=None, t: float | None = None) -> ScalarField:
    """Three-point Laplacian.

    Boundary nodes use a ghost value: the reflected neighbour for a zero
    Neumann end, the prescribed trace (evaluated at ``t``) for a Dirichlet end.
    """
    from .solver import BoundarySpec

    bc = BoundarySpec() if bc is None else bc
    if not isinstance(bc, BoundarySpec):
        raise TypeError("bc must be a BoundarySpec")
    f = field.values
    h2 = field.grid.h ** 2
    t = field.grid.t_start if t is None else t
    out = np.empty_like(f)
    out[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / h2
    ghost_lo = f[1] if bc.left.kind == "neumann_zero" else bc.left.value(t)
    ghost_hi = f[-2] if bc.right.kind == "neumann_zero" else bc.right.value(t)
    out[0] = (ghost_lo - 2.0 * f[0] + f[1]) / h2
    out[-1] = (f[-2] - 2.0 * f[-1] + ghost_hi) / h2
    return ScalarField(field.grid, out)


def trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


def integrate_space(grid: Grid1D, values: np.ndarray) -> np.ndarray:
    """Trapezoid rule over x along the last axis."""
    return values @ trapezoid_weights(grid.n_cells + 1, grid.h)


def integrate_space_time(grid: Grid1D, values: np.ndarray) -> float:
    wt = trapezoid_weights(grid.n_steps + 1, grid.dt)
    return float(wt @ integrate_space(grid, values))


def integrate_block(grid: Grid1D, values: np.ndarray, block) -> float:
    """Space-time trapezoid integral of a sub-array that vanishes off ``block``."""
    lt, lx = block
    wt = trapezoid_weights(grid.n_steps + 1, grid.dt)[lt]
    wx = trapezoid_weights(grid.n_cells + 1, grid.h)[lx]
    return float(wt @ values @ wx)


def integrate_time(field: SpaceTimeField, node: int, s: float, t: float) -> float:
    """Trapezoid rule in time at one node between two snapped times."""
    g = field.grid
    if not (g.t_start - 1e-12 <= s <= t <= g.t_end + 1e-12):
        raise ValueError(f"need {g.t_start} <= s <= t <= {g.t_end}, got s={s}, t={t}")
    a, b = g.level_of(s), g.level_of(t)
    col = field.values[a:b + 1, node]
    if b == a:
        return 0.0
    return float(trapezoid_weights(b - a + 1, g.dt) @ col)


def cumulative_trapezoid(values: np.ndarray, dt: float, start: int = 0) -> np.ndarray:
    """Running trapezoid integral along axis 0 from row ``start`` (zero there and before)."""
    out = np.zeros_like(values)
    seg = 0.5 * dt * (values[start + 1:] + values[start:-1])
    out[start + 1:] = np.cumsum(seg, axis=0)
    return out


def sup_norm(values) -> float:
    return float(np.max(np.abs(values))) if np.size(values) else 0.0


def l2_norm(field: ScalarField) -> float:
    return math.sqrt(float(integrate_space(field.grid, field.values ** 2)))


def space_time_l2_norm(field: SpaceTimeField) -> float:
    return math.sqrt(integrate_space_time(field.grid, field.values ** 2))


def central_dx(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences along x, one-sided at the two ends."""
    return np.gradient(values, h, axis=-1)


# ---------------------------------------------------------------- test functions

def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    return np.where(inside, np.exp(-1.0 / q), 0.0), inside, q


def bump(s):
    """exp(-1/(1-s^2)) on |s| < 1, zero elsewhere."""
    return _bump(s)[0]


def bump_d1(s):
    b, inside, q = _bump(s)
    s = np.asarray(s, dtype=float)
    return np.where(inside, b * (-2.0 * s / q ** 2), 0.0)


def bump_d2(s):
    b, inside, q = _bump(s)
    s = np.asarray(s, dtype=float)
    poly = 4.0 * s * s / q ** 4 - 2.0 / q ** 2 - 8.0 * s * s / q ** 3
    return np.where(inside, b * poly, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """Product bump a * b((x - xc)/rx) * b((t - tc)/rt)."""

    __test__ = False  # keep pytest from collecting this class

    xc: float
    tc: float
    rx: float
    rt: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.rx <= 0 or self.rt <= 0:
            raise ValueError("test-function radii must be positive")

    def check_inside(self, x_lo, x_hi, t_lo, t_hi):
        if not (x_lo < self.xc - self.rx and self.xc + self.rx < x_hi
                and t_lo < self.tc - self.rt and self.tc + self.rt < t_hi):
            raise SupportError(
                f"support [{self.xc - self.rx}, {self.xc + self.rx}] x "
                f"[{self.tc - self.rt}, {self.tc + self.rt}] not inside "
                f"({x_lo}, {x_hi}) x ({t_lo}, {t_hi})")

    def block(self, grid: Grid1D) -> tuple[slice, slice]:
        """Level and node slices covering the support; the bump is zero outside."""
        lx = np.searchsorted(grid.x, [self.xc - self.rx, self.xc + self.rx])
        lt = np.searchsorted(grid.t, [self.tc - self.rt, self.tc + self.rt])
        return slice(lt[0], lt[1] + 1), slice(lx[0], lx[1] + 1)

    def _parts(self, grid: Grid1D, block=None):
        lt, lx = block if block is not None else (slice(None), slice(None))
        sx = (grid.x[lx] - self.xc) / self.rx
        st = (grid.t[lt] - self.tc) / self.rt
        return sx, st

    def eta(self, grid: Grid1D, block=None) -> np.ndarray:
        sx, st = self._parts(grid, block)
        return self.amplitude * np.outer(bump(st), bump(sx))

    def eta_t(self, grid: Grid1D, block=None) -> np.ndarray:
        sx, st = self._parts(grid, block)
        return self.amplitude * np.outer(bump_d1(st) / self.rt, bump(sx))

    def eta_x(self, grid: Grid1D, block=None) -> np.ndarray:
        sx, st = self._parts(grid, block)
        return self.amplitude * np.outer(bump(st), bump_d1(sx) / self.rx)

    def eta_xx(self, grid: Grid1D, block=None) -> np.ndarray:
        sx, st = self._parts(grid, block)
        return self.amplitude * np.outer(bump(st), bump_d2(sx) / self.rx ** 2)

    def derivative(self, grid: Grid1D, which: str, block=None) -> np.ndarray:
        return {"eta": self.eta, "t": self.eta_t, "x": self.eta_x, "xx": self.eta_xx}[which](grid, block)


@dataclass(frozen=True)
class SpaceBump:
    """Time-independent spatial bump, used by the energy identity."""

    xc: float
    rx: float

    def eta(self, grid: Grid1D) -> np.ndarray:
        return bump((grid.x - self.xc) / self.rx)

    def eta_x(self, grid: Grid1D) -> np.ndarray:
        return bump_d1((grid.x - self.xc) / self.rx) / self.rx

    def check_inside(self, x_lo, x_hi):
        if not (x_lo < self.xc - self.rx and self.xc + self.rx < x_hi):
            raise SupportError(f"spatial bump [{self.xc - self.rx}, {self.xc + self.rx}] "
                               f"not inside ({x_lo}, {x_hi})")


class SupportError(ValueError):
    """A test function's support leaves the region it must stay in."""


@dataclass(frozen=True)
class Window:
    """Compact space-time sub-rectangle where all limit diagnostics are measured."""

    x_lo: float
    x_hi: float
    t_lo: float
    t_hi: float

    @classmethod
    def default_for(cls, grid: Grid1D) -> "Window":
        # [-0.75, 0.75] x [0.1, 0.9] on the default [-1, 1] x [0, 1] lattice
        lx = grid.x_hi - grid.x_lo
        lt = grid.t_end - grid.t_start
        return cls(grid.x_lo + 0.125 * lx, grid.x_hi - 0.125 * lx,
                   grid.t_start + 0.1 * lt, grid.t_end - 0.1 * lt)

    def check_inside(self, grid: Grid1D):
        if not (grid.x_lo < self.x_lo < self.x_hi < grid.x_hi
                and grid.t_start < self.t_lo < self.t_hi < grid.t_end):
            raise ValueError("window must lie strictly inside the space-time domain")

    def masks(self, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
        tol = 1e-12
        xm = (grid.x >= self.x_lo - tol) & (grid.x <= self.x_hi + tol)
        tm = (grid.t >= self.t_lo - tol) & (grid.t <= self.t_hi + tol)
        return tm, xm

    def restrict(self, grid: Grid1D, values: np.ndarray) -> np.ndarray:
        tm, xm = self.masks(grid)
        return values[np.ix_(tm, xm)]


def dictionary(window: Window, n_centers: int = 3, radius_fracs=(0.1, 0.2)) -> list[TestFunction]:
    """Lattice of ``n_centers``^2 centres times the radii: 18 bumps by default.

    Radii are fractions of the window size; every support stays inside the window.
    """
    lx = window.x_hi - window.x_lo
    lt = window.t_hi - window.t_lo
    fracs = [(k + 1) / (n_centers + 1) for k in range(n_centers)]
    edge = min(fracs[0], 1 - fracs[-1])
    if max(radius_fracs) >= edge:
        raise ValueError(f"radius fraction {max(radius_fracs)} would leave the window")
    out = []
    for frac_r in radius_fracs:
        for ft in fracs:
            for fx in fracs:
                out.append(TestFunction(window.x_lo + fx * lx, window.t_lo + ft * lt,
                                        frac_r * lx, frac_r * lt))
    return out


def pair_space_time(field: SpaceTimeField, eta: TestFunction, which: str = "eta") -> float:
    """Trapezoid quadrature of ``field`` times a closed-form derivative of ``eta``."""
    g = field.grid
    eta.check_inside(g.x_lo, g.x_hi, g.t_start, g.t_end)
    return integrate_space_time(g, field.values * eta.derivative(g, which))


# ---------------------------------------------------------------- CSV

def field_to_csv(field: SpaceTimeField, stride: int = 1) -> str:
    """Header of x-coordinates, then one row per written level with the time first.

    Every ``stride``-th level is written; the final level is always included.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    g = field.grid
    levels = list(range(0, g.n_steps + 1, stride))
    if levels[-1] != g.n_steps:
        levels.append(g.n_steps)
    w.writerow(["t"] + [repr(float(x)) for x in g.x])
    for n in levels:
        w.writerow([repr(float(g.t[n]))] + [repr(float(v)) for v in field.values[n]])
    return buf.getvalue()


def field_from_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`field_to_csv`; returns (x, t, values)."""
    rows = list(csv.reader(io.StringIO(text)))
    x = np.array([float(v) for v in rows[0][1:]])
    t = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return x, t, vals
