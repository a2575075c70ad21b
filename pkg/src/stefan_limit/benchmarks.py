"""Closed-form references: Neumann similarity solution, planar travelling profile,
linear vanishing-viscosity heat flow, and heat modes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import erf

from .grid import Grid1D, Window

SQRT_PI = math.sqrt(math.pi)


class BracketError(ValueError):
    pass


def neumann_lhs(lam: float) -> float:
    """sqrt(pi) * lam * exp(lam^2) * erf(lam), increasing on lam > 0."""
    return SQRT_PI * lam * math.exp(lam * lam) * math.erf(lam)


def neumann_lambda(u_b: float, latent: float, lo: float = 1e-8, hi: float = 5.0) -> float:
    """Similarity root of the one-phase Stefan problem with Stefan number u_b / latent."""
    if u_b <= 0 or latent <= 0:
        raise ValueError("u_b and latent heat must be positive")
    target = u_b / latent
    g = lambda lam: neumann_lhs(lam) - target
    if g(lo) > 0 or g(hi) < 0:
        raise BracketError(f"Stefan number {target} has no root in [{lo}, {hi}]")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass(frozen=True)
class NeumannSolution:
    u_b: float = 1.0
    latent: float = 1.0

    @property
    def lam(self) -> float:
        return neumann_lambda(self.u_b, self.latent)

    def front(self, t):
        return 2.0 * self.lam * np.sqrt(t)

    def front_speed(self, t):
        return self.lam / np.sqrt(t)

    def temperature(self, x, t):
        """Liquid temperature on x < s(t); zero beyond the front."""
        x = np.asarray(x, dtype=float)
        lam = self.lam
        u = self.u_b * (1.0 - erf(x / (2.0 * np.sqrt(t))) / math.erf(lam))
        return np.where(x < 2.0 * lam * np.sqrt(t), u, 0.0)

    def gradient_at_front(self, t):
        """d/dx of the liquid profile at x = s(t) from the left (negative)."""
        lam = self.lam
        return -self.u_b * math.exp(-lam * lam) / (SQRT_PI * math.erf(lam) * np.sqrt(t))

    def initial_data(self, grid: Grid1D, t0: float | None = None) -> np.ndarray:
        """Exact liquid profile behind the front, ice at -latent ahead of it."""
        t0 = grid.t_start if t0 is None else t0
        u = self.temperature(grid.x, t0)
        return np.where(grid.x < self.front(t0), u, -self.latent)


def neumann_eval(sol: NeumannSolution, x, t):
    """Returns (temperature, front position)."""
    if np.any(np.asarray(t) <= 0) or np.any(np.asarray(x) < 0):
        raise ValueError("Neumann solution needs t > 0 and x >= 0")
    return sol.temperature(x, t), sol.front(t)


@dataclass(frozen=True)
class PlanarWave:
    """A (1 - exp((t + xi x)/xi^2)) on {t < -xi x}, zero elsewhere."""

    amplitude: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if self.amplitude <= 0 or self.xi == 0:
            raise ValueError("planar wave needs A > 0 and xi != 0")

    def phase(self, x, t):
        return (np.asarray(t, dtype=float) + self.xi * np.asarray(x, dtype=float)) / self.xi ** 2

    def __call__(self, x, t):
        p = self.phase(x, t)
        return np.where(p < 0.0, self.amplitude * (1.0 - np.exp(np.minimum(p, 0.0))), 0.0)

    def u_t(self, x, t):
        p = self.phase(x, t)
        return np.where(p < 0.0, -self.amplitude * np.exp(p) / self.xi ** 2, 0.0)

    def u_x(self, x, t):
        p = self.phase(x, t)
        return np.where(p < 0.0, -self.amplitude * np.exp(p) / self.xi, 0.0)

    def u_xx(self, x, t):
        p = self.phase(x, t)
        return np.where(p < 0.0, -self.amplitude * np.exp(p) / self.xi ** 2, 0.0)

    def front(self, t):
        """Position where the phase vanishes at time ``t``."""
        return -np.asarray(t, dtype=float) / self.xi


def planar_wave_eval(pw: PlanarWave, x, t):
    return pw(x, t)


def heat_mode(x, t, k: int = 1, length: float = 1.0, x0: float = 0.0):
    """exp(-(k pi / L)^2 t) sin(k pi (x - x0) / L), the Dirichlet heat mode."""
    w = k * np.pi / length
    return np.exp(-w * w * t) * np.sin(w * (np.asarray(x) - x0))


def linear_heat_solve(phi: np.ndarray, grid: Grid1D, eps: float) -> np.ndarray:
    """Backward Euler for u_t = eps u_xx with u(0) = phi and Dirichlet data phi at both ends."""
    n = grid.n_cells + 1
    r = eps * grid.dt / grid.h ** 2
    ab = np.zeros((3, n))
    ab[0, 2:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-2] = -r
    ab[1, 0] = ab[1, -1] = 1.0
    out = np.empty(grid.shape)
    out[0] = phi
    for k in range(grid.n_steps):
        rhs = out[k].copy()
        rhs[0], rhs[-1] = phi[0], phi[-1]
        out[k + 1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    return out


def linear_heat_viscosity_sweep(phi: np.ndarray, grid: Grid1D, eps_list, window: Window | None = None):
    """Sup distance between the eps-heat flow of phi^- and phi^- on the window's x-range, all times."""
    phim = np.maximum(-np.asarray(phi, dtype=float), 0.0)
    window = Window.default_for(grid) if window is None else window
    _, xm = window.masks(grid)
    out = []
    for eps in eps_list:
        u = linear_heat_solve(phim, grid, eps)
        out.append(float(np.max(np.abs(u[:, xm] - phim[xm]))))
    return out
