"""Named initial-data presets shared by the CLI, sweeps and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .grid import Grid1D


def smooth_step(x, left: float, right: float, width: float, at: float = 0.0):
    """``left`` for x < at - width, ``right`` for x > at + width, cosine blend between."""
    s = np.clip((np.asarray(x, dtype=float) - at) / width, -1.0, 1.0)
    weight = 0.5 * (1.0 + np.sin(0.5 * np.pi * s))
    return left + (right - left) * weight


def constant(grid: Grid1D, value: float = 0.5) -> np.ndarray:
    return np.full(grid.n_cells + 1, float(value))


def step(grid: Grid1D, left: float = 1.0, right: float = -1.0, at: float = 0.0) -> np.ndarray:
    # sharp jump at one node; u0 is only required to be bounded
    return np.where(grid.x < at, float(left), float(right))


def tent(grid: Grid1D, peak: float = 1.0, base: float = -1.0, half_width: float = 0.5,
         center: float = 0.0) -> np.ndarray:
    """Piecewise-linear hump rising from ``base`` to ``peak``."""
    s = np.clip(1.0 - np.abs(grid.x - center) / half_width, 0.0, 1.0)
    return base + (peak - base) * s


def melting(grid: Grid1D, hot: float = 1.0, latent: float = 1.0, width: float = 0.05,
            at: float = 0.0) -> np.ndarray:
    """Liquid at ``hot`` on the left, ice at ``-latent`` on the right, smoothly joined."""
    return smooth_step(grid.x, hot, -latent, width, at)
