"""Derived fields of a run: v = alpha_eps(u), w = int_h^t v, and the source g of
the w-equation  w_xx - w_t = g.

Two time quadratures are offered. ``trapezoid`` is the generic rule. ``scheme``
is the pair implied by the time stepper (right endpoint for v, since diffusion
is implicit; left endpoint for f, since the reaction is explicit). Under the
scheme rule the discrete w-equation holds to Newton tolerance on every solver
run, including runs whose v has a kink at the front.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpaceTimeField, cumulative_trapezoid
from .nonlinearity import NonlinearitySpec, alpha_eps, check_epsilon, eval_f, negative_part

RULES = ("trapezoid", "scheme")


def _check_rule(rule):
    if rule not in RULES:
        raise ValueError(f"quadrature rule must be one of {RULES}, got {rule!r}")


def _check_level(field: SpaceTimeField, h_level: int):
    if not (0 <= h_level <= field.grid.n_steps):
        raise ValueError(f"cut level {h_level} outside 0..{field.grid.n_steps}")


def compute_v(u: SpaceTimeField, eps: float) -> SpaceTimeField:
    return SpaceTimeField(u.grid, alpha_eps(u.values, check_epsilon(eps)))


def _running_integral(vals: np.ndarray, dt: float, start: int, rule: str, endpoint: str) -> np.ndarray:
    if rule == "trapezoid":
        return cumulative_trapezoid(vals, dt, start)
    out = np.zeros_like(vals)
    seg = vals[start + 1:] if endpoint == "right" else vals[start:-1]
    out[start + 1:] = dt * np.cumsum(seg, axis=0)
    return out


def compute_w(v: SpaceTimeField, h_level: int = 0, rule: str = "trapezoid") -> SpaceTimeField:
    """Per-node running integral of v from level ``h_level``; zero on and before it."""
    _check_rule(rule)
    _check_level(v, h_level)
    return SpaceTimeField(v.grid, _running_integral(v.values, v.grid.dt, h_level, rule, "right"))


def reaction_integral(u: SpaceTimeField, f: NonlinearitySpec, h_level: int = 0,
                      rule: str = "trapezoid") -> np.ndarray:
    _check_rule(rule)
    _check_level(u, h_level)
    return _running_integral(eval_f(f, u.values), u.grid.dt, h_level, rule, "left")


def compute_g(u: SpaceTimeField, eps: float, h_level: int, f: NonlinearitySpec,
              rule: str = "trapezoid") -> SpaceTimeField:
    """g = -(1 - eps) u^- - u(., h) - int_h^t f(u); rows before ``h_level`` are zero."""
    eps = check_epsilon(eps)
    vals = (-(1.0 - eps) * negative_part(u.values) - u.values[h_level][None, :]
            - reaction_integral(u, f, h_level, rule))
    vals[:h_level] = 0.0
    return SpaceTimeField(u.grid, vals)


@dataclass
class TransformedRun:
    base: SpaceTimeField
    v: SpaceTimeField
    h_level: int
    w: SpaceTimeField
    g: SpaceTimeField
    eps: float
    f: NonlinearitySpec
    rule: str = "scheme"

    @property
    def grid(self):
        return self.base.grid


def transform(u: SpaceTimeField, eps: float, f: NonlinearitySpec, h_level: int = 0,
              rule: str = "scheme") -> TransformedRun:
    v = compute_v(u, eps)
    return TransformedRun(u, v, h_level, compute_w(v, h_level, rule),
                          compute_g(u, eps, h_level, f, rule), eps, f, rule)


def transform_run(run, h_level: int = 0) -> TransformedRun:
    """Transforms of a solver :class:`~stefan_limit.solver.Run` with the scheme rule."""
    return transform(run.u, run.eps, run.spec.f, h_level, "scheme")


def time_difference(tr: TransformedRun) -> np.ndarray:
    """Backward difference of w, rows ``h_level+1`` onward."""
    w = tr.w.values
    return (w[tr.h_level + 1:] - w[tr.h_level:-1]) / tr.grid.dt


def w_equation_terms(tr: TransformedRun) -> np.ndarray:
    """Pointwise w_xx - D_t w - g on interior nodes and levels after the cut."""
    g = tr.grid
    w = tr.w.values[tr.h_level + 1:]
    lap = (w[:, :-2] - 2.0 * w[:, 1:-1] + w[:, 2:]) / g.h ** 2
    return lap - time_difference(tr)[:, 1:-1] - tr.g.values[tr.h_level + 1:, 1:-1]


def w_equation_residual(tr: TransformedRun) -> float:
    terms = w_equation_terms(tr)
    return float(np.max(np.abs(terms))) if terms.size else 0.0
