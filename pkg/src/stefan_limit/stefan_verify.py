"""Checks on the limiting free-boundary problem: waiting times, latent heat,
weak Stefan residuals and the front flux balance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid1D, SpaceTimeField, TestFunction, integrate_block
from .nonlinearity import NonlinearitySpec, eval_f, positive_part
from .transforms import TransformedRun, _running_integral


def default_delta(eps: float, factor: float = 10.0, floor: float = 1e-6, cap: float = 1e-3) -> float:
    """Positivity threshold: factor*eps + floor, capped so coarse eps never swallows the liquid."""
    return min(factor * eps + floor, cap)


def _values(u) -> SpaceTimeField:
    return u.u if hasattr(u, "u") and isinstance(u.u, SpaceTimeField) else u


class StationaryFront(ValueError):
    """No moving delta-level crossing was found."""


@dataclass
class FreeBoundary:
    """Waiting time per node; ``np.inf`` marks nodes that never turn positive."""

    grid: Grid1D
    T: np.ndarray
    delta: float
    eps: float | None = None

    @property
    def never(self) -> np.ndarray:
        return ~np.isfinite(self.T)

    @property
    def T_or_end(self) -> np.ndarray:
        return np.where(self.never, self.grid.t_end, self.T)

    def levels(self) -> np.ndarray:
        """Level index of T; ``n_steps + 1`` for never-nodes."""
        g = self.grid
        lv = np.full(self.T.shape, g.n_steps + 1)
        fin = ~self.never
        lv[fin] = np.rint((self.T[fin] - g.t_start) / g.dt).astype(int)
        return lv

    def classify(self, layer: int = 2) -> np.ndarray:
        """Per (level, node): 0 liquid (t > T + layer dt), 1 frozen, 2 boundary layer."""
        g = self.grid
        n = np.arange(g.n_steps + 1)[:, None]
        lv = self.levels()[None, :]
        out = np.ones(g.shape, dtype=np.int8)
        out[n > lv + layer] = 0
        out[np.abs(n - lv) <= layer] = 2
        return out

    def layer_volume(self, layer: int = 2) -> float:
        g = self.grid
        return float(np.count_nonzero(self.classify(layer) == 2) * g.h * g.dt)


def extract_waiting_time(u, delta: float) -> FreeBoundary:
    """T(x) = first level after which u stays >= delta through the final level."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    field = _values(u)
    g = field.grid
    above = field.values >= delta
    # last level where the node sits below delta; T is the level after it
    below_rev = np.argmax(~above[::-1], axis=0)
    all_above = above.all(axis=0)
    last_below = g.n_steps - below_rev
    T = np.where(all_above, g.t_start, np.inf)
    ok = ~all_above & (last_below < g.n_steps)
    T[ok] = g.t[last_below[ok] + 1]
    eps = u.eps if hasattr(u, "eps") else None
    return FreeBoundary(g, T, delta, eps)


def monotonicity_violations(u, delta: float) -> int:
    """(node, level) pairs with u < delta/2 after the node had reached u >= delta."""
    vals = _values(u).values
    reached = np.logical_or.accumulate(vals >= delta, axis=0)
    earlier = np.zeros_like(reached)
    earlier[1:] = reached[:-1]
    return int(np.count_nonzero(earlier & (vals < 0.5 * delta)))


@dataclass
class LatentHeatField:
    W: np.ndarray
    never: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        """W^+: no latent heat where there was no ice."""
        return np.maximum(self.W, 0.0)


def compute_W(u0: np.ndarray, fbar_proxy: SpaceTimeField, fb: FreeBoundary,
              rule: str = "trapezoid") -> LatentHeatField:
    """W = -u0 - int_0^T fbar at each node; never-nodes integrate to t_end and are flagged."""
    grid = fb.grid
    acc = _running_integral(fbar_proxy.values, grid.dt, 0, rule, "left")
    lv = np.minimum(fb.levels(), grid.n_steps)
    W = -np.asarray(u0, dtype=float) - acc[lv, np.arange(acc.shape[1])]
    return LatentHeatField(W, fb.never.copy())


def fbar_from_run(u, f: NonlinearitySpec) -> SpaceTimeField:
    field = _values(u)
    return SpaceTimeField(field.grid, eval_f(f, field.values))


def stefan_beta(u_plus: np.ndarray, W: LatentHeatField, delta: float) -> np.ndarray:
    return np.where(u_plus > delta, u_plus, -W.W[None, :])


def _padded(block, grid: Grid1D, pad: int = 2):
    lt, lx = block
    return (slice(max(lt.start - pad, 0), min(lt.stop + pad, grid.n_steps + 1)),
            slice(max(lx.start - pad, 0), min(lx.stop + pad, grid.n_cells + 1)))


def discrete_test_derivatives(eta: TestFunction, grid: Grid1D):
    """Sampled eta with centred D_t and three-point D_xx on a block padded by two zero nodes.

    Sums of these differences against constants telescope to zero, so the
    pairing sees u rather than how finely the bump is resolved.
    """
    b = _padded(eta.block(grid), grid)
    e = eta.eta(grid, b)
    e_t = np.gradient(e, grid.dt, axis=0) if e.shape[0] > 1 else np.zeros_like(e)
    e_xx = np.zeros_like(e)
    e_xx[:, 1:-1] = (e[:, :-2] - 2.0 * e[:, 1:-1] + e[:, 2:]) / grid.h ** 2
    return b, e, e_t, e_xx


def stefan_weak_residual(u, W: LatentHeatField, f: NonlinearitySpec, dictionary, delta: float,
                         window=None, derivatives: str = "discrete") -> np.ndarray:
    """R(eta) = int int [beta(u) eta_t + u+ eta_xx + f(u+) eta] for every eta.

    ``derivatives="analytic"`` uses the exact bump derivatives instead of
    differences of the sampled bump; under-resolved bumps then leave a
    quadrature floor even for constant u.
    """
    if derivatives not in ("discrete", "analytic"):
        raise ValueError(f"unknown derivative mode {derivatives!r}")
    field = _values(u)
    g = field.grid
    up = positive_part(field.values)
    beta = stefan_beta(up, W, delta)
    fu = eval_f(f, up)
    out = []
    for eta in dictionary:
        if window is not None:
            eta.check_inside(window.x_lo, window.x_hi, window.t_lo, window.t_hi)
        else:
            eta.check_inside(g.x_lo, g.x_hi, g.t_start, g.t_end)
        if derivatives == "discrete":
            b, e, e_t, e_xx = discrete_test_derivatives(eta, g)
        else:
            b = eta.block(g)
            e, e_t, e_xx = eta.eta(g, b), eta.eta_t(g, b), eta.eta_xx(g, b)
        integrand = beta[b] * e_t + up[b] * e_xx + fu[b] * e
        out.append(integrate_block(g, integrand, b))
    return np.array(out)


def w_limit_equation_residual(tr: TransformedRun, W: LatentHeatField, fb: FreeBoundary,
                              f: NonlinearitySpec, layer: int = 2) -> float:
    """Max over liquid points (t > T + layer dt) of |w_xx - D_t w - (W - int_T^t f(u))|."""
    g = tr.grid
    if tr.h_level != 0:
        raise ValueError("the limit w-equation is posed with cut time 0")
    acc = _running_integral(eval_f(f, tr.base.values), g.dt, 0,
                            "trapezoid" if tr.rule == "trapezoid" else "scheme", "left")
    lv = np.minimum(fb.levels(), g.n_steps)
    acc_T = acc[lv, np.arange(acc.shape[1])]
    rhs = W.W[None, :] - (acc - acc_T[None, :])
    w = tr.w.values
    lap = (w[1:, :-2] - 2.0 * w[1:, 1:-1] + w[1:, 2:]) / g.h ** 2
    dtw = (w[1:, 1:-1] - w[:-1, 1:-1]) / g.dt
    res = np.abs(lap - dtw - rhs[1:, 1:-1])
    mask = (fb.classify(layer) == 0)[1:, 1:-1]
    return float(res[mask].max()) if mask.any() else 0.0


# ---------------------------------------------------------------- front flux balance

@dataclass
class FrontFlux:
    times: np.ndarray
    front: np.ndarray       # delta-level crossing, NaN where none
    speed: np.ndarray       # NaN where the stencil does not fit
    gradient: np.ndarray    # |u_x| just behind the front, smoothed
    mismatch: np.ndarray    # |W s' - |u_x|| / max(|u_x|, floor)

    def max_over(self, t_lo: float, t_hi: float) -> float:
        sel = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12) & np.isfinite(self.mismatch)
        if not sel.any():
            raise StationaryFront("no front-flux estimates inside the requested times")
        return float(self.mismatch[sel].max())


def front_positions(u, delta: float, liquid_side: str = "left") -> tuple[np.ndarray, np.ndarray]:
    """Linear-interpolated delta crossing and upwind |u_x| behind it, per level."""
    field = _values(u)
    g = field.grid
    vals = field.values if liquid_side == "left" else field.values[:, ::-1]
    x = g.x if liquid_side == "left" else g.x[::-1]
    s = np.full(g.n_steps + 1, np.nan)
    grad = np.full(g.n_steps + 1, np.nan)
    above = vals >= delta
    for n in range(g.n_steps + 1):
        idx = np.flatnonzero(above[n])
        if idx.size == 0 or idx[-1] >= vals.shape[1] - 1 or idx[-1] == 0:
            continue
        i = idx[-1]
        a, b = vals[n, i], vals[n, i + 1]
        s[n] = x[i] + (a - delta) / (a - b) * (x[i + 1] - x[i])
        grad[n] = abs(vals[n, i] - vals[n, i - 1]) / g.h
    return s, grad


def front_flux_check(u, fb: FreeBoundary, W: LatentHeatField, smoothing_time: float = 0.05,
                     liquid_side: str = "left", floor: float = 1e-8) -> FrontFlux:
    """Compare W(s) |s'| with |u_x(s-)| along the delta-level front.

    s(t) and the gradient are moving-averaged over ``smoothing_time`` (the raw
    crossing is a staircase in time); the speed is the 5-point centred
    least-squares difference of the smoothed front at stride m/4.
    """
    field = _values(u)
    g = field.grid
    s, grad = front_positions(field, fb.delta, liquid_side)
    ok = np.isfinite(s)
    if ok.sum() < 2 or np.nanmax(s) - np.nanmin(s) < g.h:
        raise StationaryFront("front does not move by at least one cell")
    m = max(1, int(round(smoothing_time / g.dt))) | 1
    k = max(1, m // 4)
    n = s.size
    s_sm = np.full(n, np.nan)
    g_sm = np.full(n, np.nan)
    half = m // 2
    for i in range(half, n - half):
        seg = s[i - half:i + half + 1]
        if np.all(np.isfinite(seg)):
            s_sm[i] = seg.mean()
            g_sm[i] = grad[i - half:i + half + 1].mean()
    speed = np.full(n, np.nan)
    for i in range(2 * k, n - 2 * k):
        pts = s_sm[[i - 2 * k, i - k, i + k, i + 2 * k]]
        if np.all(np.isfinite(pts)):
            speed[i] = (-2 * pts[0] - pts[1] + pts[2] + 2 * pts[3]) / (10.0 * k * g.dt)
    W_at = np.full(n, np.nan)
    fin = np.isfinite(s_sm)
    W_at[fin] = np.interp(s_sm[fin], g.x, W.W)
    mismatch = np.abs(W_at * np.abs(speed) - g_sm) / np.maximum(g_sm, floor)
    return FrontFlux(g.t.copy(), s, speed, g_sm, mismatch)
