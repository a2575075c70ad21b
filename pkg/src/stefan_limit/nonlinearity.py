"""Pointwise scalar maps: the reaction term f and the regularization pair.

``alpha_eps`` slows diffusion of the negative phase by the factor ``eps``;
``beta_eps`` is its inverse and turns the equation into enthalpy form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("zero", "linear_decay", "logistic", "piecewise_linear")


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"epsilon must lie in (0, 1], got {eps!r}")
    return eps


@dataclass(frozen=True)
class NonlinearitySpec:
    """Lipschitz reaction term with f(0) = 0.

    Use the classmethod constructors; they compute ``lipschitz_bound``.
    """

    kind: str
    params: tuple = ()
    lipschitz_bound: float = 0.0
    breakpoints: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.lipschitz_bound < 0:
            raise ValueError("lipschitz_bound must be >= 0")
        if self.kind == "piecewise_linear":
            us = [b[0] for b in self.breakpoints]
            if len(us) < 2 or any(b <= a for a, b in zip(us, us[1:])):
                raise ValueError("breakpoints must be strictly increasing in u")
            if (0.0, 0.0) not in [(float(u), float(fu)) for u, fu in self.breakpoints]:
                raise ValueError("piecewise_linear f needs the breakpoint (0, 0)")

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls("zero")

    @classmethod
    def linear_decay(cls, c: float) -> "NonlinearitySpec":
        if c < 0:
            raise ValueError("linear_decay needs c >= 0")
        return cls("linear_decay", (float(c),), float(c))

    @classmethod
    def logistic(cls, a: float, bound: float = 1.0) -> "NonlinearitySpec":
        """f(u) = a u (1 - u); Lipschitz constant taken on [-bound, bound]."""
        if a <= 0:
            raise ValueError("logistic needs a > 0")
        return cls("logistic", (float(a), float(bound)), float(a) * (2.0 * bound + 1.0))

    @classmethod
    def piecewise_linear(cls, breakpoints) -> "NonlinearitySpec":
        pts = tuple((float(u), float(fu)) for u, fu in breakpoints)
        slopes = [abs((f1 - f0) / (u1 - u0)) for (u0, f0), (u1, f1) in zip(pts, pts[1:])
                  if u1 > u0]
        return cls("piecewise_linear", (), max(slopes, default=0.0), pts)

    def __call__(self, u):
        return eval_f(self, u)

    def describe(self) -> dict:
        """Flat key/value form used in manifests and configs."""
        out = {"f.kind": self.kind}
        if self.kind == "linear_decay":
            out["f.c"] = repr(self.params[0])
        elif self.kind == "logistic":
            out["f.a"] = repr(self.params[0])
            out["f.bound"] = repr(self.params[1])
        elif self.kind == "piecewise_linear":
            out["f.breakpoints"] = ";".join(f"{u!r}:{fu!r}" for u, fu in self.breakpoints)
        return out


def eval_f(spec: NonlinearitySpec, u):
    """Evaluate f at a scalar or array; arrays come back as float arrays."""
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if spec.kind == "zero":
        out = np.zeros_like(u)
    elif spec.kind == "linear_decay":
        out = -spec.params[0] * u
    elif spec.kind == "logistic":
        out = spec.params[0] * u * (1.0 - u)
    else:
        us = np.array([b[0] for b in spec.breakpoints])
        fs = np.array([b[1] for b in spec.breakpoints])
        # np.interp extrapolates by holding the end values constant
        out = np.interp(u, us, fs)
    return float(out) if scalar else out


def alpha_eps(u, eps: float):
    """u on the nonnegative branch, eps*u on the negative one."""
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 0.0, u, eps * u)
    return float(out) if out.ndim == 0 else out


def beta_eps(v, eps: float):
    """Inverse of :func:`alpha_eps`."""
    v = np.asarray(v, dtype=float)
    out = np.where(v >= 0.0, v, v / eps)
    return float(out) if out.ndim == 0 else out


def beta_eps_slope(v, eps: float):
    # generalized derivative; slope 1 is selected at the kink v == 0
    return np.where(np.asarray(v) >= 0.0, 1.0, 1.0 / eps)


def positive_part(u):
    return np.maximum(u, 0.0)


def negative_part(u):
    return np.maximum(-np.asarray(u, dtype=float), 0.0)
