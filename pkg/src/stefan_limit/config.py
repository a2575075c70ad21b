"""Flat ``key = value`` run configuration with section headers.

Every knob is a first-class key so that two experiments can be diffed line by
line.  ``parse_config`` validates the whole file and reports every problem at
once; ``Config.to_text`` writes back a fully resolved file that re-runs the
same experiment.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import presets
from .benchmarks import NeumannSolution
from .grid import Grid1D, Window
from .limit_analysis import default_epsilons
from .nonlinearity import NonlinearitySpec
from .solver import BoundarySpec, EndpointBC, NewtonParams, ProblemSpec
from .verdict import Thresholds

COMMANDS = ("solve", "sweep", "verify", "benchmark")
PRESETS = ("constant", "step", "tent", "melting", "neumann", "csv")
BENCHMARKS = ("neumann", "planar", "linear_heat", "heat_mode")
F_KINDS = ("zero", "linear_decay", "logistic", "piecewise_linear")
BC_KINDS = ("neumann_zero", "dirichlet")

# Per-preset data keys and their defaults.
DATA_DEFAULTS = {
    "constant": {"value": 0.5},
    "step": {"left": 1.0, "right": -1.0, "at": 0.0},
    "tent": {"peak": 1.0, "base": -1.0, "half_width": 0.5, "center": 0.0},
    "melting": {"hot": 1.0, "latent": 1.0, "width": 0.05, "at": 0.0},
    "neumann": {"u_b": 1.0, "latent": 1.0},
    "csv": {"path": ""},
}
# Benchmark-only data keys.
BENCH_DEFAULTS = {
    "neumann": {},
    "planar": {"amplitude": 1.0, "xi": 1.0},
    "linear_heat": {"peak": 1.0, "base": -1.0, "half_width": 0.5, "center": 0.0},
    "heat_mode": {"mode": 1},
}

GRID_DEFAULT = {"x_lo": -1.0, "x_hi": 1.0, "n_cells": 400, "t_start": 0.0, "t_end": 1.0,
                "n_steps": 4000}
GRID_NEUMANN = {"x_lo": 0.0, "x_hi": 2.0, "n_cells": 400, "t_start": 0.1, "t_end": 1.0,
                "n_steps": 3600}
GRID_PLANAR = {"x_lo": -1.0, "x_hi": 1.0, "n_cells": 400, "t_start": 0.0, "t_end": 0.5,
               "n_steps": 4000}
GRID_HEAT = {"x_lo": 0.0, "x_hi": 1.0, "n_cells": 400, "t_start": 0.0, "t_end": 0.1,
             "n_steps": 400}
LINEAR_HEAT_EPS = (1e-1, 1e-2, 1e-3, 1e-4)

KNOWN = {
    "run": {"command", "preset", "benchmark", "output", "parallelism", "level_stride"},
    "grid": set(GRID_DEFAULT),
    "model": {"eps", "eps_list", "f", "f_c", "f_a", "f_bound", "f_breakpoints", "bound"},
    "data": set().union(*DATA_DEFAULTS.values(), *BENCH_DEFAULTS.values()),
    "bc": {"left", "left_value", "right", "right_value"},
    "thresholds": {"delta_factor", "delta_floor", "delta_cap", "cauchy_final", "weak_final",
                   "weak_floor_factor", "w_residual_factor", "w_limit", "identity_c",
                   "ode_factor", "front_flux", "h_cuts"},
    "window": {"x_lo", "x_hi", "t_lo", "t_hi"},
    "dictionary": {"centers", "radii"},
    "newton": {"tol", "max_iter"},
}
IGNORED_SECTIONS = ("manifest",)


class ConfigError(ValueError):
    """Carries every problem found in a config file."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class Config:
    command: str
    preset: str
    grid: Grid1D
    eps: float
    eps_list: tuple
    f: NonlinearitySpec
    bound: float
    data: dict
    bc: BoundarySpec
    thresholds: Thresholds
    window: Window
    n_centers: int = 3
    radius_fracs: tuple = (0.1, 0.2)
    newton: NewtonParams = field(default_factory=NewtonParams)
    benchmark: str = "neumann"
    output: str = "out"
    parallelism: int = 1
    level_stride: int = 40
    base_dir: Path = field(default_factory=Path.cwd)

    def initial_data(self) -> np.ndarray:
        return build_initial_data(self.preset, self.data, self.grid, self.base_dir)

    def problem(self, eps: float | None = None) -> ProblemSpec:
        return ProblemSpec(self.grid, self.eps if eps is None else eps, self.f,
                           self.initial_data(), self.bc, self.bound)

    def to_text(self) -> str:
        """Fully resolved config; parsing it back gives an identical Config."""
        r = repr
        g = self.grid
        th = self.thresholds
        lines = ["[run]", f"command = {self.command}", f"preset = {self.preset}",
                 f"benchmark = {self.benchmark}", f"output = {self.output}",
                 f"parallelism = {self.parallelism}", f"level_stride = {self.level_stride}",
                 "", "[grid]"]
        lines += [f"{k} = {r(getattr(g, k))}" for k in GRID_DEFAULT]
        lines += ["", "[model]", f"eps = {r(self.eps)}",
                  "eps_list = " + ", ".join(r(e) for e in self.eps_list),
                  f"f = {self.f.kind}", f"bound = {r(self.bound)}"]
        if self.f.kind == "linear_decay":
            lines.append(f"f_c = {r(self.f.params[0])}")
        elif self.f.kind == "logistic":
            lines += [f"f_a = {r(self.f.params[0])}", f"f_bound = {r(self.f.params[1])}"]
        elif self.f.kind == "piecewise_linear":
            lines.append("f_breakpoints = " + "; ".join(f"{r(a)}:{r(b)}" for a, b in self.f.breakpoints))
        lines += ["", "[data]"] + [f"{k} = {v if isinstance(v, str) else r(v)}"
                                   for k, v in sorted(self.data.items())]
        lines += ["", "[bc]"]
        for side in ("left", "right"):
            end = getattr(self.bc, side)
            lines.append(f"{side} = {end.kind}")
            if end.kind == "dirichlet":
                lines.append(f"{side}_value = {r(end.values[0])}")
        lines += ["", "[thresholds]"]
        for k in sorted(KNOWN["thresholds"]):
            v = getattr(th, k)
            lines.append(f"{k} = " + (", ".join(r(x) for x in v) if isinstance(v, tuple) else r(v)))
        w = self.window
        lines += ["", "[window]", f"x_lo = {r(w.x_lo)}", f"x_hi = {r(w.x_hi)}",
                  f"t_lo = {r(w.t_lo)}", f"t_hi = {r(w.t_hi)}",
                  "", "[dictionary]", f"centers = {self.n_centers}",
                  "radii = " + ", ".join(r(x) for x in self.radius_fracs),
                  "", "[newton]", f"tol = {r(self.newton.tol)}", f"max_iter = {self.newton.max_iter}", ""]
        return "\n".join(lines)


# ---------------------------------------------------------------- initial data

def read_profile_csv(path: Path, grid: Grid1D) -> np.ndarray:
    """Two columns ``x, u`` with a header row; x must match the grid nodes."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    x = np.array([float(r[0]) for r in rows[1:]])
    u = np.array([float(r[1]) for r in rows[1:]])
    if x.shape != grid.x.shape or np.max(np.abs(x - grid.x)) > 1e-9 * max(1.0, grid.h):
        raise ValueError(f"{path}: nodes do not match the configured grid")
    return u


def build_initial_data(preset: str, data: dict, grid: Grid1D, base_dir: Path = Path(".")) -> np.ndarray:
    if preset == "neumann":
        return NeumannSolution(data["u_b"], data["latent"]).initial_data(grid)
    if preset == "csv":
        return read_profile_csv(Path(base_dir) / data["path"], grid)
    return getattr(presets, preset)(grid, **data)


# ---------------------------------------------------------------- parsing helpers

class _Reader:
    """Typed access to the raw sections that records errors instead of raising."""

    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.errors: list[str] = []

    def raw(self, sec, key):
        if self.cp.has_section(sec) and self.cp.has_option(sec, key):
            return self.cp.get(sec, key).strip()
        return None

    def _bad(self, sec, key, msg):
        self.errors.append(f"{sec}.{key}: {msg}")

    def num(self, sec, key, default, kind=float, check=None, rule=""):
        text = self.raw(sec, key)
        if text is None:
            return default
        try:
            val = kind(text)
        except ValueError:
            self._bad(sec, key, f"expected {'an integer' if kind is int else 'a number'}, got {text!r}")
            return default
        if kind is float and not math.isfinite(val):
            self._bad(sec, key, f"must be finite, got {text!r}")
            return default
        if check is not None and not check(val):
            self._bad(sec, key, f"must satisfy {rule} (got {text})")
            return default
        return val

    def choice(self, sec, key, default, options):
        text = self.raw(sec, key)
        if text is None:
            return default
        if text not in options:
            self._bad(sec, key, f"must be one of {', '.join(options)} (got {text!r})")
            return default
        return text

    def num_list(self, sec, key, default):
        text = self.raw(sec, key)
        if text is None:
            return default
        try:
            vals = tuple(float(p) for p in text.replace(";", ",").split(",") if p.strip())
        except ValueError:
            self._bad(sec, key, f"expected a comma separated list of numbers, got {text!r}")
            return default
        if not vals or not all(math.isfinite(v) for v in vals):
            self._bad(sec, key, "list must be non-empty and finite")
            return default
        return vals


def _syntax_error(exc: configparser.Error) -> str:
    line = getattr(exc, "lineno", None)
    if line is None and getattr(exc, "errors", None):
        line = exc.errors[0][0]
    where = f"line {line}: " if line is not None else ""
    return f"syntax error: {where}{exc.message.splitlines()[0] if hasattr(exc, 'message') else exc}"


def parse_config(text: str, base_dir: Path | str | None = None) -> Config:
    """Validated Config, or ConfigError listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([_syntax_error(exc)]) from None
    rd = _Reader(cp)
    err = rd.errors

    for sec in cp.sections():
        if sec in IGNORED_SECTIONS:
            continue
        if sec not in KNOWN:
            err.append(f"[{sec}]: unknown section")
            continue
        for key in cp.options(sec):
            if key not in KNOWN[sec]:
                err.append(f"{sec}.{key}: unknown key")

    command = rd.raw("run", "command")
    if command is None:
        err.append("run.command: required (one of " + ", ".join(COMMANDS) + ")")
        command = "solve"
    elif command not in COMMANDS:
        err.append(f"run.command: must be one of {', '.join(COMMANDS)} (got {command!r})")
        command = "solve"
    benchmark = rd.choice("run", "benchmark", "neumann", BENCHMARKS)
    preset_default = "neumann" if command == "benchmark" and benchmark == "neumann" else "melting"
    preset = rd.choice("run", "preset", preset_default, PRESETS)
    if command == "benchmark" and benchmark == "neumann" and preset != "neumann":
        err.append("run.preset: the neumann benchmark needs preset = neumann")
    output = rd.raw("run", "output") or "out"
    parallelism = rd.num("run", "parallelism", 1, int, lambda v: v >= 1, "parallelism >= 1")
    level_stride = rd.num("run", "level_stride", 40, int, lambda v: v >= 1, "level_stride >= 1")

    # grid
    if preset == "neumann":
        gdef = GRID_NEUMANN
    elif command == "benchmark" and benchmark == "planar":
        gdef = GRID_PLANAR
    elif command == "benchmark" and benchmark == "heat_mode":
        gdef = GRID_HEAT
    else:
        gdef = GRID_DEFAULT
    gv = {k: rd.num("grid", k, d, type(d)) for k, d in gdef.items()}
    if gv["n_cells"] < 8:
        err.append(f"grid.n_cells: must satisfy n_cells >= 8 (got {gv['n_cells']})")
    if gv["n_steps"] < 1:
        err.append(f"grid.n_steps: must satisfy n_steps >= 1 (got {gv['n_steps']})")
    if not gv["x_lo"] < gv["x_hi"]:
        err.append("grid.x_lo: must satisfy x_lo < x_hi")
    if not gv["t_start"] < gv["t_end"]:
        err.append("grid.t_end: must satisfy t_start < t_end")
    if preset == "neumann" and gv["t_start"] <= 0:
        err.append("grid.t_start: the neumann preset starts from its profile at t_start > 0")
    grid = None
    if not any(e.startswith("grid.") for e in err):
        grid = Grid1D(gv["x_lo"], gv["x_hi"], gv["n_cells"], gv["t_end"], gv["n_steps"], gv["t_start"])

    # model
    eps_default = 1e-4 if command == "benchmark" and benchmark == "neumann" else 1e-3
    eps = rd.num("model", "eps", eps_default, float, lambda v: 0 < v <= 1, "0 < eps <= 1")
    eps_list = rd.num_list("model", "eps_list", tuple(default_epsilons()))
    if command == "benchmark" and benchmark == "linear_heat" and rd.raw("model", "eps_list") is None:
        eps_list = LINEAR_HEAT_EPS
    if len(eps_list) < 3:
        err.append(f"model.eps_list: a sweep needs at least 3 values (got {len(eps_list)})")
    if any(not 0 < e <= 1 for e in eps_list):
        err.append("model.eps_list: every eps must satisfy 0 < eps <= 1")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        err.append("model.eps_list: the sweep needs a strictly decreasing eps list "
                   f"(got {', '.join(repr(e) for e in eps_list)})")
    fkind = rd.choice("model", "f", "zero", F_KINDS)
    f = NonlinearitySpec.zero()
    try:
        if fkind == "linear_decay":
            f = NonlinearitySpec.linear_decay(rd.num("model", "f_c", 1.0, float,
                                                     lambda v: v >= 0, "f_c >= 0"))
        elif fkind == "logistic":
            f = NonlinearitySpec.logistic(
                rd.num("model", "f_a", 1.0, float, lambda v: v > 0, "f_a > 0"),
                rd.num("model", "f_bound", 1.0, float, lambda v: v > 0, "f_bound > 0"))
        elif fkind == "piecewise_linear":
            text = rd.raw("model", "f_breakpoints")
            if not text:
                err.append("model.f_breakpoints: required for f = piecewise_linear (u:f pairs)")
            else:
                pts = [tuple(float(c) for c in p.split(":")) for p in text.split(";") if p.strip()]
                f = NonlinearitySpec.piecewise_linear(pts)
    except ValueError as exc:
        err.append(f"model.f: {exc}")

    # data
    if command == "benchmark" and benchmark in ("planar", "linear_heat", "heat_mode"):
        ddef = BENCH_DEFAULTS[benchmark]
    else:
        ddef = DATA_DEFAULTS[preset]
    data = {}
    for key, d in ddef.items():
        if isinstance(d, str):
            data[key] = rd.raw("data", key) or d
        else:
            data[key] = rd.num("data", key, d, type(d))
    if cp.has_section("data"):
        for key in cp.options("data"):
            if key in KNOWN["data"] and key not in ddef:
                err.append(f"data.{key}: not used by this preset/benchmark")
    if preset == "csv":
        if not data.get("path"):
            err.append("data.path: required for preset = csv")
        else:
            # absolute, so a manifest written elsewhere still finds the file
            data["path"] = str((Path(base_dir or ".") / data["path"]).resolve())
    if preset == "neumann":
        if data["u_b"] <= 0:
            err.append("data.u_b: must satisfy u_b > 0")
        if data["latent"] <= 0:
            err.append("data.latent: must satisfy latent > 0")

    u0 = None
    if grid is not None and not err and not (command == "benchmark" and benchmark != "neumann"):
        try:
            u0 = build_initial_data(preset, data, grid, Path(base_dir or "."))
        except (OSError, ValueError, IndexError) as exc:
            err.append(f"data: cannot build the {preset} initial data: {exc}")

    bound_default = 1.0
    if u0 is not None:
        bound_default = max(1.0, float(np.max(np.abs(u0))))
    bound = rd.num("model", "bound", bound_default, float, lambda v: v > 0, "bound > 0")

    # boundary conditions: the neumann preset pins the liquid and ice ends
    bdef = {"left": ("neumann_zero", None), "right": ("neumann_zero", None)}
    if preset == "neumann":
        bdef = {"left": ("dirichlet", data["u_b"]), "right": ("dirichlet", -data["latent"])}
    ends = {}
    for side in ("left", "right"):
        kind = rd.choice("bc", side, bdef[side][0], BC_KINDS)
        key = f"{side}_value"
        if kind == "dirichlet":
            dflt = bdef[side][1]
            if dflt is None and u0 is not None:
                dflt = float(u0[0] if side == "left" else u0[-1])
            val = rd.num("bc", key, dflt)
            if val is None:
                err.append(f"bc.{key}: required for a dirichlet end")
                val = 0.0
            ends[side] = EndpointBC("dirichlet", (gv["t_start"],), (float(val),))
        else:
            if rd.raw("bc", key) is not None:
                err.append(f"bc.{key}: only meaningful for a dirichlet end")
            ends[side] = EndpointBC()
    bc = BoundarySpec(ends["left"], ends["right"])

    # thresholds
    base = Thresholds()
    tv = {}
    for key in KNOWN["thresholds"]:
        if key == "h_cuts":
            cuts = rd.num_list("thresholds", key, base.h_cuts)
            if any(not 0 <= c < 1 for c in cuts):
                err.append("thresholds.h_cuts: cut fractions must lie in [0, 1)")
            tv[key] = cuts
        else:
            tv[key] = rd.num("thresholds", key, getattr(base, key), float,
                             lambda v: v >= 0, f"{key} >= 0")
    thresholds = Thresholds(**tv)

    # window and dictionary
    window = None
    if grid is not None:
        wd = Window.default_for(grid)
        wv = {k: rd.num("window", k, getattr(wd, k)) for k in ("x_lo", "x_hi", "t_lo", "t_hi")}
        try:
            window = Window(**wv)
            window.check_inside(grid)
        except ValueError as exc:
            err.append(f"window: {exc}")
    n_centers = rd.num("dictionary", "centers", 3, int, lambda v: v >= 1, "centers >= 1")
    radii = rd.num_list("dictionary", "radii", (0.1, 0.2))
    if any(not 0 < r < 0.25 for r in radii):
        err.append("dictionary.radii: radius fractions must lie in (0, 0.25) so supports stay inside the window")

    tol = rd.num("newton", "tol", 1e-11, float, lambda v: v > 0, "tol > 0")
    max_iter = rd.num("newton", "max_iter", 50, int, lambda v: v >= 1, "max_iter >= 1")

    if u0 is not None and not err:
        try:
            ProblemSpec(grid, eps, f, u0, bc, bound)
        except ValueError as exc:
            err.append(f"model: {exc}")

    if err:
        raise ConfigError(err)
    return Config(command, preset, grid, eps, tuple(eps_list), f, bound, data, bc, thresholds,
                  window, n_centers, tuple(radii), NewtonParams(tol, max_iter), benchmark, output,
                  parallelism, level_stride, Path(base_dir or "."))
