"""Command line driver: ``stefan-limit --config run.ini [--out DIR] [--quiet]``.

Exit codes: 0 pass, 1 fail, 2 usage or config error, 3 solver error.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import (NeumannSolution, PlanarWave, heat_mode, linear_heat_solve,
                         linear_heat_viscosity_sweep, neumann_lhs)
from .config import Config, ConfigError, parse_config
from .grid import Grid1D, SpaceTimeField, field_to_csv
from .limit_analysis import EpsilonSweep, SweepReport, run_sweep
from .nonlinearity import NonlinearitySpec
from .presets import tent
from .solver import BoundarySpec, EndpointBC, ProblemSpec, SolverError, solve
from .stefan_verify import (LatentHeatField, StationaryFront, compute_W, extract_waiting_time,
                            fbar_from_run, front_flux_check, front_positions)
from .verdict import verify_sweep

log = logging.getLogger("stefan_limit")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
PARALLELISM_ENV = "STEFAN_LIMIT_PARALLELISM"

LAMBDA_RESIDUAL = 1e-12
LINEAR_HEAT_FINAL = 0.05
PLANAR_IDENTITY = 1e-12
HEAT_RATIO = (1.6, 2.4)


# ---------------------------------------------------------------- output helpers

class Output:
    """Collects files in memory-order inside a temp dir, then renames into place."""

    def __init__(self, target: Path):
        self.target = Path(target).resolve()
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.target.name}.", dir=self.target.parent))

    def write(self, name: str, text: str):
        (self.tmp / name).write_text(text)

    def table(self, name: str, header: list[str], rows):
        lines = [",".join(header)] + [",".join(_fmt(x) for x in row) for row in rows]
        self.write(name, "\n".join(lines) + "\n")

    def field(self, name: str, values: SpaceTimeField, stride: int):
        self.write(name, field_to_csv(values, stride))

    def commit(self):
        old = None
        if self.target.exists():
            old = self.target.with_name(f".{self.target.name}.old-{os.getpid()}")
            self.target.rename(old)
        self.tmp.rename(self.target)
        if old is not None:
            shutil.rmtree(old)

    def discard(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def manifest_text(cfg: Config, wall: float, runs=()) -> str:
    lines = [cfg.to_text(), "[manifest]", f"version = {__version__}", f"wall_time = {wall:.3f}"]
    for k, r in enumerate(runs):
        lines.append(f"run{k}.eps = {r.eps!r}")
        lines += [f"run{k}.{key} = {val}" for key, val in r.stats().items()]
        lines.append(f"run{k}.wall_time = {r.wall_time:.3f}")
    return "\n".join(lines) + "\n"


def check_line(name: str, ok: bool | None, value: float, threshold: float, note: str = "") -> str:
    status = "N/A" if ok is None else "PASS" if ok else "FAIL"
    return f"CHECK {name}: {status} {value:.6e} {threshold:.6e}" + (f"  # {note}" if note else "")


# ---------------------------------------------------------------- commands

def _sweep(cfg: Config) -> SweepReport:
    sweep = EpsilonSweep(cfg.problem(cfg.eps_list[0]), list(cfg.eps_list), cfg.window,
                         cfg.n_centers, cfg.radius_fracs, cfg.parallelism)
    return run_sweep(sweep, cfg.newton)


def _write_sweep(out: Output, cfg: Config, rep: SweepReport):
    for k, r in enumerate(rep.runs):
        out.field(f"u_eps{k:02d}.csv", r.u, cfg.level_stride)
    eps = rep.epsilons
    out.table("cauchy.csv", ["k", "eps_k", "eps_k1", "sup_distance"],
              [(k, eps[k], eps[k + 1], c) for k, c in enumerate(rep.cauchy_sup)])
    dic = rep.sweep.dictionary()
    head = ["eta", "xc", "tc", "rx", "rt"] + [f"eps{k:02d}" for k in range(len(eps))]
    out.table("pairings.csv", head, [(i, e.xc, e.tc, e.rx, e.rt, *row)
                                     for i, (e, row) in enumerate(zip(dic, rep.pairing_table))])
    out.table("grad_l2.csv", head, [(i, e.xc, e.tc, e.rx, e.rt, *row)
                                    for i, (e, row) in enumerate(zip(dic, rep.grad_l2))])


def cmd_solve(cfg: Config, out: Output) -> tuple[int, list]:
    run = solve(cfg.problem(), cfg.newton)
    out.field("u.csv", run.u, cfg.level_stride)
    out.field("v.csv", run.v, cfg.level_stride)
    log.info("solve: eps=%g, %d Newton iterations in %.2fs", cfg.eps,
             run.newton_iterations.sum(), run.wall_time)
    return EXIT_PASS, [run]


def cmd_sweep(cfg: Config, out: Output) -> tuple[int, list]:
    rep = _sweep(cfg)
    _write_sweep(out, cfg, rep)
    log.info("sweep: cauchy_sup %s", ", ".join(f"{c:.3e}" for c in rep.cauchy_sup))
    return EXIT_PASS, rep.runs


def cmd_verify(cfg: Config, out: Output) -> tuple[int, list]:
    rep = _sweep(cfg)
    _write_sweep(out, cfg, rep)
    v = verify_sweep(rep, cfg.thresholds)
    tb = v.tables
    eps_cols = [f"eps{k:02d}" for k in range(len(rep.epsilons))]
    out.table("weak_residual.csv", ["eta"] + eps_cols,
              [(i, *row) for i, row in enumerate(tb["weak_residual"])])
    out.table("identity_residual.csv", ["eta"] + eps_cols,
              [(i, *row) for i, row in enumerate(tb["identity_residual"])])
    out.table("gradient_distance.csv", ["eta"] + eps_cols,
              [(i, *row) for i, row in enumerate(tb["gradient_distance"])])
    out.table("monotonicity.csv", ["k", "eps", "violations"],
              [(k, e, n) for k, (e, n) in enumerate(zip(rep.epsilons, tb["monotonicity"]))])
    out.table("ode_residual.csv", ["eps", "applicable_nodes", "max_residual", "bound"],
              [(e, n, m, b) for e, n, m, b in tb["ode"]])
    cuts = cfg.thresholds.h_cuts
    out.table("w_residual.csv", ["eps", "h_fraction", "residual"],
              [(rep.epsilons[i // len(cuts)], cuts[i % len(cuts)], r)
               for i, r in enumerate(tb["w_residual"])])
    lines = v.lines()
    out.write("verdict.txt", "\n".join(lines) + "\n")
    for line in lines:
        log.info(line)
    return (EXIT_PASS if v.passed else EXIT_FAIL), rep.runs


def _bench_neumann(cfg: Config, out: Output) -> tuple[int, list]:
    g = cfg.grid
    sol = NeumannSolution(cfg.data["u_b"], cfg.data["latent"])
    lam = sol.lam
    lam_res = abs(neumann_lhs(lam) - sol.u_b / sol.latent)
    run = solve(cfg.problem(), cfg.newton)
    X, T = np.meshgrid(g.x, g.t)
    exact = np.where(X < sol.front(T), sol.temperature(X, T), -sol.latent)
    out.field("numeric.csv", run.u, cfg.level_stride)
    out.field("exact.csv", SpaceTimeField(g, exact), cfg.level_stride)

    delta = cfg.thresholds.delta(cfg.eps)
    s_num, _ = front_positions(run, delta, "left")
    s_ex = sol.front(g.t)
    ok = np.isfinite(s_num)
    front_err = float(np.max(np.abs(s_num[ok] - s_ex[ok]))) if ok.any() else np.inf
    front_tol = max(0.05, 3 * g.h + 2 * np.sqrt(cfg.eps))

    fb = extract_waiting_time(run, delta)
    W = compute_W(cfg.initial_data(), fbar_from_run(run, cfg.f), fb)
    third = (g.t_end - g.t_start) / 3
    ff = front_flux_check(run, fb, W, liquid_side="left")
    flux = ff.max_over(g.t_start + third, g.t_end - third)
    out.table("front.csv", ["t", "front_numeric", "front_exact", "speed", "gradient", "mismatch"],
              zip(g.t, s_num, s_ex, ff.speed, ff.gradient, ff.mismatch))
    checks = [("lambda_residual", lam_res <= LAMBDA_RESIDUAL, lam_res, LAMBDA_RESIDUAL, f"lambda={lam!r}"),
              ("front_error", front_err <= front_tol, front_err, front_tol, ""),
              ("front_flux", flux <= cfg.thresholds.front_flux, flux, cfg.thresholds.front_flux,
               "mid-third of the time interval")]
    return _finish(out, checks), [run]


def _bench_planar(cfg: Config, out: Output) -> tuple[int, list]:
    pw = PlanarWave(cfg.data["amplitude"], cfg.data["xi"])
    g = cfg.grid
    if g.n_cells % 4 or g.n_steps % 4:
        raise ConfigError(["grid.n_cells: planar benchmark refines by 4; n_cells and n_steps must be divisible by 4"])
    side = "left" if pw.xi > 0 else "right"
    third = (g.t_end - g.t_start) / 3
    mism, ident = [], 0.0
    for div in (4, 2, 1):
        gg = Grid1D(g.x_lo, g.x_hi, g.n_cells // div, g.t_end, g.n_steps // div, g.t_start)
        X, T = np.meshgrid(gg.x, gg.t)
        u = SpaceTimeField(gg, pw(X, T))
        # the flux identity lives on the free line; approach it from the liquid side
        xf = pw.front(gg.t) - 1e-14 * np.sign(pw.xi)
        ident = max(ident, float(np.max(np.abs(pw.u_x(xf, gg.t) ** 2 + pw.amplitude * pw.u_t(xf, gg.t)))))
        fb = extract_waiting_time(u, cfg.thresholds.delta_floor)
        W = LatentHeatField(np.full(gg.n_cells + 1, pw.amplitude), fb.never)
        ff = front_flux_check(u, fb, W, liquid_side=side)
        mism.append(ff.max_over(gg.t_start + third, gg.t_end - third))
    out.field("exact.csv", u, cfg.level_stride)
    out.table("front.csv", ["t", "front_numeric", "front_exact", "speed", "gradient", "mismatch"],
              zip(g.t, front_positions(u, fb.delta, side)[0], pw.front(g.t), ff.speed, ff.gradient,
                  ff.mismatch))
    out.table("refinement.csv", ["n_cells", "mismatch"],
              [(g.n_cells // d, m) for d, m in zip((4, 2, 1), mism)])
    dec = mism[0] > mism[1] > mism[2]
    checks = [("identity", ident <= PLANAR_IDENTITY, ident, PLANAR_IDENTITY, "|u_x|^2 + A u_t"),
              ("flux_refinement", dec, mism[2], mism[1], "mismatch shrinks with h")]
    return _finish(out, checks), []


def _bench_linear_heat(cfg: Config, out: Output) -> tuple[int, list]:
    g = cfg.grid
    phi = tent(g, **cfg.data)
    d = linear_heat_viscosity_sweep(phi, g, cfg.eps_list, cfg.window)
    phim = np.maximum(-phi, 0.0)
    out.field("numeric.csv", SpaceTimeField(g, linear_heat_solve(phim, g, cfg.eps_list[-1])), cfg.level_stride)
    out.field("exact.csv", SpaceTimeField(g, np.broadcast_to(phim, g.shape).copy()), cfg.level_stride)
    out.table("distances.csv", ["eps", "sup_distance"], zip(cfg.eps_list, d))
    dec = all(b < a for a, b in zip(d, d[1:]))
    checks = [("strictly_decreasing", dec, d[-1], d[0], ""),
              ("final_distance", d[-1] <= LINEAR_HEAT_FINAL, d[-1], LINEAR_HEAT_FINAL, "")]
    return _finish(out, checks), []


def _bench_heat_mode(cfg: Config, out: Output) -> tuple[int, list]:
    g = cfg.grid
    if g.n_cells % 4 or g.n_steps % 4:
        raise ConfigError(["grid.n_cells: heat_mode refines by 4; n_cells and n_steps must be divisible by 4"])
    k = int(cfg.data["mode"])
    length = g.x_hi - g.x_lo
    bc = BoundarySpec(EndpointBC("dirichlet", (g.t_start,), (0.0,)),
                      EndpointBC("dirichlet", (g.t_start,), (0.0,)))
    errs, runs = [], []
    for div in (4, 2, 1):
        gg = Grid1D(g.x_lo, g.x_hi, g.n_cells // div, g.t_end, g.n_steps // div, g.t_start)
        u0 = heat_mode(gg.x, 0.0, k, length, g.x_lo)
        u0[0] = u0[-1] = 0.0
        run = solve(ProblemSpec(gg, 1.0, NonlinearitySpec.zero(), u0, bc, 1.0), cfg.newton)
        X, T = np.meshgrid(gg.x, gg.t - g.t_start)
        exact = heat_mode(X, T, k, length, g.x_lo)
        errs.append(float(np.max(np.abs(run.u.values - exact))))
        runs.append(run)
    out.field("numeric.csv", run.u, cfg.level_stride)
    out.field("exact.csv", SpaceTimeField(g, exact), cfg.level_stride)
    out.table("refinement.csv", ["n_cells", "sup_error"], [(g.n_cells // d, e) for d, e in zip((4, 2, 1), errs)])
    lo, hi = HEAT_RATIO
    checks = [(f"ratio_{g.n_cells // (2 * d)}_{g.n_cells // d}", lo <= errs[i] / errs[i + 1] <= hi,
               errs[i] / errs[i + 1], 2.0, f"accepted in [{lo}, {hi}]")
              for i, d in enumerate((2, 1))]
    return _finish(out, checks), runs


def _finish(out: Output, checks) -> int:
    lines = [check_line(*c) for c in checks]
    out.write("verdict.txt", "\n".join(lines) + "\n")
    for line in lines:
        log.info(line)
    return EXIT_PASS if all(c[1] is not False for c in checks) else EXIT_FAIL


BENCHMARKS = {"neumann": _bench_neumann, "planar": _bench_planar,
              "linear_heat": _bench_linear_heat, "heat_mode": _bench_heat_mode}


def cmd_benchmark(cfg: Config, out: Output) -> tuple[int, list]:
    return BENCHMARKS[cfg.benchmark](cfg, out)


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "benchmark": cmd_benchmark}


def run(cfg: Config, out_dir: str | Path | None = None) -> int:
    """Execute the configured command; the output directory appears only on success or verdict."""
    target = Path(out_dir if out_dir is not None else cfg.output)
    out = Output(target)
    t0 = time.perf_counter()
    try:
        code, runs = COMMANDS[cfg.command](cfg, out)
        out.write("manifest.txt", manifest_text(cfg, time.perf_counter() - t0, runs))
        out.commit()
    except ConfigError as exc:
        out.discard()
        for e in exc.errors:
            log.error("config: %s", e)
        return EXIT_CONFIG
    except (SolverError, StationaryFront) as exc:
        out.discard()
        log.error("solver error: %s", exc)
        return EXIT_SOLVER
    except BaseException:
        out.discard()
        raise
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stefan-limit", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, type=Path, help="run configuration (key = value sections)")
    p.add_argument("--out", type=Path, help="output directory (overrides run.output)")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        text = args.config.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, base_dir=args.config.parent)
    except ConfigError as exc:
        for e in exc.errors:
            log.error("config: %s", e)
        return EXIT_CONFIG
    env = os.environ.get(PARALLELISM_ENV)
    if env is not None:
        try:
            cfg.parallelism = int(env)
            if cfg.parallelism < 1:
                raise ValueError
        except ValueError:
            log.error("%s must be a positive integer (got %r)", PARALLELISM_ENV, env)
            return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
