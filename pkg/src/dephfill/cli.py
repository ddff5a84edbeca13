"""Command-line orchestration: run, sweep, analyze, oracle-check.

Outputs per run directory:

* ``trajectory.csv``        t,N,n_1..n_L (always)
* ``profile_snapshots.csv`` snapshot rows only (when snapshots configured)
* ``adiabatic.csv``         alpha1,alpha2,D_analytic (adiabatic engines)
* ``tebd_diagnostics.csv``  t,trace,max_bond,truncation_weight (tebd)
* ``manifest.txt``          config echo, code version, wall time, hashes
* ``trajectory.png`` etc.   when figures are enabled

The default output root is $DEPHFILL_OUT (falling back to the working
directory); ``--out`` always wins.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import os
import sys
import time
from pathlib import Path

import numpy as np

import dephfill
from dephfill import adiabatic, analysis, corrmat, oracle, tebd
from dephfill.config import (
    ConfigError,
    RunConfig,
    apply_axis_point,
    apply_overrides,
    config_from_parser,
    sweep_axes,
    write_manifest,
)
from dephfill.models import ModelSpec, build_single_particle_hamiltonian
from dephfill.trajectory import DensityTrajectory, TrajectoryError, make_time_grid

OUTPUT_ROOT_ENV = "DEPHFILL_OUT"


def _output_dir(cfg_dir: str | None, cli_out: str | None, default_name: str) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg_dir:
        return Path(cfg_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV, ".")
    return Path(root) / default_name


def _time_grid_for(cfg: RunConfig) -> np.ndarray:
    t_min = cfg.t_min
    if cfg.sampling == "log" and t_min is None and cfg.dt is not None:
        t_min = max(cfg.dt, cfg.t_max * 1e-6)
    return make_time_grid(cfg.t_max, cfg.points, cfg.sampling, t_min)


def execute_run(cfg: RunConfig, out_dir: Path) -> dict:
    """Run one engine, write every artifact, return diagnostics."""
    out_dir.mkdir(parents=True, exist_ok=True)
    t_grid = _time_grid_for(cfg)
    spec = cfg.model
    diagnostics: dict = {"engine": cfg.engine}
    outputs: dict[str, Path] = {}
    t_start = time.perf_counter()

    if cfg.engine == "corrmat":
        h = build_single_particle_hamiltonian(spec)
        C0 = corrmat.init_vacuum(spec.L)
        if cfg.integrator == "spectral":
            stats: dict = {}
            traj, _ = corrmat.evolve_spectral(C0, h, spec.gamma_g, spec.gamma_d,
                                              t_grid, stats=stats)
            diagnostics.update(stats)
        else:
            dt = cfg.dt or corrmat.default_dt(spec.J, spec.gamma_g, spec.gamma_d)
            traj, _ = corrmat.evolve(C0, h, spec.gamma_g, spec.gamma_d, t_grid, dt=dt)
            diagnostics["dt"] = dt
            diagnostics["n_steps"] = int(round(traj.times[-1] / dt))
    elif cfg.engine in ("adiabatic", "adiabatic-special"):
        if cfg.engine == "adiabatic":
            gen = adiabatic.build_generator(spec.gamma_g, spec.gamma_d, spec.J, spec.L)
        else:
            gen = adiabatic.special_case_generator(spec.gamma_d, spec.J, spec.L)
        traj = adiabatic.adiabatic_trajectory(gen, t_grid)
        side = out_dir / "adiabatic.csv"
        side.write_text(
            "alpha1,alpha2,D_analytic\n"
            f"{gen.alpha1!r},{gen.alpha2!r},{gen.diffusion_constant!r}\n",
            encoding="utf-8", newline="\n")
        outputs["adiabatic"] = side
        diagnostics["alpha1"] = gen.alpha1
        diagnostics["gamma_g_effective"] = gen.gamma_g
    elif cfg.engine == "oracle":
        traj = oracle.dense_density_trajectory(spec, t_grid)
    elif cfg.engine == "tebd":
        dt = cfg.dt or 0.05 / spec.J
        policy = tebd.TruncationPolicy(chi_max=cfg.chi, sv_floor=cfg.sv_floor)
        traj, diags, state = tebd.run_tebd(spec, cfg.t_max, dt=dt, policy=policy,
                                           sample_times=t_grid)
        diag_path = out_dir / "tebd_diagnostics.csv"
        diags.write_csv(diag_path)
        outputs["tebd_diagnostics"] = diag_path
        diagnostics["dt"] = dt
        diagnostics["max_bond"] = state.max_bond
        diagnostics["truncation_weight"] = state.truncation_weight
        diagnostics["final_trace"] = diags.trace[-1]
    else:  # pragma: no cover - validate() rejects unknown engines
        raise ConfigError(f"unknown engine {cfg.engine}")

    traj_path = out_dir / "trajectory.csv"
    traj.write_csv(traj_path)
    outputs["trajectory"] = traj_path

    if cfg.snapshots:
        rows = [traj.snapshot(t) for t in cfg.snapshots]
        times = np.array([r[0] for r in rows])
        dens = np.array([r[1] for r in rows])
        snap = DensityTrajectory.from_site_density(times, dens)
        snap_path = out_dir / "profile_snapshots.csv"
        snap.write_csv(snap_path)
        outputs["profile_snapshots"] = snap_path

    if cfg.figures:
        from dephfill import plots

        fig_path = out_dir / "trajectory.png"
        plots.save_trajectory_figure(traj, fig_path)
        outputs["trajectory_png"] = fig_path
        if cfg.snapshots:
            alpha1 = 2.0 * spec.J**2 / spec.gamma_d if spec.gamma_d > 0 else None
            col_path = out_dir / "collapse.png"
            plots.save_collapse_figure(traj, cfg.snapshots, col_path, alpha1=alpha1)
            outputs["collapse_png"] = col_path

    wall = time.perf_counter() - t_start
    write_manifest(out_dir / "manifest.txt", cfg, wall, outputs,
                   diagnostics=diagnostics, code_version=dephfill.__version__)
    diagnostics["wall_time_s"] = wall
    return diagnostics


def _cmd_run(args) -> int:
    cfg = _load(args)
    out_dir = _output_dir(cfg.output_dir, args.out, "run")
    if args.figures:
        cfg = _with_figures(cfg)
    execute_run(cfg, out_dir)
    print(f"run complete: {out_dir}")
    return 0


def _with_figures(cfg: RunConfig) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, figures=True)


def _load(args) -> RunConfig:
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    apply_overrides(parser, args.override or [])
    cfg = config_from_parser(parser)
    args._parser = parser
    return cfg


def _sweep_worker(payload):
    index, cfg, out_dir = payload
    try:
        diags = execute_run(cfg, out_dir)
        traj = DensityTrajectory.read_csv(out_dir / "trajectory.csv")
        fit_d = analysis.fit_diffusion_constant(traj, L=cfg.model.L)
        fit_p = analysis.fit_power_law(traj, L=cfg.model.L)
        return {
            "index": index,
            "status": "ok",
            "D": fit_d.prefactor if fit_d.ok else "",
            "D_stderr": fit_d.prefactor_stderr if fit_d.ok else "",
            "exponent": fit_p.exponent if fit_p.ok else "",
            "exponent_stderr": fit_p.exponent_stderr if fit_p.ok else "",
            "N_final": traj.total_number[-1],
            "message": "" if fit_d.ok else fit_d.message,
        }
    except Exception as exc:  # sweep keeps going on per-run failure
        return {"index": index, "status": "error", "D": "", "D_stderr": "",
                "exponent": "", "exponent_stderr": "", "N_final": "",
                "message": str(exc).replace(",", ";")}


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    axes = sweep_axes(args._parser)
    names = sorted(axes)
    points = [dict(zip(names, combo))
              for combo in itertools.product(*(axes[n] for n in names))] or [{}]
    from dephfill.config import MAX_SWEEP_RUNS

    if len(points) > MAX_SWEEP_RUNS:
        raise ConfigError(f"sweep grid has {len(points)} runs, limit {MAX_SWEEP_RUNS}")
    out_root = _output_dir(cfg.output_dir, args.out, "sweep")
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = []
    for k, point in enumerate(points):
        run_cfg = apply_axis_point(cfg, point)
        jobs.append((k, run_cfg, out_root / f"run_{k:04d}"))

    results = {}
    if args.threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.threads) as pool:
            for res in pool.map(_sweep_worker, jobs):
                results[res["index"]] = res
    else:
        for job in jobs:
            res = _sweep_worker(job)
            results[res["index"]] = res

    header = ["run", *names, "status", "D", "D_stderr", "exponent",
              "exponent_stderr", "N_final", "message"]
    lines = [",".join(header)]
    for k, point in enumerate(points):
        res = results[k]
        row = [f"run_{k:04d}", *(repr(point[n]) for n in names), res["status"],
               *(repr(res[c]) if isinstance(res[c], float) else str(res[c])
                 for c in ("D", "D_stderr", "exponent", "exponent_stderr", "N_final")),
               res["message"]]
        lines.append(",".join(row))
    summary = out_root / "summary.csv"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    n_err = sum(1 for r in results.values() if r["status"] != "ok")
    print(f"sweep complete: {len(points)} runs, {n_err} failed, summary {summary}")
    return 0 if n_err == 0 else 3


def _cmd_analyze(args) -> int:
    status = 0
    for raw in args.paths:
        path = Path(raw)
        if not path.exists():
            print(f"input not found: {path}", file=sys.stderr)
            return 2
        try:
            traj = DensityTrajectory.read_csv(path)
        except TrajectoryError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return 2
        stem = path.with_suffix("")
        trace = analysis.local_exponent(traj)
        trace.write_csv(Path(f"{stem}_exponent.csv"))
        fit_d = analysis.fit_diffusion_constant(traj, L=traj.L)
        fit_p = analysis.fit_power_law(traj, L=traj.L)
        record = ["[diffusion]"]
        record.extend(fit_d.to_record().splitlines())
        record.append("")
        record.append("[powerlaw]")
        record.extend(fit_p.to_record().splitlines())
        Path(f"{stem}_fit.txt").write_text("\n".join(record) + "\n",
                                           encoding="utf-8", newline="\n")
        if args.figures:
            from dephfill import plots

            plots.save_exponent_figure(trace, Path(f"{stem}_exponent.png"))
            plots.save_trajectory_figure(traj, Path(f"{stem}_nt.png"))
        print(f"analyzed {path}: "
              + (f"D = {fit_d.prefactor:.6g}" if fit_d.ok else fit_d.message))
    return status


def oracle_equivalence_suite(n_specs: int = 20, seed: int = 7,
                             tol: float = 1e-6, verbose: bool = True) -> list[dict]:
    """Random small chains: correlation-matrix engine vs dense Lindblad.

    Draws NN and power-law specs at L <= 5 with O(1) rates, compares
    densities at three times.
    """
    rng = np.random.default_rng(seed)
    results = []
    for k in range(n_specs):
        kind = "nn" if k % 2 == 0 else "powerlaw"
        L = int(rng.integers(2, 6))
        spec = ModelSpec(
            kind=kind,
            L=L,
            J=1.0,
            alpha=float(rng.uniform(1.1, 3.0)) if kind == "powerlaw" else None,
            gamma_g=float(rng.uniform(0.2, 3.0)),
            gamma_d=float(rng.uniform(0.0, 3.0)),
        )
        times = np.array([0.0, 0.5, 1.0, 2.0])
        traj_o = oracle.dense_density_trajectory(spec, times)
        h = build_single_particle_hamiltonian(spec)
        traj_c, _ = corrmat.evolve(corrmat.init_vacuum(L), h, spec.gamma_g,
                                   spec.gamma_d, times, dt=0.002)
        err = float(np.abs(traj_o.site_density - traj_c.site_density).max())
        ok = err < tol
        results.append({"spec": spec, "max_err": err, "ok": ok})
        if verbose:
            tag = "pass" if ok else "FAIL"
            alpha = f" alpha={spec.alpha:.3f}" if spec.alpha else ""
            print(f"[{tag}] {kind} L={L}{alpha} gamma_g={spec.gamma_g:.3f} "
                  f"gamma_d={spec.gamma_d:.3f}: max |dn| = {err:.2e}")
    return results


def _cmd_oracle_check(args) -> int:
    results = oracle_equivalence_suite(n_specs=args.n_specs, seed=args.seed)
    n_fail = sum(1 for r in results if not r["ok"])
    print(f"oracle-check: {len(results) - n_fail}/{len(results)} passed")
    return 0 if n_fail == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dephfill",
        description="Filling dynamics of dephased lattices with a localized source")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one engine run")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE")
    run_p.add_argument("--figures", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="grid of runs from the [sweep] section")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    sweep_p.add_argument("--override", action="append", default=[],
                         metavar="SECTION.KEY=VALUE")
    sweep_p.set_defaults(func=_cmd_sweep)

    an_p = sub.add_parser("analyze", help="fit exponents on trajectory CSVs")
    an_p.add_argument("paths", nargs="+")
    an_p.add_argument("--figures", action="store_true")
    an_p.set_defaults(func=_cmd_analyze)

    oc_p = sub.add_parser("oracle-check",
                          help="correlation-matrix engine vs dense Lindblad oracle")
    oc_p.add_argument("--n-specs", type=int, default=20)
    oc_p.add_argument("--seed", type=int, default=7)
    oc_p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (corrmat.EngineError, tebd.TebdError, TrajectoryError,
            analysis.AnalysisError, adiabatic.AdiabaticError) as exc:
        print(f"engine-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
