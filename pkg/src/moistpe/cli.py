"""Command-line front end: ``moistpe {run,experiment,covering,diag,mms} ...``.

Exit codes: 0 ok/pass, 1 usage or config error, 2 experiment fail,
3 inconclusive, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plotting
from .covering import doubling_check, pe_cloud, pe_semigroup_map, pe_trajectory_sample
from .energy import EnergyReport, report, write_csv
from .experiments import (
    EXIT_CODES,
    FAIL,
    PASS,
    ExperimentResult,
    ensemble_initial_states,
    exp_absorbing_ball,
    exp_energy_balance,
    exp_manufactured,
    exp_q_decay,
    exp_smoothing,
    exp_time_regularity,
)
from .forcing import forcing_fields, random_state
from .grid import ParameterError, PhysParams
from .io import ConfigError, RunConfig, SnapshotError, load_config, read_snapshot, save_snapshot, write_manifest
from .timestepper import RunAborted, run

log = logging.getLogger("moistpe")

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_ABORT = 0, 1, 2, 3, 4
EXPERIMENTS = ("q_decay", "energy_balance", "absorbing_ball", "smoothing", "time_regularity", "manufactured")

_EXPERIMENT_DEFAULTS = {
    "radius": 0.5, "tail": 2.0, "pre_time": 4.0, "t_bar": 1.0, "deltas": (1e-3, 1e-4, 1e-5), "window": 1.0,
    "max_lag": 2, "theta": 0.5, "k_max": 2, "samples": 200, "stride": 1, "map_time": 0.1,
}


def _settings(cfg: RunConfig) -> dict:
    return {**_EXPERIMENT_DEFAULTS, **(cfg.experiment or {})}


def _load(path: str, seed: int | None) -> RunConfig:
    cfg = load_config(path)
    return cfg.with_seed(seed) if seed is not None else cfg


def _out_dir(cfg: RunConfig | None, override: str | None) -> Path:
    out = Path(override or (cfg.output.directory if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _initial(cfg: RunConfig):
    return random_state(cfg.grid, cfg.params, cfg.initial.seed, cfg.initial.amplitude, cfg.initial.modes)


def _write_series(path: Path, series: dict[str, np.ndarray]) -> None:
    """Columns of possibly different lengths, padded with empty cells."""
    keys = list(series)
    n = max((len(v) for v in series.values()), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for i in range(n):
            w.writerow([repr(float(series[k][i])) if i < len(series[k]) else "" for k in keys])


# ------------------------------------------------------------------ run

def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _out_dir(cfg, args.out)
    g, p = cfg.grid, cfg.params
    forcing = forcing_fields(p, g)
    history: list[EnergyReport] = []
    prev = [None]
    snap_dir = out / "snapshots"
    if cfg.output.snapshots:
        snap_dir.mkdir(exist_ok=True)

    def sink(s, n):
        history.append(report(s, prev[0], p, g, forcing))
        prev[0] = s
        if cfg.output.snapshots:
            save_snapshot(s, g, snap_dir / f"state_{n:07d}.mpe", p)
        log.info("t=%.4f |H|=%.6g |V|=%.6g", s.time, history[-1].norm_H, history[-1].norm_V)

    status, code, final = "ok", EXIT_OK, None
    try:
        result = run(_initial(cfg), p, g, cfg.stepping, sinks=[sink], forcing=forcing)
        final = result.final
        telemetry = {"steps": result.telemetry.steps, "wall_time": result.telemetry.wall_time}
    except RunAborted as exc:
        status, code = "aborted", EXIT_ABORT
        telemetry = {"aborted_at": exc.time, "cause": str(exc.cause)}
        log.error("%s", exc)
    if cfg.output.energy:
        write_csv(out / "energy.csv", history)
    if cfg.output.figures and history:
        plotting.energy_figure(history, out / "energy.png")
        if final is not None:
            plotting.state_figure(final, g, out / "final_state.png")
    write_manifest(out / "manifest.txt", {"command": "run", "status": status, "fingerprint": cfg.fingerprint,
                                          "seed": cfg.initial.seed, **telemetry})
    print(f"run {status}: {len(history)} reports, fingerprint {cfg.fingerprint[:12]}")
    return code


# ----------------------------------------------------------- experiments

def _run_experiment(name: str, cfg: RunConfig, threads: int) -> ExperimentResult:
    g, p, st = cfg.grid, cfg.params, cfg.stepping
    ex = _settings(cfg)
    seed = cfg.initial.seed
    if name == "q_decay":
        return exp_q_decay(p, _initial(cfg), g, st, seed=seed)
    if name == "energy_balance":
        return exp_energy_balance(p, g.nx, st.dt, st.t_end, seed=seed)
    if name == "absorbing_ball":
        states = ensemble_initial_states(g, p, ex["radius"], seed)
        return exp_absorbing_ball(states, p, g, st, tail=ex["tail"], threads=threads, seed=seed)
    if name == "smoothing":
        return exp_smoothing(_initial(cfg), p, g, st, deltas=ex["deltas"], t_bar=ex["t_bar"],
                             pre_time=ex["pre_time"], seed=seed)
    if name == "time_regularity":
        return exp_time_regularity(_initial(cfg), p, g, st, window=ex["window"], pre_time=ex["pre_time"],
                                   max_lag=ex["max_lag"], seed=seed)
    if name == "manufactured":
        return exp_manufactured(p)
    raise ValueError(f"unknown experiment {name!r}")


def _finish(result: ExperimentResult, out: Path, figures: bool) -> int:
    write_manifest(out / f"{result.name}_manifest.txt", result.manifest())
    if result.series:
        _write_series(out / f"{result.name}_series.csv", result.series)
        if figures:
            logy = result.name in ("q_decay", "smoothing")
            plotting.series_figure(result.series, out / f"{result.name}.png", result.name, logy=logy)
    for k, v in result.constants.items():
        log.info("%s = %.6g", k, v)
    print(f"{result.name}: {result.status}")
    return result.exit_code


def cmd_experiment(args) -> int:
    if args.name not in EXPERIMENTS:
        print(f"error: unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}", file=sys.stderr)
        return EXIT_USAGE
    cfg = _load(args.config, args.seed)
    out = _out_dir(cfg, args.out)
    try:
        result = _run_experiment(args.name, cfg, args.threads)
    except RunAborted as exc:
        log.error("%s", exc)
        write_manifest(out / f"{args.name}_manifest.txt", {"name": args.name, "status": "aborted",
                                                            "cause": str(exc.cause)})
        return EXIT_ABORT
    return _finish(result, out, cfg.output.figures)


# -------------------------------------------------------------- covering

def cmd_covering(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _out_dir(cfg, args.out)
    g, p, dt = cfg.grid, cfg.params, cfg.stepping.dt
    ex = _settings(cfg)
    try:
        X = pe_trajectory_sample(_initial(cfg), p, g, dt, ex["pre_time"], ex["samples"], ex["stride"])
        S = pe_semigroup_map(p, g, ex["map_time"], dt)
        check = doubling_check(S, pe_cloud(X, p, g), ex["theta"], ex["k_max"])
    except RunAborted as exc:
        log.error("%s", exc)
        return EXIT_ABORT
    tree = check.tree_full
    items = {"command": "covering", "fingerprint": cfg.fingerprint, "samples": len(X),
             "bound_half": check.bound_half, "bound_full": check.bound_full, "change": check.change,
             "degenerate": tree.degenerate, **tree.manifest()}
    status = PASS if check.stable else FAIL
    items["status"] = status
    write_manifest(out / "covering_manifest.txt", items)
    if cfg.output.figures:
        plotting.covering_figure([(lv.radius, lv.count) for lv in tree.levels], out / "covering.png", tree.theta)
    print(f"covering: bound {check.bound_full:.4g} (half sample {check.bound_half:.4g}), {status}")
    return EXIT_CODES[status]


# ------------------------------------------------------------------ diag

def cmd_diag(args) -> int:
    snaps = sorted((read_snapshot(path) for path in args.snapshots), key=lambda s: s.state.time)
    g = snaps[0].grid
    if any(s.grid != g for s in snaps):
        print("error: snapshots are on different grids", file=sys.stderr)
        return EXIT_USAGE
    if args.config:
        p = load_config(args.config).params
    else:
        known = {k: v for k, v in snaps[0].params.items() if k in PhysParams.__dataclass_fields__}
        p = PhysParams(**known)
    forcing = forcing_fields(p, g)
    history, prev = [], None
    for snap in snaps:
        history.append(report(snap.state, prev, p, g, forcing))
        prev = snap.state
        r = history[-1]
        print(f"t={r.time:.6g} |H|={r.norm_H:.6g} |V|={r.norm_V:.6g} poincare_q={r.r_poincare_q:.3g}")
    out = _out_dir(None, args.out)
    write_csv(out / "diag.csv", history)
    return EXIT_OK


# ------------------------------------------------------------------- mms

def cmd_mms(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _out_dir(cfg, args.out)
    result = exp_manufactured(cfg.params)
    if cfg.output.figures:
        res = result.series["resolution"]
        errs = result.series["spatial_error"]
        plotting.convergence_figure(res, errs, out / "mms_spatial.png")
    write_manifest(out / "manufactured_manifest.txt", result.manifest())
    for k in ("spatial_order", "temporal_order"):
        print(f"{k} = {result.constants[k]:.4f}")
    print(f"manufactured: {result.status}")
    return result.exit_code


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes for ensembles")
    common.add_argument("--seed", type=int, metavar="S", help="override initial.seed")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="moistpe", description="Moist primitive-equation simulator and checks.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="integrate a configured run")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("experiment", parents=[common], help="run a named experiment")
    p.add_argument("name", help=" | ".join(EXPERIMENTS))
    p.add_argument("config")
    p.set_defaults(func=cmd_experiment)
    p = sub.add_parser("covering", parents=[common], help="covering bound of the reduced map")
    p.add_argument("config")
    p.set_defaults(func=cmd_covering)
    p = sub.add_parser("diag", parents=[common], help="recompute energy reports from snapshots")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--config", help="config supplying forcing and parameters")
    p.set_defaults(func=cmd_diag)
    p = sub.add_parser("mms", parents=[common], help="manufactured-solution convergence ladder")
    p.add_argument("config")
    p.set_defaults(func=cmd_mms)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SnapshotError, ParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
