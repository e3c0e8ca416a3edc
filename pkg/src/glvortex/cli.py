"""Command line driver.

Subcommands:
  simulate   run the PDE once and write run.json, snapshots, tracks, energy
  ode        integrate the limiting vortex law and classify pinning
  sweep      run a decreasing-epsilon family and fit convergence rates
  compare    match PDE tracks against ODE trajectories
  report     print a human-readable summary of an output directory

Exit codes: 0 success, 2 configuration/validation error, 1 runtime failure.
Given the same config file and seed, the scientific outputs (every CSV and
JSON except the wall_clock_seconds field of run.json) are byte-identical
across reruns.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import diagnostics
from .config import ExperimentConfig
from .errors import ConfigurationError, GLVortexError
from .fields import write_complex_csv
from .glsolver import SolverConfig, VortexSpec, run, stable_dt
from .odelaw import OdeTrajectory, detect_pinning, integrate, pinning_status, read_ode_csv, write_ode_csv
from .pinning import epsilon0
from .vortex import VortexTrack, default_jump_max, detect_vortices, match_tracks, read_tracks_csv, write_tracks_csv

log = logging.getLogger("glvortex")


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    if not path.is_file():
        raise ConfigurationError(f"file not found: {path}")
    with open(path) as fh:
        return json.load(fh)


def _require_out(cfg: ExperimentConfig) -> Path:
    if not cfg.out:
        raise ConfigurationError("output directory required: set 'out' in the config or pass --out")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "profile": cfg.profile_echo(),
        "epsilons": list(cfg.epsilons),
        "vortices": [[x, y, d] for x, y, d in cfg.vortices],
        "starts": [[x, y] for x, y in cfg.starts],
        "t_end": cfg.t_end,
        "delta": cfg.delta,
        "sigma": cfg.sigma,
        "dt_policy": cfg.dt_policy,
        "cfl_safety": cfg.cfl_safety,
        "snapshot_every": cfg.snapshot_every,
        "save_snapshots": cfg.save_snapshots,
        "seed": cfg.seed,
        "ode_dt": cfg.ode_dt,
        "ode_t_end": cfg.ode_t_end,
        "rate_time": cfg.rate_time,
    }


def _positions_at(detections, t: float, fallback: list[OdeTrajectory]) -> list[tuple[float, float]]:
    """Detected vortex positions, else the limiting-law prediction at t."""
    if detections:
        return [o.position for o in detections]
    return [tr.at(t) for tr in fallback]


def _run_single(cfg: ExperimentConfig, eps: float, outdir: Path, command: str) -> dict:
    t0 = time.perf_counter()
    grid = cfg.grid()
    profile = cfg.build_profile(grid)
    eps0 = epsilon0(profile)

    warn_msgs = []
    if eps >= eps0:
        warn_msgs.append(
            f"epsilon {eps:g} is not below epsilon0 = {eps0:g}; modulus bounds are not guaranteed"
        )

    if cfg.vortices:
        spec = VortexSpec(
            centers=tuple((x, y) for x, y, _ in cfg.vortices),
            degrees=tuple(d for _, _, d in cfg.vortices),
        )
    else:
        spec = VortexSpec.none()
    solver_cfg = SolverConfig(
        grid=grid,
        profile=profile,
        epsilon=eps,
        t_end=cfg.t_end,
        dt_policy=cfg.dt_policy,
        cfl_safety=cfg.cfl_safety,
        snapshot_every=cfg.snapshot_every,
    )
    dt = stable_dt(solver_cfg)
    snapshots, monitor = run(solver_cfg, spec)

    # Limiting-law prediction doubles as the fallback vortex locator for the
    # energy cutoff and the modulus mask when detection comes up empty.
    fallback = integrate(profile, list(spec.centers), cfg.t_end, cfg.ode_dt) if spec.m else []

    jump = default_jump_max(grid.h, cfg.snapshot_every, profile.sup_grad_omega)
    tracks: list[VortexTrack] = []
    detections = []
    for s in snapshots:
        det = detect_vortices(s.V, t=s.t)
        detections.append(det)
        tracks = match_tracks(tracks, det, jump)
    write_tracks_csv(tracks, str(outdir / "tracks.csv"))

    energies = []
    deviations = []
    for s, det in zip(snapshots, detections):
        positions = _positions_at(det, s.t, fallback)
        energies.append(diagnostics.weighted_energy(s.V, profile, eps, positions, cfg.sigma, t=s.t))
        deviations.append(diagnostics.deviation_report(s.V, positions, eps, cfg.delta, t=s.t))

    with open(outdir / "energy.csv", "w", newline="") as fh:
        fh.write("t,max_mod2,max_grad2,energy_total,energy_weighted,energy_plain\n")
        for k, s in enumerate(snapshots):
            fh.write(
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (
                    s.t,
                    monitor.max_mod2[k],
                    monitor.max_grad2[k],
                    monitor.total_energy[k],
                    energies[k].total_weighted,
                    energies[k].total_plain,
                )
            )

    snapshot_files = []
    for k, s in enumerate(snapshots):
        keep = cfg.save_snapshots == "all" or (
            cfg.save_snapshots == "last" and k == len(snapshots) - 1
        )
        name = None
        if keep:
            name = f"snapshot_{k:04d}.csv"
            write_complex_csv(s.V, str(outdir / name))
        snapshot_files.append({"index": k, "t": s.t, "file": name})

    payload = {
        "command": command,
        "config": _config_echo(cfg),
        "epsilon": eps,
        "epsilon0": eps0,
        "stable_dt": dt,
        "grid": {"n": cfg.grid_n, "h": grid.h},
        "steps": snapshots[-1].step_count,
        "snapshots": snapshot_files,
        "monitor": {
            "times": list(monitor.times),
            "max_mod2": list(monitor.max_mod2),
            "max_grad2": list(monitor.max_grad2),
            "total_energy": list(monitor.total_energy),
        },
        "violations": list(monitor.violations),
        "initial_weighted_energy": energies[0].total_weighted,
        "n_tracks": len(tracks),
        "warnings": warn_msgs,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    _write_json(payload, outdir / "run.json")
    for msg in warn_msgs:
        log.warning(msg)
    return {"epsilon": eps, "deviations": deviations, "dir": outdir, "n_tracks": len(tracks)}


def cmd_simulate(cfg: ExperimentConfig) -> int:
    if len(cfg.epsilons) != 1:
        raise ConfigurationError(
            f"config key 'epsilons': simulate takes exactly one value, got {len(cfg.epsilons)}"
        )
    out = _require_out(cfg)
    res = _run_single(cfg, cfg.epsilons[0], out, "simulate")
    log.info("simulate: wrote %s (%d tracks)", res["dir"], res["n_tracks"])
    return 0


def cmd_ode(cfg: ExperimentConfig) -> int:
    if not cfg.starts:
        raise ConfigurationError("config key 'starts' (or 'vortices') is required for ode")
    out = _require_out(cfg)
    grid = cfg.grid()
    profile = cfg.build_profile(grid)
    trajs = integrate(profile, cfg.starts, cfg.ode_t_end, cfg.ode_dt)
    write_ode_csv(trajs, str(out / "trajectories.csv"))

    entries = []
    for k, tr in enumerate(trajs):
        status = pinning_status(tr, profile)
        crit = detect_pinning(tr, profile)
        entry = {
            "index": k,
            "start": list(tr.initial),
            "end": list(tr.end),
            "exited": tr.exited,
            "status": status,
            "pinned": status == "pinned",
            "limit": list(crit.location) if crit else None,
            "classification": crit.classification if crit else None,
            "omega_at_limit": crit.omega_value if crit else None,
        }
        entries.append(entry)
    _write_json(
        {"profile": cfg.profile_echo(), "ode_dt": cfg.ode_dt, "t_end": cfg.ode_t_end, "trajectories": entries},
        out / "pinning.json",
    )
    log.info("ode: wrote %s (%d trajectories)", out, len(trajs))
    return 0


def _fit_dict(fit: diagnostics.RateFit) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "pairs": [[e, v] for e, v in fit.pairs],
    }


def _fit_or_error(pairs: list[tuple[float, float]]) -> dict:
    try:
        return _fit_dict(diagnostics.rate_fit(pairs))
    except GLVortexError as exc:
        return {"error": str(exc), "pairs": [[e, v] for e, v in pairs]}


def cmd_sweep(cfg: ExperimentConfig, jobs: int) -> int:
    if len(cfg.epsilons) < 3:
        raise ConfigurationError(
            f"config key 'epsilons': sweep needs at least three values, got {len(cfg.epsilons)}"
        )
    if jobs < 1:
        raise ConfigurationError(f"--jobs must be positive, got {jobs}")
    out = _require_out(cfg)
    cfg.warn_if_epsilons_large(cfg.build_profile(cfg.grid()))

    # Members execute sequentially in the configured epsilon order so reruns
    # are byte-identical; a member failure aborts the sweep and leaves the
    # directories already written in place.
    members = []
    for eps in cfg.epsilons:
        subdir = out / f"eps_{eps:g}"
        subdir.mkdir(parents=True, exist_ok=True)
        members.append(_run_single(cfg, eps, subdir, "sweep-member"))

    all_reports = [rep for m in members for rep in m["deviations"]]
    diagnostics.write_deviations_csv(all_reports, str(out / "deviations.csv"))

    times = np.array([rep.t for rep in members[0]["deviations"]])
    idx_rate = int(np.argmin(np.abs(times - cfg.rate_time)))
    rate_time_used = float(times[idx_rate])
    late = [k for k, t in enumerate(times) if t > 0.0]

    fits: dict[str, dict] = {"at_time": {}, "median": {}, "best": {}}
    for quantity in ("sup_dev", "l2_dev", "h1_dev"):
        at_pairs, med_pairs, best_pairs = [], [], []
        for m in members:
            vals = [getattr(rep, quantity) for rep in m["deviations"]]
            at_pairs.append((m["epsilon"], vals[idx_rate]))
            med_pairs.append((m["epsilon"], float(np.median([vals[k] for k in late]))))
            best_pairs.append((m["epsilon"], min(vals[k] for k in late)))
        fits["at_time"][quantity] = _fit_or_error(at_pairs)
        fits["median"][quantity] = _fit_or_error(med_pairs)
        fits["best"][quantity] = _fit_or_error(best_pairs)
    fits["rate_time"] = rate_time_used
    fits["delta"] = cfg.delta
    fits["epsilons"] = list(cfg.epsilons)
    _write_json(fits, out / "rates.json")
    log.info("sweep: wrote %s (%d members)", out, len(members))
    return 0


def _trend(errors: Sequence[float]) -> str:
    if len(errors) < 2:
        return "flat"
    ref = max(max(errors), 1e-15)
    if errors[-1] - errors[0] > 0.05 * ref:
        return "increasing"
    if errors[0] - errors[-1] > 0.05 * ref:
        return "decreasing"
    return "flat"


def cmd_compare(run_dir: str, ode_path: str, out_file: Optional[str]) -> int:
    rdir = Path(run_dir)
    run_meta = _read_json(rdir / "run.json")
    tracks_path = rdir / "tracks.csv"
    if not tracks_path.is_file():
        raise ConfigurationError(f"tracks file not found: {tracks_path}")
    tracks = read_tracks_csv(str(tracks_path))

    opath = Path(ode_path)
    if opath.is_dir():
        csv_path = opath / "trajectories.csv"
        manifest_path = opath / "pinning.json"
    else:
        csv_path = opath
        manifest_path = opath.parent / "pinning.json"
    if not csv_path.is_file():
        raise ConfigurationError(f"ode trajectories file not found: {csv_path}")
    trajs = read_ode_csv(str(csv_path))

    if manifest_path.is_file():
        ode_meta = _read_json(manifest_path)
        if ode_meta.get("profile") != run_meta.get("config", {}).get("profile"):
            raise ConfigurationError(
                f"profile mismatch: run used {run_meta.get('config', {}).get('profile')}, "
                f"ode used {ode_meta.get('profile')}"
            )

    comp = diagnostics.pde_vs_ode(tracks, trajs)
    payload = {
        "run_dir": str(rdir),
        "ode_path": str(ode_path),
        "global_max": comp.global_max,
        "unmatched_track_ids": list(comp.unmatched_track_ids),
        "pairs": [
            {
                "track_id": p.track_id,
                "traj_index": p.traj_index,
                "sup_error": p.sup_error,
                "trend": _trend(list(p.errors)),
                "times": [float(t) for t in p.times],
                "errors": [float(e) for e in p.errors],
            }
            for p in comp.pairs
        ],
    }
    target = Path(out_file) if out_file else rdir / "compare.json"
    _write_json(payload, target)
    log.info("compare: wrote %s (global max %s)", target, comp.global_max)
    return 0


def cmd_report(directory: str) -> int:
    d = Path(directory)
    if not d.is_dir():
        raise ConfigurationError(f"directory not found: {directory}")
    found = False

    run_path = d / "run.json"
    if run_path.is_file():
        found = True
        meta = _read_json(run_path)
        prof = meta["config"]["profile"]
        print(f"run {d}")
        print(f"  profile: {prof['name']} ({prof['kind']}), grid {prof['grid_n']}x{prof['grid_n']}")
        print(f"  epsilon: {meta['epsilon']:g} (epsilon0 = {meta['epsilon0']:g})")
        print(f"  dt: {meta['stable_dt']:.3e} ({meta['config']['dt_policy']}), steps: {meta['steps']}")
        print(f"  tracks: {meta['n_tracks']}, violations: {len(meta['violations'])}")
        mon = meta["monitor"]
        print(f"  final max|V|^2: {mon['max_mod2'][-1]:.6g}, final energy: {mon['total_energy'][-1]:.6g}")
        print(f"  initial weighted energy: {meta['initial_weighted_energy']:.6g}")
        if meta["warnings"]:
            for w in meta["warnings"]:
                print(f"  warning: {w}")

    rates_path = d / "rates.json"
    if rates_path.is_file():
        found = True
        rates = _read_json(rates_path)
        print(f"sweep rates in {d} (deviations at t = {rates['rate_time']:g}, delta = {rates['delta']:g})")
        for quantity in ("sup_dev", "l2_dev", "h1_dev"):
            fit = rates["at_time"][quantity]
            if "error" in fit:
                print(f"  {quantity}: fit failed ({fit['error']})")
            else:
                print(f"  {quantity}: slope {fit['slope']:.3f}, r^2 {fit['r_squared']:.4f}")

    pin_path = d / "pinning.json"
    if pin_path.is_file():
        found = True
        pin = _read_json(pin_path)
        print(f"ode trajectories in {d}")
        for tr in pin["trajectories"]:
            lim = tr["limit"]
            where = f"limit ({lim[0]:.4g}, {lim[1]:.4g}), {tr['classification']}" if lim else "no limit point"
            print(f"  #{tr['index']}: start ({tr['start'][0]:g}, {tr['start'][1]:g}) -> {tr['status']}, {where}")

    cmp_path = d / "compare.json"
    if cmp_path.is_file():
        found = True
        comp = _read_json(cmp_path)
        gm = comp["global_max"]
        print(f"comparison: global max error {gm if gm is None else format(gm, '.6g')}")
        for p in comp["pairs"]:
            print(f"  track {p['track_id']} vs traj {p['traj_index']}: sup {p['sup_error']:.6g}, {p['trend']}")

    if not found:
        raise ConfigurationError(f"nothing to report in {directory} (no run.json, rates.json, pinning.json, or compare.json)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glvortex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", required=True, help="experiment config file (key = value lines)")
        p.add_argument("--out", help="output directory (overrides the config's 'out')")

    p_sim = sub.add_parser("simulate", help="run the PDE once")
    add_config_flags(p_sim)

    p_ode = sub.add_parser("ode", help="integrate the limiting vortex law")
    add_config_flags(p_ode)

    p_sweep = sub.add_parser("sweep", help="run a decreasing-epsilon family and fit rates")
    add_config_flags(p_sweep)
    p_sweep.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="maximum concurrent members (members currently run sequentially for reproducibility)",
    )

    p_cmp = sub.add_parser("compare", help="match PDE tracks against ODE trajectories")
    p_cmp.add_argument("run_dir", help="simulate output directory")
    p_cmp.add_argument("ode_path", help="ode output directory (or trajectories CSV)")
    p_cmp.add_argument("--out", help="output file (default: <run_dir>/compare.json)")

    p_rep = sub.add_parser("report", help="summarize an output directory")
    p_rep.add_argument("directory")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            return cmd_compare(args.run_dir, args.ode_path, args.out)
        if args.command == "report":
            return cmd_report(args.directory)
        cfg = ExperimentConfig.from_file(args.config, out_override=args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "ode":
            return cmd_ode(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.jobs)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GLVortexError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
