"""Command-line entry point: ``aquanav simulate|run|evaluate|map|geo``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import __version__, ekf, inekf, sim
from .config import FilterConfig, load_config
from .errors import AquanavError
from .geo import GeoRef, to_geo, to_local
from .ingest import parse_log, read_trajectory, read_wq, serialize_log, sync_wq, write_trajectory
from .records import ImuSample
from .wqmap import GridSpec, build_grids, compute_errors, format_table, write_grid_csv

log = logging.getLogger("aquanav")

FILTERS = ("inekf", "ekf", "deadreckon")


def _config(path) -> dict:
    return load_config(path) if path else {}


def _write_manifest(out: Path, **fields) -> None:
    fields["version"] = __version__
    (out / "manifest.json").write_text(json.dumps(fields, indent=2, default=str) + "\n")


# --- simulate -----------------------------------------------------------------


def _field_config(d: dict) -> sim.FieldConfig:
    d = dict(d)
    if "gradient" in d:
        d["gradient"] = tuple(d["gradient"])
    if "plumes" in d:
        d["plumes"] = tuple(dict(p) for p in d["plumes"])
    return sim.FieldConfig(**d)


def simulate_one(cfg_dict: dict, seed: int, out: str) -> str:
    """Write ``log.jsonl``, ``truth.csv`` and a manifest for one seed."""
    scenario = dict(cfg_dict.get("scenario", {}))
    scenario["seed"] = seed
    cfg = sim.ScenarioConfig.from_dict(scenario)
    truth = sim.generate_truth(cfg)
    filter_cfg = sim.filter_config_for(cfg)
    if cfg_dict.get("filter"):
        merged = {**filter_cfg.to_dict(), **cfg_dict["filter"]}
        filter_cfg = FilterConfig.from_dict(merged)
    sensor_log = sim.sample_sensors(truth, cfg, filter_cfg)

    wq_opts = cfg_dict.get("wq", {})
    wq = []
    for i, fd in enumerate(cfg_dict.get("fields", [])):
        wq += sim.sample_field(_field_config(fd), truth, wq_opts.get("rate", 1.0),
                               wq_opts.get("noise", 0.0), seed + 1000 * (i + 1))
    if wq:
        merged = sensor_log.records + wq
        merged.sort(key=lambda r: r.t)  # stable: water-quality after sensors at equal t
        sensor_log = dataclasses.replace(sensor_log, records=merged)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    serialize_log(sensor_log, out_dir / "log.jsonl")
    write_trajectory(truth.trajectory(), out_dir / "truth.csv")
    _write_manifest(out_dir, command="simulate", seed=seed, scenario=scenario,
                    records=len(sensor_log), output=str(out_dir))
    return str(out_dir)


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("scenario", {}).get("seed", 0)
    if args.runs == 1:
        simulate_one(cfg, seed, args.out)
        log.info("wrote %s", args.out)
        return 0
    seeds = [seed + k for k in range(args.runs)]
    outs = [str(Path(args.out) / f"run_{s:04d}") for s in seeds]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for path in pool.map(simulate_one, [cfg] * len(seeds), seeds, outs):
            log.info("wrote %s", path)
    return 0


# --- run ----------------------------------------------------------------------


def run_filter_on(sensor_log, mode: str, cfg: FilterConfig | None = None):
    if mode == "ekf":
        return ekf.run_ekf(sensor_log, cfg)
    return inekf.run_filter(sensor_log, cfg, mode=mode)


def cmd_run(args) -> int:
    cfg_file = _config(args.config)
    sensor_log = parse_log(args.log)
    if not sensor_log.of_type(ImuSample):
        raise AquanavError(f"{args.log}: log contains no IMU records")
    cal = sensor_log.calibration
    if cfg_file.get("filter"):
        cal = FilterConfig.from_dict({**cal.to_dict(), **cfg_file["filter"]})
    start = time.perf_counter()
    traj = run_filter_on(sensor_log, args.filter, cal)
    runtime = time.perf_counter() - start
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory(traj, out / "trajectory.csv")
    _write_manifest(out, command="run", inputs=[str(args.log)], filter=args.filter,
                    config=args.config, seed=args.seed, output=str(out), runtime=runtime,
                    events=traj.events, poses=len(traj))
    log.info("%s: %d poses in %.2f s", args.filter, len(traj), runtime)
    return 0


# --- evaluate -------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    est = read_trajectory(args.estimate)
    truth = read_trajectory(args.truth)
    runtime = args.runtime
    if runtime is None:
        manifest = Path(args.estimate).parent / "manifest.json"
        runtime = json.loads(manifest.read_text()).get("runtime", 0.0) if manifest.exists() else 0.0
    report = compute_errors(est, truth, runtime)
    if args.out:
        report.to_json(args.out)
    print(format_table({args.label: report}))
    return 0


# --- map ------------------------------------------------------------------------


def cmd_map(args) -> int:
    cfg = _config(args.config)
    grid_opts = dict(cfg.get("grid", {}))
    if args.cell:
        grid_opts["cell"] = tuple(args.cell)
    if args.radius is not None:
        grid_opts["radius"] = args.radius
    if args.power is not None:
        grid_opts["power"] = args.power
    if "cell" in grid_opts:
        grid_opts["cell"] = tuple(grid_opts["cell"])
    spec = GridSpec(**grid_opts)

    if args.ref is not None:
        ref = GeoRef(*args.ref)
    else:
        ref = parse_log(args.wq, require_calibration=False).calibration.origin
        if cfg.get("filter", {}).get("origin"):
            ref = FilterConfig.from_dict(cfg["filter"]).origin
    if ref is None:
        raise AquanavError("no geodetic origin: pass --ref or include one in the calibration")

    traj = read_trajectory(args.trajectory)
    sync = sync_wq(read_wq(args.wq), traj)
    grids = build_grids(sync.samples, spec)
    n = write_grid_csv(grids.values(), args.out, ref)
    log.info("wrote %d cells (%d readings unmatched)", n, sync.dropped)
    return 0


# --- geo ------------------------------------------------------------------------


def cmd_geo(args) -> int:
    ref = GeoRef(*args.ref)
    if args.direction == "to-local":
        x, y = to_local(args.a, args.b, ref)
        print(f"{float(x)!r} {float(y)!r}")
    else:
        lat, lon = to_geo(args.a, args.b, ref)
        print(f"{float(lat)!r} {float(lon)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aquanav", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=out_required)

    s = sub.add_parser("simulate", help="synthesise a sensor log and its ground truth")
    common(s)
    s.add_argument("--runs", type=int, default=1, help="number of seeds to run")
    s.add_argument("--jobs", type=int, default=None, help="worker processes for --runs")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="estimate a trajectory from a sensor log")
    r.add_argument("log")
    r.add_argument("--filter", choices=FILTERS, default="inekf")
    common(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="position error of an estimate against truth")
    e.add_argument("estimate")
    e.add_argument("truth")
    e.add_argument("--runtime", type=float)
    e.add_argument("--label", default="estimate")
    common(e, out_required=False)
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("map", help="grid water-quality readings along a trajectory")
    m.add_argument("trajectory")
    m.add_argument("wq", help="log file holding water-quality records")
    m.add_argument("--cell", type=float, nargs=3)
    m.add_argument("--radius", type=float)
    m.add_argument("--power", type=float)
    m.add_argument("--ref", type=float, nargs=2, metavar=("LAT", "LON"))
    common(m)
    m.set_defaults(func=cmd_map)

    g = sub.add_parser("geo", help="convert between geodetic and local coordinates")
    g.add_argument("direction", choices=("to-local", "to-geo"))
    g.add_argument("a", type=float, help="latitude or x")
    g.add_argument("b", type=float, help="longitude or y")
    g.add_argument("--ref", type=float, nargs=2, metavar=("LAT", "LON"), required=True)
    g.set_defaults(func=cmd_geo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AquanavError, ValueError, OSError, KeyError, TypeError, yaml.YAMLError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
