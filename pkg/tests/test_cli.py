import csv
import json

import numpy as np
import pytest
import yaml

from aquanav.cli import main
from aquanav.geo import GeoRef, to_local
from aquanav.ingest import parse_log, read_trajectory, write_trajectory
from aquanav.records import ImuSample
from aquanav.trajectory import TrajectoryEstimate
from aquanav.wqmap import REPORT_ROWS


def write_config(path, **sections):
    path.write_text(yaml.safe_dump(sections))
    return str(path)


@pytest.fixture
def short_config(tmp_path):
    return write_config(
        tmp_path / "cfg.yaml",
        scenario={"kind": "lawnmower", "duration": 30},
        fields=[{"param": "pH", "kind": "constant", "value": 7.4},
                {"param": "temperature", "kind": "linear", "offset": 15.0, "gradient": [0.05, 0.0, 0.0]}],
    )


def test_simulate_is_deterministic(tmp_path, short_config):
    for name in ("a", "b"):
        assert main(["simulate", "--config", short_config, "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for name in ("log.jsonl", "truth.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "simulate"


def test_simulated_log_span_and_imu_count(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", scenario={"kind": "loiter", "duration": 300})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    log = parse_log(tmp_path / "s" / "log.jsonl")
    t0, t1 = log.time_span()
    assert abs((t1 - t0) - 300) <= 0.01
    assert abs(len(log.of_type(ImuSample)) - 300 * 100) <= 1


def test_batch_runs_get_their_own_directories(tmp_path, short_config):
    assert main(["simulate", "--config", short_config, "--seed", "3", "--runs", "2", "--jobs", "2",
                 "--out", str(tmp_path / "mc")]) == 0
    a = (tmp_path / "mc" / "run_0003" / "log.jsonl").read_bytes()
    b = (tmp_path / "mc" / "run_0004" / "log.jsonl").read_bytes()
    assert a != b


@pytest.mark.parametrize("mode", ["inekf", "ekf", "deadreckon"])
def test_noise_free_run_matches_truth(tmp_path, mode):
    cfg = write_config(tmp_path / "c.yaml", scenario={"kind": "lawnmower", "duration": 30,
                                                       "noise": {"gyro": 0, "accel": 0, "dvl": 0,
                                                                 "depth": 0, "gps": 0}})
    sim_dir, run_dir = tmp_path / "s", tmp_path / mode
    assert main(["simulate", "--config", cfg, "--out", str(sim_dir)]) == 0
    assert main(["run", str(sim_dir / "log.jsonl"), "--filter", mode, "--out", str(run_dir)]) == 0
    est = read_trajectory(run_dir / "trajectory.csv")
    truth = read_trajectory(sim_dir / "truth.csv")
    assert np.sqrt(np.mean(np.sum((est.p - truth.p) ** 2, axis=1))) <= 0.05
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["filter"] == mode and manifest["runtime"] > 0


def test_empty_log_fails_cleanly(tmp_path, caplog):
    path = tmp_path / "empty.jsonl"
    path.write_text(json.dumps({"type": "header", "calibration": {}}) + "\n")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) != 0
    assert "no IMU records" in caplog.text


def test_missing_file_fails_cleanly(tmp_path):
    assert main(["run", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o")]) == 1
    assert main(["evaluate", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 1


def _offset_fixture(tmp_path):
    n = 100
    t = np.arange(n) * 0.01
    p = np.c_[np.linspace(0, 5, n), np.sin(t), -0.2 * np.ones(n)]
    R = np.tile(np.eye(3), (n, 1, 1))
    write_trajectory(TrajectoryEstimate(t, R, np.zeros((n, 3)), p), tmp_path / "truth.csv")
    write_trajectory(TrajectoryEstimate(t, R, np.zeros((n, 3)), p + (1.0, 0, 0)), tmp_path / "est.csv")


def test_evaluate_constant_offset(tmp_path, capsys):
    _offset_fixture(tmp_path)
    rc = main(["evaluate", str(tmp_path / "est.csv"), str(tmp_path / "truth.csv"),
               "--runtime", "2.5", "--out", str(tmp_path / "r.json")])
    assert rc == 0
    expected = {"MAE x": 1.0, "MAE y": 0.0, "MAE z": 0.0, "Total Error": 1.0,
                "Total Variance": 0.0, "Runtime": 2.5}
    rows = json.loads((tmp_path / "r.json").read_text())["rows"]
    assert rows == pytest.approx(expected, abs=1e-12)
    printed = capsys.readouterr().out.splitlines()
    table = {ln[:14].strip(): float(ln[14:]) for ln in printed[1:]}
    assert list(table) == list(REPORT_ROWS)
    assert table == expected


def test_evaluate_identical_is_zero(tmp_path):
    _offset_fixture(tmp_path)
    main(["evaluate", str(tmp_path / "truth.csv"), str(tmp_path / "truth.csv"), "--out", str(tmp_path / "r.json")])
    rows = json.loads((tmp_path / "r.json").read_text())["rows"]
    assert all(v == 0.0 for v in rows.values())


def test_map_constant_field(tmp_path, short_config):
    sim_dir = tmp_path / "s"
    assert main(["simulate", "--config", short_config, "--out", str(sim_dir)]) == 0
    out = tmp_path / "grid.csv"
    assert main(["map", str(sim_dir / "truth.csv"), str(sim_dir / "log.jsonl"), "--out", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    ph = [r for r in rows if r["parameter"] == "pH"]
    assert ph and all(float(r["value"]) == 7.4 for r in ph)
    assert all(int(r["count"]) >= 1 for r in rows)
    # Coordinates round-trip through the log's geodetic origin.
    origin = parse_log(sim_dir / "log.jsonl").calibration.origin
    x, y = to_local(float(rows[0]["lat"]), float(rows[0]["lon"]), origin)
    assert (x, y) == pytest.approx((float(rows[0]["x"]), float(rows[0]["y"])), abs=1e-6)


def test_map_requires_an_origin(tmp_path):
    (tmp_path / "wq.jsonl").write_text(json.dumps({"type": "wq", "t": 0.0, "param": "pH", "value": 7.0}) + "\n")
    _offset_fixture(tmp_path)
    args = ["map", str(tmp_path / "truth.csv"), str(tmp_path / "wq.jsonl"), "--out", str(tmp_path / "g.csv")]
    assert main(args) == 1
    assert main(args + ["--ref", "44.0", "-79.0"]) == 0


def test_geo_round_trip(capsys):
    ref = GeoRef(36.88, -76.25)
    assert main(["geo", "to-local", "36.881", "-76.249", "--ref", str(ref.lat), str(ref.lon)]) == 0
    x, y = map(float, capsys.readouterr().out.split())
    assert (x, y) == pytest.approx(tuple(map(float, to_local(36.881, -76.249, ref))), abs=1e-9)
    assert main(["geo", "to-geo", repr(x), repr(y), "--ref", str(ref.lat), str(ref.lon)]) == 0
    lat, lon = map(float, capsys.readouterr().out.split())
    assert (lat, lon) == pytest.approx((36.881, -76.249), abs=1e-9)


def test_geo_out_of_domain_fails():
    assert main(["geo", "to-local", "89.9", "0", "--ref", "0", "0"]) == 1
