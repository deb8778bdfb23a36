import math

import numpy as np
import pytest

from aquanav import inekf, sim
from aquanav.geo import to_local
from aquanav.ingest import serialize_log
from aquanav.records import DepthSample, DvlSample, GpsSample, ImuSample
from aquanav.liegroup import skew

QUIET = sim.NoiseSigmas.zero()


def test_straight_run_endpoint():
    cfg = sim.ScenarioConfig(kind="straight", speed=1.0, duration=10, ramp_time=0, dive_time=0)
    truth = sim.generate_truth(cfg)
    np.testing.assert_allclose(truth.p[-1], (10, 0, -0.2), atol=1e-9)


def test_loiter_centripetal_acceleration():
    r, v = 10.0, 0.8
    cfg = sim.ScenarioConfig(kind="loiter", speed=v, loiter_radius=r, duration=60)
    truth = sim.generate_truth(cfg)
    steady = truth.t > cfg.ramp_time + 1
    omega = v / r
    np.testing.assert_allclose(np.linalg.norm(truth.a[steady, :2], axis=1), r * omega**2, rtol=1e-9)
    np.testing.assert_allclose(truth.yaw_rate[steady], omega, rtol=1e-9)


def test_lawnmower_path_length():
    path = sim.lawnmower_path(3, 20.0, 5.0)
    s = np.linspace(0, path.length, 200001)
    x, y, _, _ = path.evaluate(s)
    integrated = np.hypot(np.diff(x), np.diff(y)).sum()
    assert integrated == pytest.approx(60 + 2 * math.pi * 2.5, abs=1e-4)


def test_lawnmower_legs_are_parallel_and_spaced():
    path = sim.lawnmower_path(3, 20.0, 5.0)
    ends = [seg.end()[0] for seg in path.segments]
    np.testing.assert_allclose(ends[0], (20, 0), atol=1e-12)
    np.testing.assert_allclose(ends[2], (0, 5), atol=1e-12)
    np.testing.assert_allclose(ends[4], (20, 10), atol=1e-12)


def _central_difference_error(truth):
    dt = truth.t[1] - truth.t[0]
    central = (truth.p[2:] - truth.p[:-2]) / (2 * dt)
    return np.abs(central - truth.v[1:-1]).max(), dt


def test_velocity_matches_position_differences_on_smooth_path():
    truth = sim.generate_truth(sim.ScenarioConfig(kind="loiter", duration=120, depth_amplitude=0.3))
    err, dt = _central_difference_error(truth)
    assert err < 10 * dt**2


def test_velocity_matches_position_differences_across_turns():
    # Entering a turn steps the acceleration, which costs one order of dt.
    truth = sim.generate_truth(sim.ScenarioConfig(kind="lawnmower", duration=120))
    err, dt = _central_difference_error(truth)
    jump = np.abs(np.diff(truth.a, axis=0)).max()
    assert err <= dt * jump / 4 + 10 * dt**2


def test_stationary_imu_reads_gravity():
    cfg = sim.ScenarioConfig(kind="straight", speed=0.0, depth=0.0, duration=5, heading=0.7,
                             noise=QUIET)
    truth = sim.generate_truth(cfg)
    log = sim.sample_sensors(truth, cfg)
    for rec in log.of_type(ImuSample):
        assert rec.gyro == (0.0, 0.0, 0.0)
        np.testing.assert_allclose(rec.accel, (0, 0, 9.81), atol=1e-12)


def test_noise_free_dvl_is_body_velocity_through_extrinsics():
    cfg = sim.ScenarioConfig(kind="loiter", duration=20, noise=QUIET,
                             dvl_rotation=tuple(np.array(
                                 [[0, -1, 0], [1, 0, 0], [0, 0, 1.0]]).ravel()))
    truth = sim.generate_truth(cfg)
    log = sim.sample_sensors(truth, cfg)
    ext = cfg.extrinsics
    T = skew(ext.t)
    R = truth.R
    for rec in log.of_type(DvlSample)[5:50]:
        k = int(round(rec.t * 100))
        expected_body = R[k].T @ truth.v[k]
        rebuilt = ext.R @ np.array(rec.velocity) + T @ np.array([0, 0, truth.yaw_rate[k]])
        np.testing.assert_allclose(rebuilt, expected_body, atol=1e-4)


def test_noise_free_depth_and_gps():
    cfg = sim.ScenarioConfig(kind="lawnmower", duration=20, noise=QUIET)
    truth = sim.generate_truth(cfg)
    log = sim.sample_sensors(truth, cfg)
    for rec in log.of_type(DepthSample):
        k = int(round(rec.t * 100))
        assert rec.depth == pytest.approx(-truth.p[k, 2], abs=1e-12)
    for rec in log.of_type(GpsSample):
        k = int(round(rec.t * 100))
        x, y = to_local(rec.lat, rec.lon, cfg.origin)
        np.testing.assert_allclose((x, y), truth.p[k, :2], atol=1e-6)


def test_log_is_time_ordered_with_expected_rates():
    cfg = sim.ScenarioConfig(kind="lawnmower", duration=30)
    log = sim.sample_sensors(sim.generate_truth(cfg), cfg)
    t = [r.t for r in log.records]
    assert all(a <= b for a, b in zip(t, t[1:]))
    counts = {kind: len(log.of_type(kind)) for kind in (ImuSample, DvlSample, DepthSample, GpsSample)}
    assert abs(counts[ImuSample] - 30 * 100) <= 1
    assert abs(counts[DvlSample] - 30 * 20) <= 1
    assert abs(counts[DepthSample] - 30 * 20) <= 1
    assert abs(counts[GpsSample] - 30 * 5) <= 1


def test_gps_windows_schedule():
    cfg = sim.ScenarioConfig(kind="lawnmower", duration=300, gps_schedule="windows")
    log = sim.sample_sensors(sim.generate_truth(cfg), cfg)
    times = np.array([r.t for r in log.of_type(GpsSample)])
    assert np.all(np.mod(times, 120) < 10)
    assert {int(t // 120) for t in times} == {0, 1, 2}


def test_gps_initial_schedule_has_one_fix():
    cfg = sim.ScenarioConfig(kind="lawnmower", duration=30, gps_schedule="initial")
    fixes = sim.sample_sensors(sim.generate_truth(cfg), cfg).of_type(GpsSample)
    assert len(fixes) == 1 and fixes[0].t == 0.0


def test_same_seed_gives_identical_files(tmp_path):
    cfg = sim.ScenarioConfig(kind="loiter", duration=10, seed=42)
    for name in ("a.jsonl", "b.jsonl"):
        serialize_log(sim.sample_sensors(sim.generate_truth(cfg), cfg), tmp_path / name)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_different_seeds_differ():
    a = sim.ScenarioConfig(kind="loiter", duration=5, seed=1)
    b = sim.ScenarioConfig(kind="loiter", duration=5, seed=2)
    ra = sim.sample_sensors(sim.generate_truth(a), a).records
    rb = sim.sample_sensors(sim.generate_truth(b), b).records
    assert ra[5] != rb[5]


def test_noise_free_replay_closes():
    cfg = sim.ScenarioConfig(kind="loiter", duration=40, noise=QUIET)
    truth = sim.generate_truth(cfg)
    est = inekf.run_filter(sim.sample_sensors(truth, cfg))
    assert np.sqrt(np.mean(np.sum((est.p - truth.p) ** 2, axis=1))) <= 0.05


def test_invalid_scenario_rejected():
    with pytest.raises(ValueError):
        sim.ScenarioConfig(kind="spiral")
    with pytest.raises(ValueError):
        sim.ScenarioConfig(duration=0)
    with pytest.raises(ValueError):
        sim.SensorRates(imu=0)
    with pytest.raises(ValueError):
        sim.ScenarioConfig.from_dict({"warp": 9})


def test_matched_noise_uses_imu_period():
    nm = sim.matched_noise(sim.NoiseSigmas(), 100.0)
    assert nm.gyro[0, 0] == pytest.approx(0.005**2 / 100)
    assert nm.accel[0, 0] == pytest.approx(0.05**2 / 100)
    assert nm.dvl[0, 0] == pytest.approx(0.02**2)
    assert nm.pseudo[2, 2] == pytest.approx(0.01**2)


# --- fields -----------------------------------------------------------------------


def _truth(**kw):
    kw.setdefault("kind", "lawnmower")
    kw.setdefault("duration", 120)
    return sim.generate_truth(sim.ScenarioConfig(**kw))


def test_constant_field():
    recs = sim.sample_field(sim.FieldConfig("pH", "constant", value=7.6), _truth())
    assert len(recs) == 121
    assert all(r.value == 7.6 and r.units == "pH" for r in recs)


def test_linear_field_in_depth_follows_profile():
    truth = _truth(depth_amplitude=0.4)
    recs = sim.sample_field(sim.FieldConfig("temperature", "linear", gradient=(0, 0, 1.0)), truth)
    for r in recs:
        k = int(round(r.t * 100))
        assert r.value == pytest.approx(truth.p[k, 2], abs=1e-15)


def test_plume_peaks_at_closest_approach():
    truth = _truth()
    centre = (30.0, 1.0, -0.2)
    fld = sim.FieldConfig("chlorophyll", "plume", baseline=1.0,
                          plumes=({"amplitude": 5.0, "center": centre, "sigma": 4.0},))
    recs = sim.sample_field(fld, truth)
    times = np.array([r.t for r in recs])
    values = np.array([r.value for r in recs])
    k = np.round(times * 100).astype(int)
    dist = np.linalg.norm(truth.p[k] - centre, axis=1)
    assert np.argmax(values) == np.argmin(dist)


def test_field_noise_is_seeded():
    fld = sim.FieldConfig("salinity", "constant", value=30.0)
    a = sim.sample_field(fld, _truth(), noise=0.1, seed=3)
    b = sim.sample_field(fld, _truth(), noise=0.1, seed=3)
    assert a == b and a[0].value != 30.0


def test_unknown_field_parameter():
    with pytest.raises(ValueError):
        sim.FieldConfig("turbidity_ntu")
