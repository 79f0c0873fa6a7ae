import math
import time

import numpy as np
import pytest
from mmtrack import scenarios
from mmtrack.config import DEFAULT_RADARS, FieldOfView, RadarPose, StatusLabel
from mmtrack.errors import ScriptError
from mmtrack.geometry import apply_transform, build_transform, in_field_of_view
from mmtrack.simulator import (
    ActorScript,
    Scenario,
    SimProfile,
    StatusChange,
    load_scenario,
    posture_scatter,
    recording_files,
    scenario_from_dict,
    scenario_to_dict,
    simulate,
    stream,
)

QUIET = SimProfile(ghost_rate=0.0, clutter=())


def walker(duration=6.0):
    a = ActorScript(1, [(0.0, -1.0, 1.5), (duration / 2, 0.5, 3.0), (duration, 0.5, 3.0)],
                    [StatusChange(duration - 1.5, StatusLabel.FALLEN, 0.8)])
    return Scenario([a], duration, seed=5, profile=SimProfile(drop=0.05, corrupt=0.05), name="walker")


def test_same_seed_same_bytes(tmp_path):
    a, b = simulate(walker(), tmp_path / "a"), simulate(walker(), tmp_path / "b")
    assert a.streams == b.streams and a.truth == b.truth
    for name in ("radar1.mmr", "radar2.mmr", "radar3.mmr", "truth.csv", "scenario.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sc = walker()
    sc.seed = 6
    assert simulate(sc).streams != a.streams


def test_points_stay_in_view():
    out = simulate(walker())
    fov = {r.radar_id: r.fov for r in DEFAULT_RADARS}
    n = 0
    for rid, pkts in out.packets.items():
        for p in pkts:
            if len(p.points):
                assert in_field_of_view(fov[rid], p.points[:, :3]).all()
                assert (np.linalg.norm(p.points[:, :3], axis=1) <= fov[rid].max_range).all()
                n += len(p.points)
    assert n > 1000


def _wide_radars():
    wide = FieldOfView(180.0, 90.0, 50.0)
    return tuple(RadarPose(r.radar_id, r.position, r.rotation, wide) for r in DEFAULT_RADARS)


@pytest.mark.parametrize("moving", [False, True])
def test_point_counts_follow_configured_rate(moving):
    # with nothing clipped by the field of view, the body count is exactly Poisson(rate)
    wps = [(0.0, -1.5, 1.0), (25.0, 0.5, 3.5), (50.0, -1.5, 1.0)] if moving else [(0.0, -0.5, 2.0), (50.0, -0.5, 2.0)]
    sc = Scenario([ActorScript(1, wps)], 50.0, seed=3, profile=QUIET, radars=_wide_radars())
    out = simulate(sc)
    rate = QUIET.moving_rate if moving else QUIET.stationary_rate
    for rid, counts in out.counts.items():
        assert len(counts) == 1000
        assert abs(counts.mean() - rate) <= 3 * math.sqrt(rate / len(counts))
        assert abs(counts.var() - rate) <= 0.25 * rate  # Poisson: variance equals mean


def test_stationary_fewer_points_than_moving():
    a = ActorScript(1, [(0.0, -1.0, 1.5), (10.0, 0.5, 3.0), (20.0, 0.5, 3.0)])
    out = simulate(Scenario([a], 20.0, seed=2, profile=QUIET))
    for counts in out.counts.values():
        walk, still = counts[10:190], counts[210:]
        assert still.mean() < walk.mean()


def test_truth_and_packets_share_ticks():
    sc = walker()
    out = simulate(sc)
    ticks = sorted({r.tick for r in out.truth})
    assert ticks == list(range(sc.n_ticks))
    assert all(r.timestamp_us == r.tick * 50_000 for r in out.truth)
    for pkts in out.packets.values():
        assert [p.seq for p in pkts] == ticks
        assert all(p.seq * 50_000 <= p.timestamp_us < (p.seq + 1) * 50_000 for p in pkts)


def test_high_radar_sees_head_to_legs():
    a = ActorScript(1, [(0.0, 0.0, 1.0), (20.0, 0.0, 1.0)])
    out = simulate(Scenario([a], 20.0, seed=1, profile=SimProfile(ghost_rate=0.0, clutter=(), jitter=0.0)))
    spans = {}
    for r in DEFAULT_RADARS:
        T = build_transform(r)
        z = np.concatenate([apply_transform(T, p.points[:, :3])[:, 2] for p in out.packets[r.radar_id]
                            if len(p.points)])
        lo, hi = np.percentile(z, [5, 95])
        spans[r.radar_id] = (lo, hi)
    # the 1 m-high radar, one metre away, only catches the torso
    assert spans[1][0] > 0.4 and spans[1][1] < 1.5
    assert spans[2][0] < 0.35 and spans[2][1] > 1.55
    assert spans[2][1] - spans[2][0] > 1.3 * (spans[1][1] - spans[1][0])


def test_script_errors_name_actor_and_time():
    with pytest.raises(ScriptError, match=r"actor 4 at t=2"):
        Scenario([ActorScript(4, [(0.0, 0.0, 1.0), (2.0, 9.0, 1.0)])], 5.0).validate()
    with pytest.raises(ScriptError, match=r"actor 2 at t=1"):
        Scenario([ActorScript(2, [(1.0, 0.0, 1.0), (1.0, 0.0, 1.5)])], 5.0).validate()
    with pytest.raises(ScriptError, match="unique"):
        Scenario([ActorScript(1, [(0, 0, 1)]), ActorScript(1, [(0, 0, 2)])], 5.0).validate()


def test_scenario_dict_roundtrip():
    sc = walker()
    again = scenario_from_dict(scenario_to_dict(sc))
    assert scenario_to_dict(again) == scenario_to_dict(sc)
    assert again.actors[0].contact_times() == pytest.approx([5.3])
    with pytest.raises(ScriptError):
        scenario_from_dict({"duration": 5})


def test_bundled_scenarios():
    assert {s.actor_id for s in load_scenario("three_actors").actors} == {1, 2, 3}
    assert len(load_scenario("one_actor").actors) == 1
    assert load_scenario("one_actor", seed=9).seed == 9
    assert load_scenario("fall-3").actors[0].contact_times()
    assert not load_scenario("no_fall-3").actors[0].contact_times()
    with pytest.raises(ScriptError):
        scenarios.get("nowhere")
    with pytest.raises(ValueError):
        posture_scatter("crouching", np.random.default_rng(0))


def _drain(feed):
    got = []
    for pkt in feed:
        got.append(pkt)
    return got


def test_stream_pacing(tmp_path):
    sc = Scenario([ActorScript(1, [(0.0, 0.0, 2.0), (4.0, 0.0, 2.0)])], 4.0, seed=1, profile=QUIET)
    out = simulate(sc, tmp_path)
    stamps = [p.timestamp_us for pk in out.packets.values() for p in pk]
    span = (max(stamps) - min(stamps)) / 1e6
    for speed in (1.0, 2.0):
        t0 = time.monotonic()
        got = _drain(stream(tmp_path, speed=speed))
        wall = time.monotonic() - t0
        assert len(got) == 3 * sc.n_ticks
        assert wall == pytest.approx(span / speed, rel=0.01)


def test_stream_surfaces_corruption(tmp_path):
    sc = walker()
    sc.profile = SimProfile(drop=0.0, corrupt=0.1)
    out = simulate(sc, tmp_path)
    feed = stream(recording_files(tmp_path))
    got = _drain(feed)
    assert feed.bad_packets >= sum(out.corrupted.values()) > 0
    assert len(got) == sum(len(p) for p in out.packets.values()) - sum(out.corrupted.values())
    with pytest.raises(FileNotFoundError):
        stream({1: tmp_path / "missing.mmr"})
