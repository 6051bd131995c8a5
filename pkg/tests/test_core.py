import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfgat.core import (CollisionEvent, RngStream, UavState, Vec3, clamp_norm, detect_collisions, rng_draw,
                        step_kinematics, step_kinematics_batch)

from oracles import pairwise_events


def test_zero_accel_moves_by_velocity():
    s = step_kinematics(UavState(0, (0, 0, 0), (1, 0, 0)), (0, 0, 0), 1.0)
    assert s.position == Vec3(1, 0, 0)
    assert s.timestamp == 1.0


def test_velocity_clamped_at_vmax():
    s = step_kinematics(UavState(0, (0, 0, 0), (0, 0, 0)), (2, 0, 0), 1.0, v_max=1.0)
    assert s.velocity == Vec3(1, 0, 0)


def test_hand_arithmetic_step():
    s = step_kinematics(UavState(0, (1, 1, 0), (1, 1, 0)), (0.5, -0.5, 0), 0.2)
    assert np.allclose(s.velocity, (1.1, 0.9, 0))
    assert np.allclose(s.position, (1.2, 1.2, 0))


@pytest.mark.parametrize("bad", [(np.nan, 0, 0), (np.inf, 0, 0)])
def test_non_finite_accel_rejected(bad):
    with pytest.raises(ValueError):
        step_kinematics(UavState(0, (0, 0, 0), (0, 0, 0)), bad, 0.1)


def test_non_finite_state_rejected():
    with pytest.raises(ValueError):
        UavState(0, (np.nan, 0, 0), (0, 0, 0))


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        step_kinematics(UavState(0, (0, 0, 0), (0, 0, 0)), (0, 0, 0), 0.0)


def test_kinematics_bit_identical():
    s = UavState(3, (0.1, 0.2, 0.3), (4.0, -2.0, 1.0), 1.5)
    a = step_kinematics(s, (0.7, 0.1, -0.3), 0.01)
    b = step_kinematics(s, (0.7, 0.1, -0.3), 0.01)
    assert a == b


def test_batch_matches_scalar():
    rng = np.random.default_rng(1)
    pos, vel, acc = rng.normal(size=(3, 20, 3)) * 10
    p2, v2 = step_kinematics_batch(pos, vel, acc, 0.1, 20.0)
    for i in range(20):
        s = step_kinematics(UavState(i, pos[i], vel[i]), acc[i], 0.1, 20.0)
        assert np.allclose(s.position, p2[i]) and np.allclose(s.velocity, v2[i])


def test_identical_positions_one_collision():
    ev = detect_collisions([UavState(0, (1, 1, 1), (0, 0, 0)), UavState(1, (1, 1, 1), (0, 0, 0))])
    assert [(e.pair, e.kind) for e in ev] == [((0, 1), "collision")]


def test_boundary_is_strict():
    ev = detect_collisions([UavState(0, (0, 0, 0), (0, 0, 0)), UavState(1, (4, 0, 0), (0, 0, 0))],
                           safety_radius=2.0, near_miss_radius=4.0)
    assert ev == []


def test_three_uavs_only_first_pair():
    states = [UavState(i, p, (0, 0, 0)) for i, p in enumerate([(0, 0, 0), (3, 0, 0), (10, 0, 0)])]
    ev = detect_collisions(states, safety_radius=2.0)
    assert [e.pair for e in ev if e.kind == "collision"] == [(0, 1)]


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        detect_collisions([UavState(1, (0, 0, 0), (0, 0, 0)), UavState(1, (9, 0, 0), (0, 0, 0))])


def test_mixed_timestamps_rejected():
    with pytest.raises(ValueError):
        detect_collisions([UavState(0, (0, 0, 0), (0, 0, 0), 0.0), UavState(1, (9, 0, 0), (0, 0, 0), 1.0)])


def test_event_pair_ordered_and_typed():
    ev = detect_collisions([UavState(7, (0, 0, 0), (0, 0, 0)), UavState(2, (4.5, 0, 0), (0, 0, 0))])
    assert ev == [CollisionEvent((2, 7), 4.5, 0.0, "near_miss")]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_detect_collisions_matches_bruteforce(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 25, size=(n, 3))
    ids = list(rng.permutation(1000)[:n])
    states = [UavState(int(i), p, (0, 0, 0)) for i, p in zip(ids, pts)]
    got = sorted((e.pair, e.kind) for e in detect_collisions(states, 2.0, 5.0))
    want = pairwise_events(pts.tolist(), [int(i) for i in ids], 2.0, 5.0)
    assert got == want


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.floats(0.01, 100))
def test_clamp_norm_never_increases_and_keeps_direction(v, limit):
    v = np.array(v)
    c = clamp_norm(v, limit)
    assert np.linalg.norm(c) <= max(np.linalg.norm(v), 0) + 1e-12
    assert np.linalg.norm(c) <= limit * (1 + 1e-12) or np.linalg.norm(v) <= limit
    if np.linalg.norm(v) > 0:
        assert np.allclose(np.cross(c, v), 0, atol=1e-6 * np.linalg.norm(v) ** 2)
        assert c @ v >= 0


def test_rng_determinism_and_independence():
    a = [rng_draw(RngStream(5, 2), "uniform01") for _ in range(3)]
    s1, s2 = RngStream(5, 2), RngStream(5, 2)
    assert [rng_draw(s1, "normal", 1.0) for _ in range(5)] == [rng_draw(s2, "normal", 1.0) for _ in range(5)]
    assert RngStream(5, 2).uniform01(5).tolist() != RngStream(5, 3).uniform01(5).tolist()
    assert len(set(a)) == 1


def test_rng_keyed_streams_stable():
    assert RngStream.keyed(1, "beacon", 4).uniform01() == RngStream.keyed(1, "beacon", 4).uniform01()
    assert RngStream.keyed(1, "beacon", 4).uniform01() != RngStream.keyed(1, "beacon", 5).uniform01()


def test_laplace_mean_near_zero():
    x = RngStream(0, 1).laplace(1.0, 100_000)
    assert abs(x.mean()) < 0.02


def test_uniform_range():
    x = RngStream(9, 9).uniform01(50_000)
    assert x.min() >= 0 and x.max() < 1


@pytest.mark.parametrize("kind,param", [("laplace", 0.0), ("normal", -1.0), ("bogus", 1.0)])
def test_rng_draw_errors(kind, param):
    with pytest.raises(ValueError):
        rng_draw(RngStream(0), kind, param)
