import json
import sys

import numpy as np
import pytest

from hfgat.core import RngStream
from hfgat.engine import (AdversaryProfile, ConfigError, RunEvents, Scenario, Simulation, apply_adversary,
                          byzantine_ids, compute_metrics, decide, generate_missions, load_scenario,
                          parse_scenario, reflexive_maneuver, run_scenario, write_csv)
from hfgat.engine.adversary import poison_gradient, spoof_offset
from hfgat.engine.config import CommJam, GradientPoison, PositionSpoof
from hfgat.engine.decide import EgoContext, WorldView, local_neighbors
from hfgat.engine.missions import MissionSpec
from hfgat.engine.pretrain import pretrained_params
from hfgat.engine.runner import baseline_pipelines, region_grid
from hfgat.gradient import GradientVector
from hfgat.privacy import adaptive_epsilon
from hfgat.simnet import LinkModel

from oracles import closest_approach

SC = Scenario()


def manual_sim(pipeline, starts, goals, seed=0, duration=40.0, **changes):
    sc = Scenario(n_uavs=len(starts), pipeline=pipeline, duration=duration).updated(**changes)
    sim = Simulation(sc, seed)
    starts, goals = np.array(starts, float), np.array(goals, float)
    sim.pos, sim.goals = starts.copy(), goals.copy()
    d = goals - starts
    sim.vel = d / np.linalg.norm(d, axis=1, keepdims=True) * sc.mission.cruise_speed
    sim.missions = [MissionSpec(i, tuple(s), (tuple(g),), 10.0, float(np.linalg.norm(g - s)) / 15 * 1.3 + 10)
                    for i, (s, g) in enumerate(zip(starts, goals))]
    return sim


# reflexive manoeuvre

def _miss(r, u):
    return np.linalg.norm(closest_approach(r, u, np.inf)[1])


def test_reflexive_perpendicular_full_magnitude_and_opens_cpa():
    rng = np.random.default_rng(0)
    for _ in range(100):
        ego_p, ego_v = rng.uniform(-50, 50, 3), rng.uniform(-15, 15, 3)
        nb_p, nb_v = ego_p + rng.uniform(-40, 40, 3), rng.uniform(-15, 15, 3)
        a = reflexive_maneuver(ego_p, ego_v, nb_p, nb_v, 10.0, 0.1)
        r, u = nb_p - ego_p, nb_v - ego_v
        assert np.linalg.norm(a) == pytest.approx(10.0)
        assert abs(a @ r) <= 1e-9 * np.linalg.norm(r) * 10
        assert _miss(r, u - 0.1 * a) >= _miss(r, u) - 1e-9


def test_reflexive_exact_head_on_is_horizontal():
    a = reflexive_maneuver([0, 0, 100], [15, 0, 0], [100, 0, 100], [-15, 0, 0], 10.0)
    assert np.allclose(np.abs(a), [0, 10, 0])


def _view(pos, vel, T=10):
    pos, vel = np.array(pos, float), np.array(vel, float)
    win = np.repeat(np.concatenate([pos, vel], axis=1)[:, None, :], T, axis=1)
    return WorldView(np.arange(len(pos)), pos, vel, win)


def _ego(view, i, goal, **kw):
    return EgoContext(i, view.est_pos[i].copy(), view.vel[i].copy(), view.windows[i], np.array(goal, float), **kw)


def test_local_neighbor_ties_by_lower_id():
    view = _view([(0, 0, 0), (10, 0, 0), (-10, 0, 0), (0, 10, 0)], [(0, 0, 0)] * 4)
    rows = local_neighbors(view, _ego(view, 0, (0, 0, 0)), 100.0, 2)
    assert list(view.ids[rows]) == [1, 2]


def test_decide_reflexive_skips_regional():
    view = _view([(0, 0, 100), (12, 0, 100)], [(15, 0, 0), (-15, 0, 0)])
    ego = _ego(view, 0, (500, 0, 100), swarm_size=2, learn_batch=[])
    dec = decide(ego, view, 0.0, pretrained_params(), SC, RngStream(0))
    assert dec.reflexive and dec.max_risk > SC.decision.tau_critical
    assert dec.trace.phases == ["local"] and dec.trace.local_only
    assert dec.gradient is None and dec.context_targets == []
    assert np.linalg.norm(dec.action) == pytest.approx(SC.kinematics.a_max)


def test_reflexive_target_tie_broken_by_lower_id(monkeypatch):
    dmod = sys.modules["hfgat.engine.decide"]
    monkeypatch.setattr(dmod, "risks_for", lambda p, e, w: np.full(len(w), 0.9))
    view = _view([(0, 0, 100), (0, 20, 100), (0, -20, 100)], [(15, 0, 0), (15, 0, 0), (15, 0, 0)])
    view.ids = np.array([5, 9, 7])
    view.row = {5: 0, 9: 1, 7: 2}
    ego = EgoContext(5, view.est_pos[0].copy(), view.vel[0].copy(), view.windows[0], np.array([500.0, 0, 100]))
    dec = decide(ego, view, 0.0, pretrained_params(), SC, RngStream(0))
    want = reflexive_maneuver(ego.pos, ego.vel, view.est_pos[2], view.vel[2], SC.kinematics.a_max, 0.1)
    assert dec.reflexive and np.array_equal(dec.action, want)


def test_decide_no_neighbors_steers_to_goal_and_learns():
    view = _view([(0, 0, 100), (900, 900, 100)], [(0, 0, 0), (0, 0, 0)])
    ego = _ego(view, 0, (500, 0, 100), swarm_size=1, learn_batch=[])
    dec = decide(ego, view, 0.0, pretrained_params(), SC, RngStream(0))
    assert not dec.reflexive and dec.trace.phases == ["local", "regional"]
    assert dec.action[0] > 0 and abs(dec.action[1]) < 1e-12
    assert dec.gradient is not None and dec.gradient.noised
    assert dec.trace.epsilon == adaptive_epsilon(0.0)


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0])
def test_decide_epsilon_follows_threat(theta):
    view = _view([(0, 0, 100), (600, 600, 100)], [(0, 0, 0), (0, 0, 0)])
    dec = decide(_ego(view, 0, (500, 0, 100), learn_batch=[]), view, theta, pretrained_params(), SC, RngStream(1))
    assert dec.trace.epsilon == adaptive_epsilon(theta)


def test_critical_event_one_audit_per_rule():
    view = _view([(0, 0, 100), (600, 600, 100)], [(0, 0, 0), (0, 0, 0)])
    dec = decide(_ego(view, 0, (500, 0, 100), pending_critical=["near-miss"]), view, 0.0, pretrained_params(),
                 SC, RngStream(0))
    assert "global" in dec.trace.phases and dec.trace.consensus_rounds == 1
    assert len(dec.audits) == 1


# adversary

def test_sign_flip_example():
    g = GradientVector(np.array([1.0, -2.0]))
    out = poison_gradient(GradientPoison(mode="sign_flip", c=100), g, RngStream(0))
    assert np.array_equal(out.values, [-100.0, 200.0])


def test_zero_fraction_passes_through():
    prof = AdversaryProfile(byzantine_fraction=0.0)
    g = GradientVector(np.array([1.0, 2.0]))
    assert apply_adversary(prof, g, RngStream(0)) is g
    pos = np.array([1.0, 2.0, 3.0])
    assert apply_adversary(prof, pos, RngStream(0)) is pos
    assert byzantine_ids(prof, 100, 0) == frozenset()


def test_spoof_offset_exact_magnitude():
    for s in range(20):
        assert np.linalg.norm(spoof_offset(PositionSpoof(offset=50), RngStream(s))) == pytest.approx(50.0)


def test_comm_jam_adds_loss():
    prof = AdversaryProfile(byzantine_fraction=0.1, behaviors=[CommJam(extra_loss=0.2)])
    assert apply_adversary(prof, LinkModel(loss_prob=0.01), RngStream(0)).loss_prob == pytest.approx(0.21)


def test_byzantine_count_and_tolerance_flag():
    prof = AdversaryProfile(byzantine_fraction=0.3)
    assert len(byzantine_ids(prof, 100, 3)) == 30
    assert byzantine_ids(prof, 100, 3) == byzantine_ids(prof, 100, 3)
    assert prof.tolerance_flag(100) == "within"
    assert AdversaryProfile(byzantine_fraction=0.4).tolerance_flag(100) == "beyond"


# configuration

def test_config_rejects_single_uav_and_unknown_keys():
    with pytest.raises(ConfigError):
        parse_scenario({"n_uavs": 1})
    with pytest.raises(ConfigError):
        parse_scenario({"bogus": 3})
    assert parse_scenario({}) == Scenario()


def test_load_scenario_json_and_yaml(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"n_uavs": 5, "pipeline": "disabled"}))
    (tmp_path / "b.yaml").write_text("n_uavs: 5\npipeline: disabled\n")
    assert load_scenario(tmp_path / "a.json") == load_scenario(tmp_path / "b.yaml")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.json")
    (tmp_path / "c.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "c.json")


def test_updated_dotted_override():
    sc = SC.updated(**{"adversary.byzantine_fraction": 0.2, "pipeline": "monolithic"})
    assert sc.adversary.byzantine_fraction == 0.2 and sc.pipeline == "monolithic"


def test_region_grid_targets_35():
    assert region_grid(SC) == 2
    assert region_grid(SC.updated(n_uavs=500)) == 4
    assert region_grid(SC.updated(n_uavs=10)) == 1


def test_missions_deterministic_and_in_bounds():
    sc = SC.updated(n_uavs=30)
    a, b = generate_missions(sc, 4), generate_missions(sc, 4)
    assert a == b
    for m in a:
        assert 250 - 1e-9 <= m.path_length() <= 550 + 1e-9
        assert all(50 <= c <= 950 for c in (*m.start[:2], *m.goal[:2]))


# metrics

def test_compute_metrics_hand_values():
    ev = RunEvents(encounter_pairs={(i, i + 1) for i in range(100)}, collision_pairs={(0, 1), (2, 3)})
    missions = [MissionSpec(i, (0, 0, 0), ((1, 0, 0),), 1.0, 10.0) for i in range(5)]
    ev.arrivals = {0: 5.0, 4: 5.0, 3: 11.0}
    rep = compute_metrics(ev, [k / 1000 for k in range(1, 101)], missions)
    assert rep.collision_rate == pytest.approx(2.0)
    assert rep.latency_p95_ms == pytest.approx(95.0)
    assert rep.latency_p50_ms == pytest.approx(50.0)
    assert rep.mission_success_rate == pytest.approx(20.0)   # only uav 4 arrives in time uncollided


def test_empty_metrics_are_zero():
    rep = compute_metrics(RunEvents(), [], [])
    assert rep.collision_rate == 0.0 and rep.latency_p95_ms == 0.0


# end-to-end runs

def test_parallel_pair_no_collision_full_success():
    rep = manual_sim("hfgat", [(200, 400, 100), (200, 600, 100)], [(800, 400, 100), (800, 600, 100)]).run()
    assert rep.colliding_pairs == 0 and rep.mission_success_rate == 100.0


@pytest.mark.parametrize("seed", range(10))
def test_head_on_avoided_by_hfgat_not_by_disabled(seed):
    starts, goals = [(200, 500, 100), (800, 500, 100)], [(800, 500, 100), (200, 500, 100)]
    assert manual_sim("disabled", starts, goals, seed).run().colliding_pairs == 1
    rep = manual_sim("hfgat", starts, goals, seed).run()
    assert rep.colliding_pairs == 0 and rep.reflexive_decisions >= 0


def test_run_deterministic_csv():
    sc = Scenario(n_uavs=20, duration=5.0)
    assert write_csv([run_scenario(sc, 3)]) == write_csv([run_scenario(sc, 3)])


def test_epsilon_trace_matches_threat_trace():
    sim = Simulation(Scenario(n_uavs=20, duration=4.0, threat={"pinned": 0.4}), 0)
    rep = sim.run()
    assert rep.epsilon_trace and all(e == adaptive_epsilon(0.4) for e in rep.epsilon_trace)


@pytest.mark.parametrize("pipeline", ["hfgat", "fedavg_variant", "monolithic", "centralized", "disabled"])
def test_every_pipeline_runs(pipeline):
    rep = run_scenario(Scenario(n_uavs=12, duration=3.0, pipeline=pipeline), 1)
    assert rep.labels["pipeline"] == pipeline
    assert rep.decisions > 0 and 0 <= rep.latency_p50_ms <= rep.latency_p95_ms


def test_monolithic_compute_exceeds_regional():
    sc = Scenario(n_uavs=60, duration=3.0)
    mono = run_scenario(sc.updated(pipeline="monolithic"), 0)
    reg = run_scenario(sc, 0)
    assert mono.compute_p50_ms > reg.compute_p50_ms


def test_centralized_holds_last_action_on_drop():
    sim = manual_sim("centralized", [(200, 400, 100), (200, 600, 100)], [(800, 400, 100), (800, 600, 100)],
                     duration=2.0, **{"link.loss_prob": 1.0})
    sim.accel[:] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    sim.run()
    assert np.array_equal(sim.accel, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert sim.latencies == []


def test_pipeline_table():
    assert baseline_pipelines(SC).aggregator_mode == "robust"
    assert baseline_pipelines(SC.updated(pipeline="fedavg_variant")).anomaly_gate is False
    assert baseline_pipelines(SC.updated(pipeline="monolithic")).dense_all_peers
