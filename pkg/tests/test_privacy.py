import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hfgat.core import RngStream
from hfgat.gradient import GradientVector
from hfgat.privacy import (PrivacyConfig, PrivacyError, ThreatIndicators, ThreatObservation, ThreatWeights,
                           add_dp_noise, adaptive_epsilon, clip_gradient, epsilon_for_policy, laplace_cdf,
                           laplace_scale, noise_positions, threat_score, update_threat_indicators)

from oracles import epsilon, l1_clip, threat

unit = st.floats(0, 1)


def test_threat_extremes_and_hand_value():
    assert threat_score(ThreatIndicators(1, 1, 1), ThreatWeights(0.2, 0.2, 0.6)) == pytest.approx(1.0)
    assert threat_score(ThreatIndicators(0, 0, 0)) == 0.0
    assert threat_score(ThreatIndicators(0.4, 0.2, 0.1)) == pytest.approx(0.28, abs=1e-15)


def test_weights_must_sum_to_one():
    with pytest.raises(PrivacyError):
        ThreatWeights(0.5, 0.3, 0.3)
    with pytest.raises(PrivacyError):
        ThreatWeights(1.2, -0.2, 0.0)


def test_indicators_range_checked():
    with pytest.raises(PrivacyError):
        ThreatIndicators(1.5, 0, 0)


@settings(max_examples=200)
@given(unit, unit, unit)
def test_threat_matches_oracle(r, d, c):
    assert threat_score(ThreatIndicators(r, d, c)) == pytest.approx(threat(r, d, c), abs=1e-12)


@settings(max_examples=200)
@given(unit, unit, unit, st.floats(0, 1), st.integers(0, 2))
def test_threat_monotone(r, d, c, bump, which):
    base = [r, d, c]
    up = list(base)
    up[which] = min(1.0, up[which] + bump)
    assert threat_score(ThreatIndicators(*up)) >= threat_score(ThreatIndicators(*base))


def test_epsilon_endpoints_and_midpoint():
    assert adaptive_epsilon(0.0) == 1.0
    assert adaptive_epsilon(1.0) == 0.1
    assert adaptive_epsilon(0.5) == pytest.approx(0.55, abs=1e-15)


@pytest.mark.parametrize("theta", [-0.01, 1.01, float("nan")])
def test_epsilon_out_of_range(theta):
    with pytest.raises(PrivacyError):
        adaptive_epsilon(theta)


@settings(max_examples=200)
@given(unit, unit)
def test_epsilon_affine_monotone(a, b):
    assert adaptive_epsilon(a) == pytest.approx(epsilon(a), abs=1e-12)
    lo, hi = sorted((a, b))
    assert adaptive_epsilon(lo) >= adaptive_epsilon(hi)
    assert 0.1 <= adaptive_epsilon(a) <= 1.0


def test_config_validation():
    with pytest.raises(PrivacyError):
        PrivacyConfig(eps_min=0.5, eps_max=0.1)
    with pytest.raises(PrivacyError):
        PrivacyConfig(clip_C=0)
    assert PrivacyConfig().position_noise_scale == pytest.approx(4.0)


def test_policies():
    assert epsilon_for_policy("static_low_eps", 0.0) == 0.1
    assert epsilon_for_policy("static_high_eps", 1.0) == 1.0
    assert epsilon_for_policy("adaptive", 0.0) == epsilon_for_policy("static_high_eps", 0.0)
    with pytest.raises(PrivacyError):
        epsilon_for_policy("bogus", 0.0)


def test_clip_cases():
    g = GradientVector(np.array([0.25, -0.25]))
    assert np.array_equal(clip_gradient(g, 1.0).values, g.values)
    assert np.allclose(clip_gradient(GradientVector(np.array([3.0, 1.0])), 2.0).values, [1.5, 0.5])
    z = clip_gradient(GradientVector(np.zeros(4)), 1.0)
    assert np.array_equal(z.values, np.zeros(4)) and z.clipped


@settings(max_examples=200)
@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=20), st.floats(0.01, 100))
def test_clip_oracle_idempotent_nonexpanding(vals, C):
    g = GradientVector(np.array(vals))
    once = clip_gradient(g, C)
    twice = clip_gradient(once, C)
    assert np.allclose(once.values, l1_clip(vals, C), rtol=1e-12, atol=1e-12)
    assert np.allclose(twice.values, once.values, rtol=1e-12, atol=1e-12)
    assert np.abs(once.values).sum() <= max(np.abs(g.values).sum(), 0) + 1e-9
    assert np.abs(once.values).sum() <= C * (1 + 1e-12)


def test_noise_requires_clipping_and_positive_eps():
    with pytest.raises(PrivacyError):
        add_dp_noise(GradientVector(np.zeros(3)), 1.0, 1.0, RngStream(0))
    with pytest.raises(PrivacyError):
        add_dp_noise(clip_gradient(GradientVector(np.zeros(3)), 1.0), 0.0, 1.0, RngStream(0))


def test_noise_deterministic_and_metadata():
    g = clip_gradient(GradientVector(np.ones(5)), 1.0)
    a = add_dp_noise(g, 0.5, 1.0, RngStream(4, 4))
    b = add_dp_noise(g, 0.5, 1.0, RngStream(4, 4))
    assert a.values.tobytes() == b.values.tobytes()
    assert a.noised and a.epsilon == 0.5


def _noise(eps, n=100_000, C=1.0, seed=0):
    g = clip_gradient(GradientVector(np.zeros(n)), C)
    return add_dp_noise(g, eps, C, RngStream(seed, 11)).values


def test_noise_mean_within_three_sigma():
    eps, C = 0.7, 1.0
    x = _noise(eps, C=C)
    assert abs(x.mean()) < 3 * (2 * C / eps) * np.sqrt(2 / 1e5)


def test_noise_std_scales_inverse_with_eps():
    s1 = _noise(0.1, seed=1).std()
    s2 = _noise(1.0, seed=2).std()
    assert s1 / s2 == pytest.approx(10, rel=0.05)


def test_noise_ks_against_laplace():
    eps, C = 0.4, 1.0
    x = _noise(eps, C=C, seed=3)
    res = stats.kstest(x, lambda v: laplace_cdf(v, laplace_scale(eps, C)))
    assert res.pvalue > 0.01


def test_position_noise_scale():
    x = noise_positions(np.zeros((50_000, 3)), PrivacyConfig(), RngStream(8))
    assert np.abs(x).mean() == pytest.approx(4.0, rel=0.02)


def test_ewma_cases():
    prev = ThreatIndicators(0.5, 0.4, 0.2)
    decayed = update_threat_indicators(prev, None, 0.2)
    assert (decayed.r_reject, decayed.d_anomaly, decayed.c_comm) == pytest.approx((0.4, 0.32, 0.16))
    up = update_threat_indicators(ThreatIndicators(), ThreatIndicators(1, 1, 1), 0.2)
    assert up.r_reject == pytest.approx(0.2)
    obs = ThreatIndicators(0.3, 0.6, 0.9)
    assert update_threat_indicators(prev, obs, 1.0) == obs
    with pytest.raises(PrivacyError):
        update_threat_indicators(prev, None, 0.0)


def test_observation_normalization():
    obs = ThreatObservation(submitted=10, rejected=3, anomaly_scores=[0.2, 0.4], sent=20, lost=5, mean_delay=0.1)
    ind = obs.normalized(0.2)
    assert ind.r_reject == pytest.approx(0.3)
    assert ind.d_anomaly == pytest.approx(0.3)
    assert ind.c_comm == pytest.approx(0.5 * 0.25 + 0.5 * 0.5)
    assert ThreatObservation(sent=4, mean_delay=10.0).normalized().c_comm == pytest.approx(0.5)
