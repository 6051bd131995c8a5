"""Threat scoring, adaptive privacy budget, L1 clipping and Laplace noise.

The mechanism is per-coordinate Laplace noise with scale ``2 * C / eps`` on
gradients clipped to L1 norm ``C`` (sensitivity ``2C`` under replace-one
adjacency).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import RngStream
from .gradient import GradientVector

EPS_MIN = 0.1
EPS_MAX = 1.0
LAYER1_EPS = 0.5
POSITION_SENSITIVITY = 1.0


class PrivacyError(ValueError):
    pass


def _unit(name: str, x: float) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise PrivacyError(f"{name} must lie in [0, 1], got {x}")
    return x


@dataclass(frozen=True)
class ThreatIndicators:
    r_reject: float = 0.0
    d_anomaly: float = 0.0
    c_comm: float = 0.0

    def __post_init__(self):
        _unit("r_reject", self.r_reject)
        _unit("d_anomaly", self.d_anomaly)
        _unit("c_comm", self.c_comm)


@dataclass(frozen=True)
class ThreatWeights:
    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise PrivacyError("threat weights must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-12:
            raise PrivacyError("threat weights must sum to 1")


@dataclass(frozen=True)
class PrivacyConfig:
    eps_min: float = EPS_MIN
    eps_max: float = EPS_MAX
    clip_C: float = 1.0
    layer1_eps: float = LAYER1_EPS
    position_sensitivity: float = POSITION_SENSITIVITY

    def __post_init__(self):
        if not 0 < self.eps_min <= self.eps_max:
            raise PrivacyError("need 0 < eps_min <= eps_max")
        if not self.clip_C > 0:
            raise PrivacyError("clip_C must be positive")

    @property
    def position_noise_scale(self) -> float:
        """Laplace scale applied per coordinate to shared positions."""
        return 2.0 * self.position_sensitivity / self.layer1_eps


def threat_score(ind: ThreatIndicators, w: ThreatWeights = ThreatWeights()) -> float:
    s = w.alpha * ind.r_reject + w.beta * ind.d_anomaly + w.gamma * ind.c_comm
    return min(max(s, 0.0), 1.0)


def adaptive_epsilon(theta_threat: float, cfg: PrivacyConfig = PrivacyConfig()) -> float:
    """Linear interpolation from ``eps_max`` (no threat) down to ``eps_min``."""
    theta = _unit("theta_threat", theta_threat)
    if theta == 0.0:
        return cfg.eps_max
    if theta == 1.0:
        return cfg.eps_min
    return cfg.eps_min + (1.0 - theta) * (cfg.eps_max - cfg.eps_min)


def clip_gradient(g: GradientVector, clip_C: float) -> GradientVector:
    if not clip_C > 0:
        raise PrivacyError("clip_C must be positive")
    l1 = float(np.abs(g.values).sum())
    if l1 <= clip_C:
        return replace(g, clipped=True, meta={**g.meta, "clip_scaled": False})
    return g.with_values(g.values * (clip_C / l1), clipped=True,
                         meta={**g.meta, "clip_scaled": True})


def laplace_scale(eps: float, clip_C: float) -> float:
    return 2.0 * clip_C / eps


def add_dp_noise(g: GradientVector, eps: float, clip_C: float, rng: RngStream) -> GradientVector:
    if not eps > 0:
        raise PrivacyError("epsilon must be positive")
    if not g.clipped:
        raise PrivacyError("gradient must be clipped before noise is added")
    noise = rng.laplace(laplace_scale(eps, clip_C), len(g))
    return g.with_values(g.values + noise, noised=True, epsilon=float(eps))


def noise_positions(pos: np.ndarray, cfg: PrivacyConfig, rng: RngStream) -> np.ndarray:
    """Layer-1 position sharing: fixed-epsilon Laplace noise on every coordinate."""
    return pos + rng.laplace(cfg.position_noise_scale, np.shape(pos))


DELAY_MAX = 0.2


@dataclass(frozen=True)
class ThreatObservation:
    """Raw evidence gathered over one threat window."""

    submitted: int = 0
    rejected: int = 0
    anomaly_scores: Sequence[float] = ()
    sent: int = 0
    lost: int = 0
    mean_delay: float = 0.0

    def normalized(self, delay_max: float = DELAY_MAX) -> ThreatIndicators:
        r = self.rejected / self.submitted if self.submitted else 0.0
        d = float(np.mean(self.anomaly_scores)) if len(self.anomaly_scores) else 0.0
        loss = self.lost / self.sent if self.sent else 0.0
        c = 0.5 * loss + 0.5 * min(1.0, self.mean_delay / delay_max) if self.sent else 0.0
        return ThreatIndicators(min(r, 1.0), min(max(d, 0.0), 1.0), min(c, 1.0))


def update_threat_indicators(prev: ThreatIndicators, events: ThreatObservation | ThreatIndicators | None,
                             ewma_lambda: float = 0.2, delay_max: float = DELAY_MAX) -> ThreatIndicators:
    """EWMA update of each indicator toward this window's normalised observation.

    Missing evidence observes as 0, so indicators decay by ``1 - lambda``.
    """
    if not 0.0 < ewma_lambda <= 1.0:
        raise PrivacyError("ewma_lambda must lie in (0, 1]")
    if events is None:
        obs = ThreatIndicators()
    elif isinstance(events, ThreatIndicators):
        obs = events
    else:
        obs = events.normalized(delay_max)
    lam = ewma_lambda
    if lam == 1.0:
        return obs
    return ThreatIndicators(
        (1 - lam) * prev.r_reject + lam * obs.r_reject,
        (1 - lam) * prev.d_anomaly + lam * obs.d_anomaly,
        (1 - lam) * prev.c_comm + lam * obs.c_comm,
    )


def epsilon_for_policy(policy: str, theta_threat: float, cfg: PrivacyConfig = PrivacyConfig()) -> float:
    """Budget used by a privacy policy: ``adaptive`` or one of the static ends."""
    if policy == "adaptive":
        return adaptive_epsilon(theta_threat, cfg)
    if policy == "static_low_eps":
        return cfg.eps_min
    if policy == "static_high_eps":
        return cfg.eps_max
    raise PrivacyError(f"unknown privacy policy {policy!r}")


def laplace_cdf(x, scale: float):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale))

