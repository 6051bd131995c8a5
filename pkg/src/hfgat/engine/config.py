"""Scenario configuration schema.

Scenario files are JSON (or YAML) objects matching :class:`Scenario`; every
field has a default, so ``{}`` is a valid scenario.  Unknown keys are
rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

Pipeline = Literal["hfgat", "fedavg_variant", "monolithic", "centralized", "disabled"]
PrivacyPolicy = Literal["adaptive", "static_low_eps", "static_high_eps"]


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KinematicsConfig(_Model):
    v_max: float = Field(20.0, gt=0)
    a_max: float = Field(10.0, gt=0)
    safety_radius: float = Field(2.0, gt=0)
    near_miss_radius: float = Field(5.0, gt=0)
    encounter_radius: float = Field(50.0, gt=0)


class MissionConfig(_Model):
    """Random start/goal generator; paths are resampled until each crosses another."""

    altitude: tuple[float, float] = (95.0, 105.0)
    min_path: float = Field(250.0, gt=0)
    max_path: float = Field(550.0, gt=0)
    cruise_speed: float = Field(15.0, gt=0)
    tolerance: float = Field(10.0, gt=0)
    budget_factor: float = Field(1.3, ge=1.0)
    budget_slack: float = Field(10.0, ge=0)
    margin: float = Field(50.0, ge=0)
    min_start_separation: float = Field(20.0, ge=0)
    force_crossings: bool = True

    @model_validator(mode="after")
    def _ordered(self):
        if self.min_path > self.max_path:
            raise ValueError("min_path must not exceed max_path")
        if self.altitude[0] > self.altitude[1]:
            raise ValueError("altitude band must be ordered")
        return self


class GradientPoison(_Model):
    kind: Literal["gradient_poison"] = "gradient_poison"
    mode: Literal["sign_flip", "scale", "random"] = "sign_flip"
    c: float = 100.0


class PositionSpoof(_Model):
    kind: Literal["position_spoof"] = "position_spoof"
    offset: float = Field(50.0, ge=0)


class CommJam(_Model):
    kind: Literal["comm_jam"] = "comm_jam"
    extra_loss: float = Field(0.2, ge=0, le=1)


Behavior = Union[GradientPoison, PositionSpoof, CommJam]


class AdversaryProfile(_Model):
    byzantine_fraction: float = Field(0.0, ge=0, le=1)
    behaviors: list[Behavior] = Field(default_factory=lambda: [GradientPoison(), PositionSpoof()])

    def behavior(self, kind: str):
        for b in self.behaviors:
            if b.kind == kind:
                return b
        return None

    def tolerance_flag(self, n: int) -> str:
        """``within`` when the Byzantine count is below ``n/3``."""
        count = round(self.byzantine_fraction * n)
        return "within" if 3 * count < n else "beyond"


class LinkConfig(_Model):
    base_latency: float = Field(0.005, ge=0)
    jitter: float = Field(0.002, ge=0)
    loss_prob: float = Field(0.01, ge=0, le=1)
    comm_radius: float = Field(1000.0, gt=0)


class CostConfig(_Model):
    c_local: float = Field(80e-6, ge=0)
    c_regional: float = Field(300e-6, ge=0)
    c_global: float = Field(5e-3, ge=0)
    c_central_pair: float = Field(0.2e-6, ge=0)
    blockchain_commit: float = Field(0.5, ge=0)


class PrivacySettings(_Model):
    eps_min: float = Field(0.1, gt=0)
    eps_max: float = Field(1.0, gt=0)
    clip_C: float = Field(1.0, gt=0)
    layer1_eps: float = Field(0.5, gt=0)
    position_sensitivity: float = Field(1.0, gt=0)
    policy: PrivacyPolicy = "adaptive"


class ThreatSettings(_Model):
    weights: tuple[float, float, float] = (0.5, 0.3, 0.2)
    ewma_lambda: float = Field(0.2, gt=0, le=1)
    delay_max: float = Field(0.2, gt=0)
    window: float = Field(1.0, gt=0)
    pinned: Optional[float] = Field(None, ge=0, le=1)


class LearningConfig(_Model):
    eta: float = Field(0.05, gt=0)
    learning_period: float = Field(1.0, gt=0)
    label_horizon: float = Field(2.0, gt=0)
    label_radius: float = Field(10.0, gt=0)
    label_mode: Literal["conflict", "proximity"] = "conflict"
    batch_size: int = Field(4, ge=1)
    tau_anomaly: float = Field(0.3, ge=0, le=1)
    max_staleness: int = Field(5, ge=0)
    init_scale: float = Field(0.1, gt=0)


class DecisionConfig(_Model):
    local_radius: float = Field(100.0, gt=0)
    max_local_neighbors: int = Field(8, ge=1)
    tau_critical: float = Field(0.8, ge=0, le=1)
    window: int = Field(10, ge=1)
    avoid_radius: float = Field(20.0, gt=0)
    separation_radius: float = Field(12.0, gt=0)
    horizon: float = Field(6.0, gt=0)
    velocity_tau: float = Field(1.0, gt=0)


class Scenario(_Model):
    n_uavs: int = 100
    world: tuple[float, float, float] = (1000.0, 1000.0, 1000.0)
    duration: float = Field(60.0, gt=0)
    tick: float = Field(0.01, gt=0)
    decision_period: float = Field(0.1, gt=0)
    region_target: int = Field(35, ge=2)
    pipeline: Pipeline = "hfgat"
    seeds: list[int] = Field(default_factory=lambda: [0])
    adversary: AdversaryProfile = AdversaryProfile()
    mission: MissionConfig = MissionConfig()
    kinematics: KinematicsConfig = KinematicsConfig()
    link: LinkConfig = LinkConfig()
    cost: CostConfig = CostConfig()
    privacy: PrivacySettings = PrivacySettings()
    threat: ThreatSettings = ThreatSettings()
    learning: LearningConfig = LearningConfig()
    decision: DecisionConfig = DecisionConfig()
    dht_k: int = Field(4, ge=1)
    event_log: bool = False

    @field_validator("n_uavs")
    @classmethod
    def _at_least_two(cls, v):
        if v < 2:
            raise ValueError("n_uavs must be at least 2")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.decision_period < self.tick:
            raise ValueError("decision_period must be at least one tick")
        if self.privacy.eps_min > self.privacy.eps_max:
            raise ValueError("eps_min must not exceed eps_max")
        if abs(sum(self.threat.weights) - 1.0) > 1e-12 or min(self.threat.weights) < 0:
            raise ValueError("threat weights must be non-negative and sum to 1")
        return self

    def updated(self, **changes) -> "Scenario":
        """Copy with top-level or dotted (``"adversary.byzantine_fraction"``) overrides."""
        data = self.model_dump()
        for key, value in changes.items():
            target = data
            *path, last = key.split(".")
            for p in path:
                target = target[p]
            target[last] = value
        return Scenario.model_validate(data)


def parse_scenario(data: dict) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a key/value object")
    return parse_scenario(data)
