"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..engine.config import Scenario


class EpsilonRequest(BaseModel):
    theta_threat: float = Field(ge=0, le=1)
    policy: Literal["adaptive", "static_low_eps", "static_high_eps"] = "adaptive"
    eps_min: float = Field(0.1, gt=0)
    eps_max: float = Field(1.0, gt=0)
    clip_C: float = Field(1.0, gt=0)


class EpsilonResponse(BaseModel):
    epsilon: float
    laplace_scale: float


class ThreatRequest(BaseModel):
    r_reject: float = Field(0.0, ge=0, le=1)
    d_anomaly: float = Field(0.0, ge=0, le=1)
    c_comm: float = Field(0.0, ge=0, le=1)
    weights: tuple[float, float, float] = (0.5, 0.3, 0.2)


class ThreatResponse(BaseModel):
    theta_threat: float
    epsilon: float


class AggregatorCreate(BaseModel):
    n_region: int = Field(ge=1)
    theta: Optional[list[float]] = None
    dim: Optional[int] = Field(None, ge=1)
    eta: float = Field(0.05, gt=0)
    mode: Literal["robust", "fedavg"] = "robust"
    tau_anomaly: float = Field(0.3, ge=0, le=1)
    max_staleness: int = Field(5, ge=0)


class AggregatorInfo(BaseModel):
    aggregator_id: int
    n_region: int
    f: int
    trigger: int
    dim: int
    version: int
    mode: str
    buffered: int
    rejected_total: int


class GradientIn(BaseModel):
    values: list[float]
    owner: int = Field(0, ge=0)
    model_version: int = Field(0, ge=0)
    clipped: bool = False
    noised: bool = False


class SubmitResponse(BaseModel):
    outcome: Literal["buffered", "rejected", "aggregated"]
    buffered: Optional[int] = None
    score: Optional[float] = None
    reason: Optional[str] = None
    version: Optional[int] = None


class ModelOut(BaseModel):
    version: int
    theta: list[float]


class ProveRequest(BaseModel):
    action_digest: str = Field(description="hex, 32 bytes")
    state_digest: str = Field(description="hex, 32 bytes")
    rule_id: str
    salt: str = Field(description="hex, 16 bytes")


class AuditOut(BaseModel):
    commitment: str
    key: str
    record: str = Field(description="hex-encoded binary record")


class VerifyRequest(BaseModel):
    record: str
    action_digest: str
    state_digest: str
    rule_id: str
    salt: str


class VerifyResponse(BaseModel):
    valid: bool


class RunRequest(BaseModel):
    scenario: Scenario = Scenario()
    seed: int = Field(0, ge=0)
