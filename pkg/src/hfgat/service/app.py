"""HTTP service around the core library.

Regional aggregators live in process memory for the lifetime of the app.
Gradients may be posted as JSON or in the binary wire format
(``application/octet-stream``); models can be fetched either way.
"""

from __future__ import annotations

import json
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from ..aggregation import AggregationError, AggregatorState, Aggregated, Buffered, Rejected, submit_gradient
from ..engine.metrics import MetricsReport
from ..engine.runner import run_scenario
from ..globallayer.audit import AuditRecord, generate_proof, verify_proof
from ..gradient import GradientVector, WireFormatError, encode_model
from ..privacy import PrivacyConfig, PrivacyError, ThreatIndicators, ThreatWeights, adaptive_epsilon, \
    epsilon_for_policy, laplace_scale, threat_score
from .schemas import AggregatorCreate, AggregatorInfo, AuditOut, EpsilonRequest, EpsilonResponse, GradientIn, \
    ModelOut, ProveRequest, RunRequest, SubmitResponse, ThreatRequest, ThreatResponse, VerifyRequest, VerifyResponse

BINARY = "application/octet-stream"


def _hex(name: str, text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise HTTPException(422, f"{name} is not valid hex")


def _info(aid: int, st: AggregatorState) -> AggregatorInfo:
    return AggregatorInfo(aggregator_id=aid, n_region=st.n_region, f=st.f, trigger=st.trigger, dim=st.dim,
                          version=st.version, mode=st.mode, buffered=len(st.buffer),
                          rejected_total=len(st.rejection_log))


def create_app() -> FastAPI:
    app = FastAPI(title="hfgat", version="0.1.0")
    aggregators: dict[int, AggregatorState] = {}
    lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/privacy/epsilon", response_model=EpsilonResponse)
    def epsilon(req: EpsilonRequest):
        try:
            cfg = PrivacyConfig(req.eps_min, req.eps_max, req.clip_C)
            eps = epsilon_for_policy(req.policy, req.theta_threat, cfg)
        except PrivacyError as exc:
            raise HTTPException(422, str(exc))
        return EpsilonResponse(epsilon=eps, laplace_scale=laplace_scale(eps, req.clip_C))

    @app.post("/privacy/threat", response_model=ThreatResponse)
    def threat(req: ThreatRequest):
        try:
            theta = threat_score(ThreatIndicators(req.r_reject, req.d_anomaly, req.c_comm),
                                 ThreatWeights(*req.weights))
        except PrivacyError as exc:
            raise HTTPException(422, str(exc))
        return ThreatResponse(theta_threat=theta, epsilon=adaptive_epsilon(theta))

    @app.post("/aggregators", response_model=AggregatorInfo, status_code=201)
    def create_aggregator(req: AggregatorCreate):
        if req.theta is None and req.dim is None:
            raise HTTPException(422, "give either theta or dim")
        theta = np.asarray(req.theta, float) if req.theta is not None else np.zeros(req.dim)
        if not np.all(np.isfinite(theta)):
            raise HTTPException(422, "theta must be finite")
        st = AggregatorState(theta, req.n_region, eta=req.eta, tau_anomaly=req.tau_anomaly,
                             max_staleness=req.max_staleness, mode=req.mode)
        with lock:
            aid = len(aggregators)
            aggregators[aid] = st
        return _info(aid, st)

    def _get(aid: int) -> AggregatorState:
        st = aggregators.get(aid)
        if st is None:
            raise HTTPException(404, f"no aggregator {aid}")
        return st

    @app.get("/aggregators/{aid}", response_model=AggregatorInfo)
    def get_aggregator(aid: int):
        return _info(aid, _get(aid))

    @app.post("/aggregators/{aid}/gradients", response_model=SubmitResponse)
    async def submit(aid: int, request: Request):
        st = _get(aid)
        if request.headers.get("content-type", "").startswith(BINARY):
            try:
                g = GradientVector.from_bytes(await request.body())
            except (WireFormatError, ValueError) as exc:
                raise HTTPException(400, f"bad gradient frame: {exc}")
        else:
            try:
                body = GradientIn.model_validate(await request.json())
                g = GradientVector(np.asarray(body.values, float), body.owner, body.model_version,
                                   body.clipped, body.noised)
            except ValueError as exc:
                raise HTTPException(422, str(exc))
        with lock:
            try:
                out = submit_gradient(st, g)
            except AggregationError as exc:
                raise HTTPException(422, str(exc))
        if isinstance(out, Rejected):
            return SubmitResponse(outcome="rejected", score=out.score, reason=out.reason)
        if isinstance(out, Aggregated):
            return SubmitResponse(outcome="aggregated", version=out.version)
        assert isinstance(out, Buffered)
        return SubmitResponse(outcome="buffered", buffered=out.buffered)

    @app.get("/aggregators/{aid}/model", response_model=ModelOut)
    def model(aid: int, request: Request):
        st = _get(aid)
        if BINARY in request.headers.get("accept", ""):
            return Response(encode_model(st.theta_G, st.version), media_type=BINARY)
        return ModelOut(version=st.version, theta=[float(x) for x in st.theta_G])

    @app.post("/audit/prove", response_model=AuditOut)
    def prove(req: ProveRequest):
        try:
            rec = generate_proof(_hex("action_digest", req.action_digest), _hex("state_digest", req.state_digest),
                                 req.rule_id, _hex("salt", req.salt))
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        return AuditOut(commitment=rec.commitment.hex(), key=rec.key.hex(), record=rec.to_bytes().hex())

    @app.post("/audit/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest):
        try:
            rec = AuditRecord.from_bytes(_hex("record", req.record))
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        revealed = (_hex("action_digest", req.action_digest), _hex("state_digest", req.state_digest),
                    req.rule_id, _hex("salt", req.salt))
        return VerifyResponse(valid=verify_proof(rec, revealed))

    @app.post("/scenarios/run")
    def run(req: RunRequest) -> dict:
        rep: MetricsReport = run_scenario(req.scenario, req.seed)
        return json.loads(rep.to_json())

    return app


app = create_app()
