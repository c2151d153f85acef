"""HTTP session service for live elicitation sessions.

Endpoints (JSON in/out):

    POST /sessions                  -> create a session, build Session-1 queue
    GET  /sessions/{id}/next        -> next scenario | phase transition | done
    POST /sessions/{id}/responses   -> record a choice (probing: advance protocol)
    POST /sessions/{id}/fit         -> fit the preference model on Session-1 data
    GET  /sessions/{id}/weights     -> fitted weights
    GET  /sessions/{id}/report      -> evaluation report over Session-2 responses

Each session persists as an append-only JSONL event log under the data
directory; every acknowledged write is flushed and fsynced first, and boot
replays the logs, so a restart recovers exactly the acknowledged state.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from . import dataset as ds
from . import study, tree as tree_mod
from .awp import Thresholds
from .metrics import FeatureWeights
from .preference import BTModel, PairwiseComparison, fit_bt, weights_from_beta
from .schema import Direction, FeatureSchema, default_schema
from .study import (
    GLOBAL_CONSTRUCTION_WEIGHTS,
    ProbingSession,
    Scenario,
    ScenarioResponse,
    StudyConfig,
    start_probing,
    probing_step,
)

SERVICE_FORMAT_VERSION = 1

PHASE_SESSION1 = "Session1"
PHASE_SESSION2 = "Session2"
PHASE_COMPLETE = "Complete"


@dataclass
class SessionState:
    """In-memory session record, rebuilt from the event log on boot."""

    id: str
    participant: str
    created_at: float
    phase: str = PHASE_SESSION1
    session1: list[Scenario] = field(default_factory=list)
    session2: list[Scenario] = field(default_factory=list)
    delivered: set = field(default_factory=set)
    answered: set = field(default_factory=set)
    responses: list[dict] = field(default_factory=list)
    model: BTModel | None = None
    probing: dict = field(default_factory=dict)  # scenario id -> ProbingSession
    min_session1_responses: int = 25
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def scenarios_by_id(self) -> dict:
        return {s.id: s for s in self.session1 + self.session2}

    def queue(self) -> list[Scenario]:
        return self.session1 if self.phase == PHASE_SESSION1 else self.session2

    def fitted_weights(self) -> FeatureWeights | None:
        return weights_from_beta(self.model) if self.model else None

    def inferred_thresholds(self, schema: FeatureSchema) -> Thresholds:
        """Conservative caps from recorded probing intervals (last accepted)."""
        caps: dict[str, float] = {}
        for session in self.probing.values():
            for iv in session.intervals:
                if iv.cap_is_schema_bound:
                    continue
                spec = schema.spec(iv.feature)
                prev = caps.get(iv.feature)
                if spec.direction == Direction.DECREASE_ONLY:
                    caps[iv.feature] = iv.last_accepted if prev is None else max(prev, iv.last_accepted)
                else:
                    caps[iv.feature] = iv.last_accepted if prev is None else min(prev, iv.last_accepted)
        return Thresholds(caps=caps)


class SessionHub:
    """Owns session state, the event logs, and replay."""

    def __init__(self, data_dir: str, tree: tree_mod.DecisionTree, dataset,
                 schema: FeatureSchema | None = None,
                 cfg: StudyConfig | None = None,
                 construction_weights: FeatureWeights | None = None):
        self.data_dir = data_dir
        self.sessions_dir = os.path.join(data_dir, "sessions")
        os.makedirs(self.sessions_dir, exist_ok=True)
        self.tree = tree
        self.dataset = dataset
        self.schema = schema or default_schema()
        self.cfg = cfg or StudyConfig()
        self.w_construction = construction_weights or GLOBAL_CONSTRUCTION_WEIGHTS
        self.sessions: dict[str, SessionState] = {}
        self._boot()

    # -- persistence ------------------------------------------------------

    def _log_path(self, sid: str) -> str:
        return os.path.join(self.sessions_dir, f"{sid}.jsonl")

    def _append(self, sid: str, event: dict) -> None:
        event = {"ts": time.time(), **event}
        with open(self._log_path(sid), "a") as f:
            f.write(json.dumps(event) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def _boot(self) -> None:
        for name in sorted(os.listdir(self.sessions_dir)):
            if not name.endswith(".jsonl"):
                continue
            sid = name[:-len(".jsonl")]
            with open(os.path.join(self.sessions_dir, name)) as f:
                events = [json.loads(line) for line in f if line.strip()]
            state = None
            for ev in events:
                state = self._apply(state, ev)
            if state is not None:
                self.sessions[sid] = state

    # -- event transitions ------------------------------------------------

    def _apply(self, state: SessionState | None, ev: dict) -> SessionState:
        kind = ev["event"]
        if kind == "created":
            state = SessionState(
                id=ev["id"], participant=ev["participant"], created_at=ev["ts"],
                session1=[Scenario.from_json_dict(d, self.schema)
                          for d in ev["scenarios"]],
                min_session1_responses=ev["min_session1_responses"],
            )
            return state
        assert state is not None, "event before creation"
        if kind == "delivered":
            state.delivered.add(ev["scenario_id"])
        elif kind == "response":
            self._apply_response(state, ev["payload"])
        elif kind == "fitted":
            state.model = BTModel.from_json_dict(ev["model"], self.schema)
        elif kind == "session2_built":
            state.session2 = [Scenario.from_json_dict(d, self.schema)
                              for d in ev["scenarios"]]
            state.phase = PHASE_SESSION2
        elif kind == "completed":
            state.phase = PHASE_COMPLETE
        else:
            raise ValueError(f"unknown event {kind!r}")
        return state

    def _apply_response(self, state: SessionState, payload: dict) -> None:
        sid = payload["scenario_id"]
        scenario = state.scenarios_by_id[sid]
        if scenario.kind == "probing":
            if sid not in state.probing:
                state.probing[sid] = start_probing(
                    scenario, payload["choice"], self.schema)
            else:
                state.probing[sid] = probing_step(
                    state.probing[sid], payload["choice"], self.tree,
                    pivot_reason=payload.get("pivot_reason", "threshold"),
                    schema=self.schema)
            if state.probing[sid].terminated:
                state.answered.add(sid)
        else:
            state.answered.add(sid)
        state.responses.append(payload)

    # -- operations -------------------------------------------------------

    def create_session(self, participant: str = "", seed: int | None = None) -> SessionState:
        if self.tree is None or not self.dataset:
            raise RuntimeError("no model loaded")
        sid = uuid.uuid4().hex
        seed = seed if seed is not None else int.from_bytes(os.urandom(4), "big")
        scenarios, _ = study.build_tradeoff_scenarios(
            self.tree, self.dataset, self.w_construction,
            self.cfg.session1_tradeoff, seed, self.schema,
            margin=self.cfg.margin)
        ev = {"event": "created", "id": sid, "participant": participant,
              "seed": seed,
              "min_session1_responses": min(self.cfg.session1_tradeoff, len(scenarios)),
              "scenarios": [s.to_json_dict(self.schema) for s in scenarios]}
        self._append(sid, ev)
        state = self._apply(None, {"ts": time.time(), **ev})
        self.sessions[sid] = state
        return state

    def get(self, sid: str) -> SessionState:
        if sid not in self.sessions:
            raise KeyError(sid)
        return self.sessions[sid]

    def next_scenario(self, sid: str) -> dict:
        state = self.get(sid)
        with state.lock:
            if state.phase == PHASE_COMPLETE:
                return {"status": "done"}
            for scenario in state.queue():
                if scenario.id not in state.answered:
                    if scenario.id not in state.delivered:
                        self._append(sid, {"event": "delivered",
                                           "scenario_id": scenario.id})
                        state.delivered.add(scenario.id)
                    payload = {"status": "scenario", "phase": state.phase,
                               "scenario": scenario.to_json_dict(self.schema)}
                    if scenario.kind == "probing" and scenario.id in state.probing:
                        payload["probing"] = self._probing_view(state, scenario.id)
                    return payload
            # queue exhausted
            if state.phase == PHASE_SESSION1:
                if state.model is None:
                    return {"status": "awaiting_fit",
                            "detail": "Session 1 complete; POST /fit to continue"}
                self._build_session2(state)
                return self._first_of_session2(state)
            self._append(sid, {"event": "completed"})
            state.phase = PHASE_COMPLETE
            return {"status": "done"}

    def _first_of_session2(self, state: SessionState) -> dict:
        for scenario in state.session2:
            if scenario.id not in state.answered:
                if scenario.id not in state.delivered:
                    self._append(state.id, {"event": "delivered",
                                            "scenario_id": scenario.id})
                    state.delivered.add(scenario.id)
                return {"status": "scenario", "phase": state.phase,
                        "scenario": scenario.to_json_dict(self.schema)}
        self._append(state.id, {"event": "completed"})
        state.phase = PHASE_COMPLETE
        return {"status": "done"}

    def _build_session2(self, state: SessionState) -> None:
        w_hat = state.fitted_weights()
        assert w_hat is not None
        seed = int.from_bytes(bytes.fromhex(state.id[:8]), "big")
        rng = np.random.default_rng(seed)
        trade, _ = study.build_tradeoff_scenarios(
            self.tree, self.dataset, w_hat, self.cfg.session2_tradeoff,
            int(rng.integers(2**31)), self.schema, margin=self.cfg.margin)
        probe, _ = study.build_probing_scenarios(
            self.tree, self.dataset, w_hat, self.cfg.session2_probing,
            int(rng.integers(2**31)), self.schema, margin=self.cfg.margin)
        rounds, _ = study.build_rounding_scenarios(
            self.tree, self.dataset, self.cfg.session2_rounding,
            int(rng.integers(2**31)), self.schema)
        scenarios = trade + probe + rounds
        self._append(state.id, {"event": "session2_built",
                                "scenarios": [s.to_json_dict(self.schema)
                                              for s in scenarios]})
        state.session2 = scenarios
        state.phase = PHASE_SESSION2

    def _probing_view(self, state: SessionState, scenario_id: str) -> dict:
        session = state.probing[scenario_id]
        view = {"phase": session.phase,
                "terminated": session.terminated,
                "intervals": [iv.to_json_dict() for iv in session.intervals]}
        if not session.terminated:
            first, second = session.current_pair()
            view["offer_escalating"] = first.to_json_dict(self.schema)
            view["offer_standing"] = second.to_json_dict(self.schema)
        return view

    def submit_response(self, sid: str, payload: dict) -> dict:
        state = self.get(sid)
        with state.lock:
            scenario_id = payload.get("scenario_id")
            scenario = state.scenarios_by_id.get(scenario_id)
            if scenario is None:
                raise KeyError(f"unknown scenario {scenario_id!r}")
            if scenario_id not in state.delivered:
                raise ValueError("scenario not yet delivered")
            if scenario_id in state.answered:
                raise ValueError("scenario already answered")
            choice = payload.get("choice")
            if scenario.kind == "probing":
                started = scenario_id in state.probing
                valid = ("A", "B", "reject_both") if not started \
                    else ("escalate", "other", "reject_both")
                if choice not in valid:
                    raise ValueError(f"choice must be one of {valid}")
            elif choice not in ("A", "B", "reject_both"):
                raise ValueError("choice must be A, B, or reject_both")
            event_payload = {"scenario_id": scenario_id, "choice": choice,
                             "reason": payload.get("reason", "")}
            if "pivot_reason" in payload:
                event_payload["pivot_reason"] = payload["pivot_reason"]
            # durable append before acknowledging
            self._append(sid, {"event": "response", "payload": event_payload})
            self._apply_response(state, event_payload)
            ack = {"status": "ok", "scenario_id": scenario_id}
            if scenario.kind == "probing":
                ack["probing"] = self._probing_view(state, scenario_id)
            return ack

    def fit(self, sid: str) -> dict:
        state = self.get(sid)
        with state.lock:
            by_id = {s.id: s for s in state.session1}
            comparisons = []
            for resp in state.responses:
                sc = by_id.get(resp["scenario_id"])
                if sc is None or resp["choice"] not in ("A", "B"):
                    continue
                comparisons.append(PairwiseComparison(
                    scenario_id=sc.id, source=sc.source,
                    recourse_a=sc.recourse_a, recourse_b=sc.recourse_b,
                    choice=resp["choice"], reason=resp.get("reason", "")))
            if len(comparisons) < state.min_session1_responses:
                raise ValueError(
                    f"need {state.min_session1_responses} Session-1 responses, "
                    f"have {len(comparisons)}")
            model = fit_bt(comparisons, self.schema, reg=self.cfg.reg)
            self._append(sid, {"event": "fitted",
                               "model": model.to_json_dict(self.schema)})
            state.model = model
            return model.to_json_dict(self.schema)

    def weights(self, sid: str) -> dict:
        state = self.get(sid)
        w = state.fitted_weights()
        if w is None:
            raise ValueError("model not fitted yet")
        return {"weights": w.to_json_dict(self.schema)}

    def report(self, sid: str) -> dict:
        state = self.get(sid)
        with state.lock:
            w = state.fitted_weights()
            if w is None:
                raise ValueError("model not fitted yet")
            by_id = {s.id: s for s in state.session2}
            responses = []
            seen = set()
            for resp in state.responses:
                scid = resp["scenario_id"]
                if scid not in by_id or scid in seen:
                    continue
                seen.add(scid)
                responses.append(ScenarioResponse(scid, resp["choice"],
                                                  resp.get("reason", "")))
            alpha = state.inferred_thresholds(self.schema)
            report = study.evaluate_session(responses, w, alpha,
                                            state.session2, self.schema)
            return {
                "session_id": sid,
                "phase": state.phase,
                "report": report.to_json_dict(),
                "thresholds": alpha.to_json_dict(),
                "weights": w.to_json_dict(self.schema),
                "probing_intervals": {
                    scid: [iv.to_json_dict() for iv in s.intervals]
                    for scid, s in state.probing.items()
                },
            }


def create_app(data_dir: str, tree_path: str | None = None,
               dataset_path: str | None = None,
               hub: SessionHub | None = None,
               static_dir: str | None = None) -> FastAPI:
    """Build the FastAPI app; paths may come from args or env vars."""
    if hub is None:
        tree_path = tree_path or os.environ.get("RECOURSELAB_TREE")
        dataset_path = dataset_path or os.environ.get("RECOURSELAB_DATA")
        if not tree_path or not dataset_path:
            raise RuntimeError("tree and dataset paths required (args or env)")
        tree = tree_mod.load_tree(tree_path)
        labeled = ds.read_csv(dataset_path)
        hub = SessionHub(data_dir, tree, labeled)

    app = FastAPI(title="recourselab session service")
    app.state.hub = hub
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def _wrap(fn, *args):
        try:
            return fn(*args)
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        except ValueError as e:
            raise HTTPException(status_code=409, detail=str(e))

    @app.post("/sessions")
    def create_session(body: dict | None = None):
        body = body or {}
        state = hub.create_session(participant=body.get("participant", ""),
                                   seed=body.get("seed"))
        return {"session_id": state.id, "phase": state.phase,
                "queue_length": len(state.session1)}

    @app.get("/sessions/{sid}/next")
    def next_scenario(sid: str):
        return _wrap(hub.next_scenario, sid)

    @app.post("/sessions/{sid}/responses")
    def submit(sid: str, body: dict):
        return _wrap(hub.submit_response, sid, body)

    @app.post("/sessions/{sid}/fit")
    def fit(sid: str):
        return _wrap(hub.fit, sid)

    @app.get("/sessions/{sid}/weights")
    def weights(sid: str):
        return _wrap(hub.weights, sid)

    @app.get("/sessions/{sid}/report")
    def report(sid: str):
        return _wrap(hub.report, sid)

    static_dir = static_dir or os.environ.get("RECOURSELAB_STATIC")
    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
